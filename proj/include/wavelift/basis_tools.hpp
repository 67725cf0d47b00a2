#pragma once

// Explicit operators of the lifting transform, for verification only.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "errors.hpp"
#include "lifting.hpp"

namespace wavelift {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Single-level filter operators at level j.
///   analysis:  lambda_j = Ht * lambda_{j+1},  gamma_j = Gt * lambda_{j+1}
///   synthesis: lambda_{j+1} = Hs * lambda_j + Gs * gamma_j
struct FilterMatrices {
    int level = 0;
    SparseMatrix Ht;  // K(j) x K(j+1)
    SparseMatrix Gt;  // M(j) x K(j+1)
    SparseMatrix Hs;  // K(j+1) x K(j)
    SparseMatrix Gs;  // K(j+1) x M(j)
};

enum class LiftKind { Primal, Dual };

namespace detail {

inline SparseMatrix from_columns(Eigen::Index rows, const std::vector<std::vector<double>>& cols) {
    std::vector<Eigen::Triplet<double>> t;
    for (std::size_t c = 0; c < cols.size(); ++c)
        for (std::size_t r = 0; r < cols[c].size(); ++r)
            if (cols[c][r] != 0.0)
                t.emplace_back(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c), cols[c][r]);
    SparseMatrix m(rows, static_cast<Eigen::Index>(cols.size()));
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

inline std::vector<double> unit(std::size_t n, std::size_t i) {
    std::vector<double> e(n, 0.0);
    e[i] = 1.0;
    return e;
}

inline double max_abs(const SparseMatrix& m) {
    double x = 0.0;
    for (Eigen::Index k = 0; k < m.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) x = std::max(x, std::abs(it.value()));
    return x;
}

}  // namespace detail

/// Probes the single-level analysis and synthesis of `t` with unit vectors.
inline FilterMatrices extract_filters(const LiftingTransform& t, int j) {
    const GridHierarchy& h = t.hierarchy();
    if (j < 0 || j >= h.levels()) throw std::invalid_argument("filter level out of range");
    const std::size_t nf = h.level(j + 1).size(), nk = h.level(j).size(), nm = h.split(j).details.size();
    std::vector<std::vector<double>> hcols(nf), gcols(nf);
    for (std::size_t l = 0; l < nf; ++l) {
        auto [a, d] = t.analyze_level(j, detail::unit(nf, l));
        hcols[l] = std::move(a);
        gcols[l] = std::move(d);
    }
    std::vector<std::vector<double>> hscols(nk), gscols(nm);
    const std::vector<double> zk(nk, 0.0), zm(nm, 0.0);
    for (std::size_t k = 0; k < nk; ++k) hscols[k] = t.synthesize_level(j, detail::unit(nk, k), zm);
    for (std::size_t m = 0; m < nm; ++m) gscols[m] = t.synthesize_level(j, zk, detail::unit(nm, m));

    FilterMatrices f;
    f.level = j;
    f.Ht = detail::from_columns(static_cast<Eigen::Index>(nk), hcols);
    f.Gt = detail::from_columns(static_cast<Eigen::Index>(nm), gcols);
    f.Hs = detail::from_columns(static_cast<Eigen::Index>(nf), hscols);
    f.Gs = detail::from_columns(static_cast<Eigen::Index>(nf), gscols);
    return f;
}

/// The three lifting operators of level j as matrices: P1 and P2 map K(j) -> M(j), U maps M(j) -> K(j).
struct LiftingOperators {
    SparseMatrix P1;
    SparseMatrix U;
    SparseMatrix P2;
};

inline LiftingOperators extract_lifting_operators(const LiftingTransform& t, int j) {
    const GridHierarchy& h = t.hierarchy();
    const std::size_t nk = h.level(j).size(), nm = h.split(j).details.size();
    std::vector<std::vector<double>> p1(nk), p2(nk), u(nm);
    for (std::size_t k = 0; k < nk; ++k) {
        p1[k] = t.predict_p1(j, detail::unit(nk, k));
        p2[k] = t.predict_p2(j, detail::unit(nk, k));
    }
    for (std::size_t m = 0; m < nm; ++m) u[m] = t.update_operator(j, detail::unit(nm, m));
    return {detail::from_columns(static_cast<Eigen::Index>(nm), p1),
            detail::from_columns(static_cast<Eigen::Index>(nk), u),
            detail::from_columns(static_cast<Eigen::Index>(nm), p2)};
}

struct IdentityDeviation {
    std::string name;
    int level = 0;
    double deviation = 0.0;
};

struct BiorthogonalityReport {
    std::vector<IdentityDeviation> entries;

    double max_deviation() const {
        double m = 0.0;
        for (const auto& e : entries) m = std::max(m, e.deviation);
        return m;
    }
    bool passed(double tol = 1e-10) const { return max_deviation() <= tol; }
};

/// Deviations of Gt Hs = 0, Ht Gs = 0, Ht Hs = I, Gt Gs = I and Hs Ht + Gs Gt = I.
inline BiorthogonalityReport check_biorthogonality(const FilterMatrices& f) {
    const auto nk = f.Ht.rows(), nm = f.Gt.rows(), nf = f.Ht.cols();
    if (f.Gt.cols() != nf || f.Hs.rows() != nf || f.Gs.rows() != nf || f.Hs.cols() != nk || f.Gs.cols() != nm)
        throw StructuralError("filter matrices have inconsistent dimensions");
    SparseMatrix ik(nk, nk), im(nm, nm), ifn(nf, nf);
    ik.setIdentity();
    im.setIdentity();
    ifn.setIdentity();
    BiorthogonalityReport r;
    const SparseMatrix gh = f.Gt * f.Hs, hg = f.Ht * f.Gs;
    const SparseMatrix hh = SparseMatrix(f.Ht * f.Hs) - ik, gg = SparseMatrix(f.Gt * f.Gs) - im;
    const SparseMatrix comp = SparseMatrix(f.Hs * f.Ht) + SparseMatrix(f.Gs * f.Gt) - ifn;
    r.entries.push_back({"Gt*Hs=0", f.level, detail::max_abs(gh)});
    r.entries.push_back({"Ht*Gs=0", f.level, detail::max_abs(hg)});
    r.entries.push_back({"Ht*Hs=I", f.level, detail::max_abs(hh)});
    r.entries.push_back({"Gt*Gs=I", f.level, detail::max_abs(gg)});
    r.entries.push_back({"Hs*Ht+Gs*Gt=I", f.level, detail::max_abs(comp)});
    return r;
}

/// Biorthogonality report over every level of `t`.
inline BiorthogonalityReport check_biorthogonality(const LiftingTransform& t) {
    BiorthogonalityReport all;
    for (int j = 0; j < t.levels(); ++j) {
        auto r = check_biorthogonality(extract_filters(t, j));
        all.entries.insert(all.entries.end(), r.entries.begin(), r.entries.end());
    }
    return all;
}

inline void write_report_csv(std::ostream& out, const BiorthogonalityReport& r) {
    out << "identity,level,max_deviation\n";
    const auto old = out.precision(17);
    for (const auto& e : r.entries) out << e.name << ',' << e.level << ',' << e.deviation << '\n';
    out.precision(old);
}

/// Lifts a biorthogonal quadruple.
///   Primal, S: M(j) -> K(j):  Ht += S Gt,  Gs -= Hs S
///   Dual,   R: K(j) -> M(j):  Gt -= R Ht,  Hs += Gs R
inline FilterMatrices apply_lifting_step(const FilterMatrices& f, const SparseMatrix& op, LiftKind kind) {
    const auto nk = f.Ht.rows(), nm = f.Gt.rows();
    FilterMatrices out = f;
    if (kind == LiftKind::Primal) {
        if (op.rows() != nk || op.cols() != nm) throw StructuralError("primal lift must map M(j) to K(j)");
        out.Ht = f.Ht + op * f.Gt;
        out.Gs = f.Gs - f.Hs * op;
    } else {
        if (op.rows() != nm || op.cols() != nk) throw StructuralError("dual lift must map K(j) to M(j)");
        out.Gt = f.Gt - op * f.Ht;
        out.Hs = f.Hs + f.Gs * op;
    }
    return out;
}

/// Dense matrix whose column c is the synthesis of the c-th coefficient of a
/// flattened pyramid (approx first) over `levels` levels. With `normalized`,
/// columns are the unit-norm basis functions.
inline Eigen::MatrixXd synthesis_matrix(const LiftingTransform& t, int levels = 0, bool normalized = false) {
    const std::size_t n = t.hierarchy().domain().size();
    CoefficientPyramid p = t.forward(std::vector<double>(n, 0.0), levels, normalized);
    Eigen::MatrixXd s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> flat(n, 0.0);
    for (std::size_t c = 0; c < n; ++c) {
        flat[c] = 1.0;
        p.assign(flat);
        flat[c] = 0.0;
        const std::vector<double> v = t.inverse_values(p);
        for (std::size_t r = 0; r < n; ++r) s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r];
    }
    return s;
}

/// Dense analysis matrix: row c maps voxel values to the c-th flattened coefficient.
inline Eigen::MatrixXd analysis_matrix(const LiftingTransform& t, int levels = 0, bool normalized = false) {
    const std::size_t n = t.hierarchy().domain().size();
    Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t c = 0; c < n; ++c) {
        const std::vector<double> flat = t.forward(detail::unit(n, c), levels, normalized).flatten();
        for (std::size_t r = 0; r < n; ++r) a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r];
    }
    return a;
}

/// L^2(mu) Gram matrix of the synthesis columns: S^T diag(mu) S.
inline Eigen::MatrixXd gram_matrix(const Domain& d, const Eigen::MatrixXd& synthesis) {
    Eigen::VectorXd mu(static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) mu(static_cast<Eigen::Index>(i)) = d.measure(i);
    return synthesis.transpose() * mu.asDiagonal() * synthesis;
}

struct RieszBounds {
    double lower = 0.0;  // A
    double upper = 0.0;  // B
    double condition() const { return upper / lower; }
};

inline constexpr std::size_t kMaxRieszVoxels = 4096;

/// Extreme eigenvalues of the Gram matrix of the normalized basis: the optimal
/// A, B in A|c|^2 <= |sum c_k psi_k|^2 <= B|c|^2.
inline RieszBounds estimate_riesz_bounds(const LiftingTransform& t, int levels = 0) {
    const Domain& d = t.hierarchy().domain();
    if (d.size() > kMaxRieszVoxels)
        throw SizeError("Riesz bounds need the dense synthesis matrix; domain has " + std::to_string(d.size()) +
                        " voxels, limit " + std::to_string(kMaxRieszVoxels));
    const Eigen::MatrixXd g = gram_matrix(d, synthesis_matrix(t, levels, true));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g, Eigen::EigenvaluesOnly);
    return {eig.eigenvalues().minCoeff(), eig.eigenvalues().maxCoeff()};
}

}  // namespace wavelift
