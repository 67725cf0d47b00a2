#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "hierarchy.hpp"
#include "voxel_domain.hpp"

namespace wavelift {

/// How far the lifting cascade runs at each level.
///  Lazy: index split only. Predict: + sibling prediction P1.
///  Haar: + measure-weighted update U (unbalanced Haar).
///  AverageInterpolating: + affine average-interpolating prediction P2.
enum class Stage { Lazy, Predict, Haar, AverageInterpolating };

inline const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Lazy: return "lazy";
        case Stage::Predict: return "predict";
        case Stage::Haar: return "haar";
        case Stage::AverageInterpolating: return "ai";
    }
    return "?";
}

inline Stage parse_stage(const std::string& s) {
    if (s == "lazy") return Stage::Lazy;
    if (s == "predict") return Stage::Predict;
    if (s == "haar") return Stage::Haar;
    if (s == "ai") return Stage::AverageInterpolating;
    throw std::invalid_argument("unknown stage '" + s + "' (lazy|predict|haar|ai)");
}

struct TransformOptions {
    Stage stage = Stage::AverageInterpolating;
    bool normalize = false;
    int levels = 0;  // 0: every level of the hierarchy
    double fit_tolerance = 1e-10;  // relative eigenvalue cutoff of the P2 fits
};

/// lambda_{j0} plus gamma_{j0}, ..., gamma_{N-1} of one transform.
struct CoefficientPyramid {
    HierarchyPtr hierarchy;
    int top_level = 0;
    Stage stage = Stage::AverageInterpolating;
    bool normalized = false;
    std::vector<double> approx;                // over K(top_level)
    std::vector<std::vector<double>> details;  // details[j - top_level] over M(j)

    std::vector<double>& detail(int j) { return details.at(static_cast<std::size_t>(j - top_level)); }
    const std::vector<double>& detail(int j) const { return details.at(static_cast<std::size_t>(j - top_level)); }

    std::size_t size() const {
        std::size_t n = approx.size();
        for (const auto& d : details) n += d.size();
        return n;
    }

    /// approx first, then details level by level from the top level down to N-1.
    std::vector<double> flatten() const {
        std::vector<double> out(approx);
        for (const auto& d : details) out.insert(out.end(), d.begin(), d.end());
        return out;
    }

    void assign(std::span<const double> flat) {
        if (flat.size() != size()) throw StructuralError("coefficient count does not match pyramid layout");
        std::size_t pos = 0;
        for (double& v : approx) v = flat[pos++];
        for (auto& d : details)
            for (double& v : d) v = flat[pos++];
    }

    CoefficientPyramid zeros_like() const {
        CoefficientPyramid p(*this);
        std::fill(p.approx.begin(), p.approx.end(), 0.0);
        for (auto& d : p.details) std::fill(d.begin(), d.end(), 0.0);
        return p;
    }
};

enum class BasisKind { Scaling, Wavelet, DualScaling, DualWavelet };

/// Sparse function on the finest grid: (finest voxel id, value), ascending ids.
using SparseFunction = std::vector<std::pair<std::size_t, double>>;

/// Lifting transform on a fixed hierarchy and stage.
///
/// Per level j the analysis is
///   lambda0 = lambda_{j+1}|K(j),  gamma0 = lambda_{j+1}|M(j)
///   gamma1  = gamma0 - P1 lambda0
///   lambda2 = lambda0 + U gamma1
///   gamma3  = gamma1 - P2 lambda2
/// and synthesis runs the same steps backwards. Geometry-dependent data (the P2
/// weights) is computed at construction; basis functions and their norms are
/// computed on first use and cached. Safe to share between threads.
class LiftingTransform {
 public:
    /// Default relative eigenvalue cutoff for the affine fits behind P2.
    static constexpr double kFitRankTolerance = 1e-10;

    LiftingTransform(HierarchyPtr hierarchy, Stage stage, double fit_tolerance = kFitRankTolerance)
        : h_(std::move(hierarchy)), stage_(stage), fit_tolerance_(fit_tolerance), cache_(std::make_shared<BasisCache>()) {
        if (!h_) throw std::invalid_argument("transform needs a hierarchy");
        if (!(fit_tolerance_ >= 0.0 && fit_tolerance_ < 1.0)) throw std::invalid_argument("fit tolerance must lie in [0, 1)");
        const int n = h_->levels();
        p2_rows_.resize(static_cast<std::size_t>(n));
        p2_cols_.resize(static_cast<std::size_t>(n));
        full_rank_.resize(static_cast<std::size_t>(n));
        if (stage_ == Stage::AverageInterpolating)
            for (int j = 0; j < n; ++j) build_p2(j);
    }

    const GridHierarchy& hierarchy() const noexcept { return *h_; }
    const HierarchyPtr& hierarchy_ptr() const noexcept { return h_; }
    Stage stage() const noexcept { return stage_; }
    double fit_tolerance() const noexcept { return fit_tolerance_; }
    int levels() const noexcept { return h_->levels(); }

    // ---- single lifting operators at level j --------------------------------

    /// (lambda_{j+1}|K(j), lambda_{j+1}|M(j)).
    std::pair<std::vector<double>, std::vector<double>> lazy_split(int j, std::span<const double> fine) const {
        const LevelSplit& s = h_->split(j);
        check_size(fine.size(), h_->level(j + 1).size(), "lazy_split input");
        std::vector<double> a(s.kept.size()), d(s.details.size());
        for (std::size_t k = 0; k < a.size(); ++k) a[k] = fine[s.kept[k]];
        for (std::size_t m = 0; m < d.size(); ++m) d[m] = fine[s.details[m]];
        return {std::move(a), std::move(d)};
    }

    std::vector<double> lazy_merge(int j, std::span<const double> approx, std::span<const double> detail) const {
        const LevelSplit& s = h_->split(j);
        check_size(approx.size(), s.kept.size(), "lazy_merge approximation");
        check_size(detail.size(), s.details.size(), "lazy_merge detail");
        std::vector<double> fine(h_->level(j + 1).size());
        for (std::size_t k = 0; k < approx.size(); ++k) fine[s.kept[k]] = approx[k];
        for (std::size_t m = 0; m < detail.size(); ++m) fine[s.details[m]] = detail[m];
        return fine;
    }

    /// Sibling prediction: entry m is the value at its surviving sibling k_m.
    std::vector<double> predict_p1(int j, std::span<const double> approx) const {
        const LevelSplit& s = h_->split(j);
        check_size(approx.size(), s.kept.size(), "P1 input");
        std::vector<double> out(s.details.size());
        for (std::size_t m = 0; m < out.size(); ++m) out[m] = approx[s.detail_parent[m]];
        return out;
    }

    /// U gamma: measure-weighted share of the group's details, per survivor.
    std::vector<double> update_operator(int j, std::span<const double> detail) const {
        const LevelSplit& s = h_->split(j);
        check_size(detail.size(), s.details.size(), "U input");
        const GridLevel& fine = h_->level(j + 1);
        const GridLevel& coarse = h_->level(j);
        std::vector<double> out(s.kept.size(), 0.0);
        for (std::size_t m = 0; m < detail.size(); ++m) {
            const std::size_t k = s.detail_parent[m];
            out[k] += detail[m] * fine.measure[s.details[m]] / coarse.measure[k];
        }
        return out;
    }

    /// lambda2 = lambda1 + U gamma1; equals the measure-weighted mean over each group.
    std::vector<double> update_u(int j, std::span<const double> approx, std::span<const double> detail) const {
        std::vector<double> out = update_operator(j, detail);
        check_size(approx.size(), out.size(), "update input");
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += approx[k];
        return out;
    }

    /// Average-interpolating prediction of gamma2 from lambda2. Zero unless the stage is AI.
    std::vector<double> predict_p2(int j, std::span<const double> approx) const {
        const LevelSplit& s = h_->split(j);
        check_size(approx.size(), s.kept.size(), "P2 input");
        std::vector<double> out(s.details.size(), 0.0);
        if (stage_ != Stage::AverageInterpolating) return out;
        const auto& rows = p2_rows_[static_cast<std::size_t>(j)];
        for (std::size_t m = 0; m < out.size(); ++m)
            for (const auto& [n, w] : rows[m]) out[m] += w * approx[n];
        return out;
    }

    /// Weights (coarse index, weight) of the P2 prediction for detail position m.
    std::span<const std::pair<std::size_t, double>> p2_weights(int j, std::size_t m) const {
        if (stage_ != Stage::AverageInterpolating) return {};
        return p2_rows_.at(static_cast<std::size_t>(j)).at(m);
    }

    /// True when the affine fit around coarse member k at level j has full rank.
    bool full_rank_fit(int j, std::size_t k) const {
        if (stage_ != Stage::AverageInterpolating) return false;
        return full_rank_.at(static_cast<std::size_t>(j)).at(k) != 0;
    }

    // ---- one level -------------------------------------------------------------

    std::pair<std::vector<double>, std::vector<double>> analyze_level(int j, std::span<const double> fine) const {
        auto [a, d] = lazy_split(j, fine);
        if (stage_ == Stage::Lazy) return {std::move(a), std::move(d)};
        const std::vector<double> p1 = predict_p1(j, a);
        for (std::size_t m = 0; m < d.size(); ++m) d[m] -= p1[m];
        if (stage_ == Stage::Predict) return {std::move(a), std::move(d)};
        a = update_u(j, a, d);
        if (stage_ == Stage::AverageInterpolating) {
            const std::vector<double> p2 = predict_p2(j, a);
            for (std::size_t m = 0; m < d.size(); ++m) d[m] -= p2[m];
        }
        return {std::move(a), std::move(d)};
    }

    std::vector<double> synthesize_level(int j, std::span<const double> approx, std::span<const double> detail) const {
        std::vector<double> a(approx.begin(), approx.end());
        std::vector<double> d(detail.begin(), detail.end());
        if (stage_ == Stage::AverageInterpolating) {
            const std::vector<double> p2 = predict_p2(j, a);
            for (std::size_t m = 0; m < d.size(); ++m) d[m] += p2[m];
        }
        if (stage_ >= Stage::Haar) {
            const std::vector<double> u = update_operator(j, d);
            for (std::size_t k = 0; k < a.size(); ++k) a[k] -= u[k];
        }
        if (stage_ >= Stage::Predict) {
            const std::vector<double> p1 = predict_p1(j, a);
            for (std::size_t m = 0; m < d.size(); ++m) d[m] += p1[m];
        }
        return lazy_merge(j, a, d);
    }

    /// Transpose of analyze_level: maps (approx, detail) weights back onto K(j+1).
    std::vector<double> analyze_level_adjoint(int j, std::span<const double> approx,
                                              std::span<const double> detail) const {
        const LevelSplit& s = h_->split(j);
        check_size(approx.size(), s.kept.size(), "adjoint approximation");
        check_size(detail.size(), s.details.size(), "adjoint detail");
        std::vector<double> a(approx.begin(), approx.end());
        std::vector<double> b(detail.begin(), detail.end());
        if (stage_ == Stage::AverageInterpolating) {
            const auto& rows = p2_rows_[static_cast<std::size_t>(j)];
            for (std::size_t m = 0; m < b.size(); ++m)
                for (const auto& [n, w] : rows[m]) a[n] -= w * b[m];
        }
        if (stage_ >= Stage::Haar) {
            const GridLevel& fine = h_->level(j + 1);
            const GridLevel& coarse = h_->level(j);
            for (std::size_t m = 0; m < b.size(); ++m) {
                const std::size_t k = s.detail_parent[m];
                b[m] += a[k] * fine.measure[s.details[m]] / coarse.measure[k];
            }
        }
        if (stage_ >= Stage::Predict) {
            for (std::size_t m = 0; m < b.size(); ++m) a[s.detail_parent[m]] -= b[m];
        }
        return lazy_merge(j, a, b);
    }

    // ---- multilevel ----------------------------------------------------------------

    int top_level(int levels) const {
        const int n = h_->levels();
        const int l = levels == 0 ? n : levels;
        if (l < 1 || l > n)
            throw std::invalid_argument("transform levels must be in 1.." + std::to_string(n));
        return n - l;
    }

    /// `levels` = 0 runs every level of the hierarchy.
    CoefficientPyramid forward(std::span<const double> values, int levels = 0, bool normalize = false) const {
        check_size(values.size(), h_->domain().size(), "forward input");
        CoefficientPyramid p;
        p.hierarchy = h_;
        p.stage = stage_;
        p.top_level = top_level(levels);
        p.normalized = normalize;
        p.details.resize(static_cast<std::size_t>(h_->levels() - p.top_level));
        std::vector<double> lambda(values.begin(), values.end());
        for (int j = h_->levels() - 1; j >= p.top_level; --j) {
            auto [a, d] = analyze_level(j, lambda);
            p.detail(j) = std::move(d);
            lambda = std::move(a);
        }
        p.approx = std::move(lambda);
        if (normalize) scale(p, true);
        return p;
    }

    CoefficientPyramid forward(const Volume& v, int levels = 0, bool normalize = false) const {
        check_domain(v);
        return forward(std::span<const double>(v.values), levels, normalize);
    }

    std::vector<double> inverse_values(const CoefficientPyramid& pyramid) const {
        check_pyramid(pyramid);
        CoefficientPyramid p = pyramid;
        if (p.normalized) scale(p, false);
        std::vector<double> lambda = std::move(p.approx);
        for (int j = p.top_level; j < h_->levels(); ++j) lambda = synthesize_level(j, lambda, p.detail(j));
        return lambda;
    }

    Volume inverse(const CoefficientPyramid& pyramid) const {
        return Volume(h_->domain_ptr(), inverse_values(pyramid));
    }

    // ---- basis functions ----------------------------------------------------------

    /// phi_{j,k} on the finest grid (unnormalized), k local to level j.
    const SparseFunction& scaling_function(int j, std::size_t k) const {
        return basis().scaling.at(static_cast<std::size_t>(j)).at(k);
    }

    /// psi_{j,m} on the finest grid (unnormalized), m a detail position of M(j).
    const SparseFunction& wavelet(int j, std::size_t m) const {
        return basis().wavelets.at(static_cast<std::size_t>(j)).at(m);
    }

    double scaling_norm(int j, std::size_t k) const { return basis().scaling_norms.at(static_cast<std::size_t>(j)).at(k); }
    double wavelet_norm(int j, std::size_t m) const { return basis().wavelet_norms.at(static_cast<std::size_t>(j)).at(m); }

    /// Dense basis or dual basis function. `finest_index` names the member by its
    /// finest voxel: an element of K(j) for scaling kinds, of M(j) for wavelet kinds.
    Volume basis_function(int j, std::size_t finest_index, BasisKind kind, bool normalized = false) const {
        if (j < 0 || j > h_->levels()) throw std::invalid_argument("level out of range");
        const std::size_t nvox = h_->domain().size();
        std::vector<double> out(nvox, 0.0);
        const bool scaling = kind == BasisKind::Scaling || kind == BasisKind::DualScaling;
        std::size_t local = 0;
        double norm = 1.0;
        if (scaling) {
            local = h_->level(j).local_of(finest_index);
            if (local == h_->level(j).size())
                throw std::invalid_argument("voxel " + std::to_string(finest_index) + " is not in K(" +
                                            std::to_string(j) + ")");
            if (normalized) norm = scaling_norm(j, local);
        } else {
            if (j >= h_->levels()) throw std::invalid_argument("no wavelets at the finest level");
            const auto& det = h_->split(j).details;
            const std::size_t fine_local = h_->level(j + 1).local_of(finest_index);
            auto it = std::lower_bound(det.begin(), det.end(), fine_local);
            if (fine_local == h_->level(j + 1).size() || it == det.end() || *it != fine_local)
                throw std::invalid_argument("voxel " + std::to_string(finest_index) + " is not in M(" +
                                            std::to_string(j) + ")");
            local = static_cast<std::size_t>(it - det.begin());
            if (normalized) norm = wavelet_norm(j, local);
        }

        if (kind == BasisKind::Scaling || kind == BasisKind::Wavelet) {
            const SparseFunction& f = scaling ? scaling_function(j, local) : wavelet(j, local);
            for (const auto& [v, x] : f) out[v] = x / norm;
            return Volume(h_->domain_ptr(), std::move(out));
        }

        // Dual functions: row of the analysis operator, divided by the voxel measure.
        std::vector<double> w;
        int from = j;
        if (scaling) {
            w.assign(h_->level(j).size(), 0.0);
            w[local] = 1.0;
        } else {
            std::vector<double> a(h_->level(j).size(), 0.0), b(h_->split(j).details.size(), 0.0);
            b[local] = 1.0;
            w = analyze_level_adjoint(j, a, b);
            from = j + 1;
        }
        for (int jj = from; jj < h_->levels(); ++jj)
            w = analyze_level_adjoint(jj, w, std::vector<double>(h_->split(jj).details.size(), 0.0));
        for (std::size_t v = 0; v < nvox; ++v) out[v] = w[v] * norm / h_->domain().measure(v);
        return Volume(h_->domain_ptr(), std::move(out));
    }

    /// Applies (or removes) the unit-norm scaling of a pyramid in place.
    void scale(CoefficientPyramid& p, bool to_normalized) const {
        for (std::size_t k = 0; k < p.approx.size(); ++k) {
            const double n = scaling_norm(p.top_level, k);
            p.approx[k] = to_normalized ? p.approx[k] * n : p.approx[k] / n;
        }
        for (int j = p.top_level; j < h_->levels(); ++j) {
            auto& d = p.detail(j);
            for (std::size_t m = 0; m < d.size(); ++m) {
                const double n = wavelet_norm(j, m);
                d[m] = to_normalized ? d[m] * n : d[m] / n;
            }
        }
        p.normalized = to_normalized;
    }

 private:
    struct BasisData {
        std::vector<std::vector<SparseFunction>> scaling;   // [j][k]
        std::vector<std::vector<SparseFunction>> wavelets;  // [j][m], j < N
        std::vector<std::vector<double>> scaling_norms;
        std::vector<std::vector<double>> wavelet_norms;
    };
    struct BasisCache {
        std::once_flag once;
        BasisData data;
    };

    static void check_size(std::size_t got, std::size_t want, const char* what) {
        if (got != want)
            throw StructuralError(std::string(what) + ": expected " + std::to_string(want) + " entries, got " +
                                  std::to_string(got));
    }

    void check_domain(const Volume& v) const {
        if (!v.domain) throw StructuralError("volume has no domain");
        if (v.domain != h_->domain_ptr() && !(*v.domain == h_->domain()))
            throw StructuralError("volume domain does not match hierarchy domain");
    }

    void check_pyramid(const CoefficientPyramid& p) const {
        if (p.hierarchy != h_ && !(p.hierarchy && *p.hierarchy == *h_))
            throw StructuralError("pyramid was built on a different hierarchy");
        if (p.stage != stage_) throw StructuralError("pyramid stage does not match the transform");
        if (p.top_level < 0 || p.top_level >= h_->levels() + 1)
            throw StructuralError("pyramid top level out of range");
        check_size(p.approx.size(), h_->level(p.top_level).size(), "pyramid approximation");
        check_size(p.details.size(), static_cast<std::size_t>(h_->levels() - p.top_level), "pyramid level count");
        for (int j = p.top_level; j < h_->levels(); ++j)
            check_size(p.detail(j).size(), h_->split(j).details.size(), "pyramid detail");
    }

    // Least-squares affine fit over {k} u Nbr(j, k) using region centroids (the
    // region averages of x, y, z); prediction is the fitted average difference
    // between S_{j+1,m} and S_{j+1,k_m}. Coordinates are centered on C(S_{j,k})
    // and scaled by the fit's extent.
    void build_p2(int j) {
        const GridLevel& coarse = h_->level(j);
        const GridLevel& fine = h_->level(j + 1);
        const LevelSplit& s = h_->split(j);
        const int dim = h_->domain().dim();
        const int p = 1 + dim;
        auto& rows = p2_rows_[static_cast<std::size_t>(j)];
        auto& cols = p2_cols_[static_cast<std::size_t>(j)];
        auto& rank = full_rank_[static_cast<std::size_t>(j)];
        rows.assign(s.details.size(), {});
        cols.assign(coarse.size(), {});
        rank.assign(coarse.size(), 0);

        for (std::size_t k = 0; k < coarse.size(); ++k) {
            if (s.group_details[k].empty()) continue;
            std::vector<std::size_t> fit{k};
            fit.insert(fit.end(), coarse.neighbors[k].begin(), coarse.neighbors[k].end());
            if (fit.size() < 2) continue;  // constant fit, zero prediction

            const Point3& origin = coarse.centroid[k];
            double extent = 0.0;
            for (std::size_t n : fit)
                for (int a = 0; a < dim; ++a) extent = std::max(extent, std::abs(coarse.centroid[n][a] - origin[a]));
            if (extent == 0.0) extent = 1.0;

            Eigen::MatrixXd design(static_cast<Eigen::Index>(fit.size()), p);
            for (std::size_t r = 0; r < fit.size(); ++r) {
                design(static_cast<Eigen::Index>(r), 0) = 1.0;
                for (int a = 0; a < dim; ++a)
                    design(static_cast<Eigen::Index>(r), a + 1) = (coarse.centroid[fit[r]][a] - origin[a]) / extent;
            }
            const Eigen::MatrixXd normal = design.transpose() * design;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
            const Eigen::VectorXd& ev = eig.eigenvalues();
            const double cutoff = fit_tolerance_ * ev.maxCoeff();
            Eigen::VectorXd inv = Eigen::VectorXd::Zero(p);
            int kept = 0;
            for (int i = 0; i < p; ++i)
                if (ev(i) > cutoff) {
                    inv(i) = 1.0 / ev(i);
                    ++kept;
                }
            rank[k] = kept == p ? 1 : 0;
            // coefficients = pinv(normal) * design^T * values
            const Eigen::MatrixXd solve =
                eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * design.transpose();

            const Point3& base = fine.centroid[s.kept[k]];
            for (std::size_t m : s.group_details[k]) {
                const Point3& target = fine.centroid[s.details[m]];
                Eigen::RowVectorXd diff = Eigen::RowVectorXd::Zero(p);  // constant term cancels
                for (int a = 0; a < dim; ++a) diff(a + 1) = (target[a] - base[a]) / extent;
                const Eigen::RowVectorXd w = diff * solve;
                for (std::size_t r = 0; r < fit.size(); ++r) {
                    const double x = w(static_cast<Eigen::Index>(r));
                    if (x != 0.0) {
                        rows[m].emplace_back(fit[r], x);
                        cols[fit[r]].emplace_back(m, x);
                    }
                }
            }
        }
    }

    // Single-level synthesis of sparse coefficients; result over K(j+1) local indices.
    std::map<std::size_t, double> synthesize_level_sparse(int j, const std::map<std::size_t, double>& approx,
                                                          const std::map<std::size_t, double>& detail) const {
        const LevelSplit& s = h_->split(j);
        std::map<std::size_t, double> a = approx;
        std::map<std::size_t, double> d = detail;
        if (stage_ == Stage::AverageInterpolating) {
            const auto& cols = p2_cols_[static_cast<std::size_t>(j)];
            for (const auto& [n, v] : a)
                for (const auto& [m, w] : cols[n]) d[m] += w * v;
        }
        if (stage_ >= Stage::Haar) {
            const GridLevel& fine = h_->level(j + 1);
            const GridLevel& coarse = h_->level(j);
            for (const auto& [m, v] : d) {
                const std::size_t k = s.detail_parent[m];
                a[k] -= v * fine.measure[s.details[m]] / coarse.measure[k];
            }
        }
        if (stage_ >= Stage::Predict) {
            for (const auto& [k, v] : a)
                for (std::size_t m : s.group_details[k]) d[m] += v;
        }
        std::map<std::size_t, double> out;
        for (const auto& [k, v] : a) out[s.kept[k]] += v;
        for (const auto& [m, v] : d) out[s.details[m]] += v;
        return out;
    }

    const BasisData& basis() const {
        std::call_once(cache_->once, [this] { compute_basis(cache_->data); });
        return cache_->data;
    }

    // Refinement relations: phi_{j,k} = sum_l h_{j,k,l} phi_{j+1,l}, psi_{j,m} likewise with g.
    void compute_basis(BasisData& b) const {
        const int n = h_->levels();
        const Domain& dom = h_->domain();
        b.scaling.resize(static_cast<std::size_t>(n) + 1);
        b.wavelets.resize(static_cast<std::size_t>(n));
        b.scaling_norms.resize(static_cast<std::size_t>(n) + 1);
        b.wavelet_norms.resize(static_cast<std::size_t>(n));
        auto& finest = b.scaling[static_cast<std::size_t>(n)];
        finest.resize(dom.size());
        for (std::size_t v = 0; v < dom.size(); ++v) finest[v] = {{v, 1.0}};

        std::vector<double> scratch(dom.size(), 0.0);
        std::vector<char> seen(dom.size(), 0);
        std::vector<std::size_t> touched;
        auto refine = [&](const std::map<std::size_t, double>& coeffs, const std::vector<SparseFunction>& next) {
            touched.clear();
            for (const auto& [l, c] : coeffs) {
                if (c == 0.0) continue;
                for (const auto& [v, x] : next[l]) {
                    if (!seen[v]) {
                        seen[v] = 1;
                        touched.push_back(v);
                    }
                    scratch[v] += c * x;
                }
            }
            std::sort(touched.begin(), touched.end());
            SparseFunction f;
            f.reserve(touched.size());
            for (std::size_t v : touched) {
                if (scratch[v] != 0.0) f.emplace_back(v, scratch[v]);
                scratch[v] = 0.0;
                seen[v] = 0;
            }
            return f;
        };
        auto norm = [&](const SparseFunction& f) {
            double s = 0.0;
            for (const auto& [v, x] : f) s += x * x * dom.measure(v);
            return std::sqrt(s);
        };

        for (int j = n - 1; j >= 0; --j) {
            const auto& next = b.scaling[static_cast<std::size_t>(j) + 1];
            const std::size_t nk = h_->level(j).size();
            const std::size_t nm = h_->split(j).details.size();
            auto& sc = b.scaling[static_cast<std::size_t>(j)];
            auto& wv = b.wavelets[static_cast<std::size_t>(j)];
            sc.resize(nk);
            wv.resize(nm);
            for (std::size_t k = 0; k < nk; ++k) sc[k] = refine(synthesize_level_sparse(j, {{k, 1.0}}, {}), next);
            for (std::size_t m = 0; m < nm; ++m) wv[m] = refine(synthesize_level_sparse(j, {}, {{m, 1.0}}), next);
        }
        for (int j = 0; j <= n; ++j) {
            auto& sn = b.scaling_norms[static_cast<std::size_t>(j)];
            for (const auto& f : b.scaling[static_cast<std::size_t>(j)]) sn.push_back(norm(f));
        }
        for (int j = 0; j < n; ++j) {
            auto& wn = b.wavelet_norms[static_cast<std::size_t>(j)];
            for (const auto& f : b.wavelets[static_cast<std::size_t>(j)]) wn.push_back(norm(f));
        }
    }

    HierarchyPtr h_;
    Stage stage_;
    double fit_tolerance_ = kFitRankTolerance;
    std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> p2_rows_;  // [j][m] -> (k, w)
    std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> p2_cols_;  // [j][k] -> (m, w)
    std::vector<std::vector<char>> full_rank_;
    std::shared_ptr<BasisCache> cache_;
};

/// One-shot forward transform.
inline CoefficientPyramid forward(const Volume& v, HierarchyPtr h, const TransformOptions& opts = {}) {
    return LiftingTransform(std::move(h), opts.stage, opts.fit_tolerance).forward(v, opts.levels, opts.normalize);
}

/// One-shot inverse transform.
inline Volume inverse(const CoefficientPyramid& p) { return LiftingTransform(p.hierarchy, p.stage).inverse(p); }

/// Weighted coefficient sum sum_k lambda_k mu(S_{j,k}) at level j.
inline double weighted_sum(const GridHierarchy& h, int j, std::span<const double> lambda) {
    const GridLevel& g = h.level(j);
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s += lambda[k] * g.measure[k];
    return s;
}

}  // namespace wavelift
