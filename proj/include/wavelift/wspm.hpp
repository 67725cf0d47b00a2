#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "hierarchy.hpp"
#include "lambert_w.hpp"
#include "lifting.hpp"
#include "parallel.hpp"
#include "sparse_denoise.hpp"
#include "spatial_basis.hpp"
#include "stat_glm.hpp"
#include "voxel_domain.hpp"

namespace wavelift {

enum class TestSides { Two, One };

struct WspmOptions {
    TestSides sides = TestSides::Two;
    unsigned threads = 1;
};

/// Per-coefficient GLM results; sigma = sqrt(s2 / J) is the standard error of g.
struct CoefficientStats {
    std::vector<double> g, s2, t, sigma;
    std::vector<char> survived;
    int dof = 0;

    std::size_t size() const noexcept { return g.size(); }
    std::size_t survivors() const {
        std::size_t n = 0;
        for (char s : survived) n += s != 0;
        return n;
    }
};

struct ActivationMap {
    std::vector<char> detected;      // per voxel
    std::vector<double> statistic;   // numerator / denominator, 0 where the denominator vanishes
    std::vector<double> numerator;   // reconstruction from surviving coefficients
    std::vector<double> denominator; // sum_k sigma_k |psi_k|
    CoefficientStats stats;

    std::size_t count() const {
        std::size_t n = 0;
        for (char d : detected) n += d != 0;
        return n;
    }
};

namespace detail {

inline void check_frames(const Domain& d, const std::vector<std::vector<double>>& frames, const GlmModel& model) {
    if (static_cast<Eigen::Index>(frames.size()) != model.design().rows())
        throw StructuralError("series has " + std::to_string(frames.size()) + " frames, design has " +
                              std::to_string(model.design().rows()) + " rows");
    for (const auto& f : frames)
        if (f.size() != d.size()) throw StructuralError("frame does not match domain");
}

inline bool passes(double t, double tau, TestSides sides) { return sides == TestSides::Two ? std::abs(t) >= tau : t >= tau; }

}  // namespace detail

/// Coefficient time series: result[k][n] is coefficient k of frame n (unnormalized).
template <SpatialBasis B>
std::vector<std::vector<double>> coefficient_series(const B& basis, const std::vector<std::vector<double>>& frames,
                                                    unsigned threads = 1) {
    std::vector<std::vector<double>> per_frame(frames.size());
    parallel_for(frames.size(), threads, [&](std::size_t n) { per_frame[n] = basis.analyze(frames[n], false); });
    std::vector<std::vector<double>> out(basis.coefficient_count(), std::vector<double>(frames.size()));
    for (std::size_t n = 0; n < frames.size(); ++n)
        for (std::size_t k = 0; k < out.size(); ++k) out[k][n] = per_frame[n][k];
    return out;
}

/// GLM fit of every coefficient series. Series that are identically zero
/// (coefficients of basis functions outside the data) get g = s2 = t = 0.
template <SpatialBasis B>
CoefficientStats coefficient_stats(const B& basis, const std::vector<std::vector<double>>& frames, const GlmModel& model,
                                   double tau_w, const WspmOptions& opts = {}) {
    detail::check_frames(basis.domain(), frames, model);
    const auto series = coefficient_series(basis, frames, opts.threads);
    CoefficientStats s;
    const std::size_t k_count = series.size();
    s.g.assign(k_count, 0.0);
    s.s2.assign(k_count, 0.0);
    s.t.assign(k_count, 0.0);
    s.sigma.assign(k_count, 0.0);
    s.survived.assign(k_count, 0);
    s.dof = model.dof();
    parallel_for(k_count, opts.threads, [&](std::size_t k) {
        bool zero = true;
        for (double y : series[k]) zero = zero && y == 0.0;
        if (zero) return;
        const TestResult r = model.fit(series[k]);
        s.g[k] = r.g;
        s.s2[k] = r.s2;
        s.t[k] = r.t;
        s.sigma[k] = std::sqrt(r.s2 / r.dof);
        s.survived[k] = detail::passes(r.t, tau_w, opts.sides);
    });
    return s;
}

/// r = sum_k T(t_k) g_k psi_k.
template <SpatialBasis B>
std::vector<double> reconstruct_survivors(const B& basis, const CoefficientStats& s) {
    std::vector<double> c(s.size(), 0.0);
    for (std::size_t k = 0; k < c.size(); ++k)
        if (s.survived[k]) c[k] = s.g[k];
    return basis.synthesize(c, false);
}

/// Classical wavelet-domain analysis: inverse transform of the fitted
/// effects of the coefficients passing the t-test at tau_w.
template <SpatialBasis B>
std::vector<double> classical_analysis(const B& basis, const std::vector<std::vector<double>>& frames,
                                       const GlmModel& model, double tau_w, const WspmOptions& opts = {}) {
    return reconstruct_survivors(basis, coefficient_stats(basis, frames, model, tau_w, opts));
}

/// Two-threshold detection: voxel n is active when
/// |sum_k T(t_k) g_k psi_k(n)| / sum_k sigma_k |psi_k(n)| >= tau_s
/// (signed numerator for one-sided tests).
template <SpatialBasis B>
ActivationMap wspm_detect_thresholds(const B& basis, const std::vector<std::vector<double>>& frames,
                                     const GlmModel& model, double tau_w, double tau_s, const WspmOptions& opts = {}) {
    if (!(tau_s >= 0.0) || !(tau_w >= 0.0)) throw std::invalid_argument("thresholds must be non-negative");
    ActivationMap m;
    m.stats = coefficient_stats(basis, frames, model, tau_w, opts);
    m.numerator = reconstruct_survivors(basis, m.stats);
    m.denominator = basis.synthesize_abs(m.stats.sigma);
    const std::size_t n = m.numerator.size();
    m.statistic.assign(n, 0.0);
    m.detected.assign(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
        if (!(m.denominator[v] > 0.0)) continue;
        m.statistic[v] = m.numerator[v] / m.denominator[v];
        const double value = opts.sides == TestSides::Two ? std::abs(m.statistic[v]) : m.statistic[v];
        m.detected[v] = value >= tau_s && m.numerator[v] != 0.0;
    }
    return m;
}

template <SpatialBasis B>
ActivationMap wspm_detect(const B& basis, const std::vector<std::vector<double>>& frames, const GlmModel& model,
                          const WspmParams& params, const WspmOptions& opts = {}) {
    return wspm_detect_thresholds(basis, frames, model, params.tau_w, params.tau_s, opts);
}

struct RealizationConfig {
    int levels = 3;
    int max_merge = 3;
    Stage stage = Stage::AverageInterpolating;
    int realizations = 1;
    std::uint64_t base_seed = 1;
    double fit_tolerance = LiftingTransform::kFitRankTolerance;
};

/// Optional multi-realization mode: the detection statistic is averaged over
/// hierarchies with seeds base_seed + i before the spatial threshold.
inline ActivationMap wspm_detect_averaged(DomainPtr domain, const std::vector<std::vector<double>>& frames,
                                          const GlmModel& model, const WspmParams& params,
                                          const RealizationConfig& rc, const WspmOptions& opts = {}) {
    if (rc.realizations < 1) throw std::invalid_argument("need at least one realization");
    ActivationMap out;
    out.statistic.assign(domain->size(), 0.0);
    out.numerator.assign(domain->size(), 0.0);
    out.denominator.assign(domain->size(), 0.0);
    for (int r = 0; r < rc.realizations; ++r) {
        const AdaptedBasis b(build_hierarchy(domain, rc.levels, rc.base_seed + static_cast<std::uint64_t>(r), rc.max_merge),
                             rc.stage, 0, rc.fit_tolerance);
        ActivationMap m = wspm_detect(b, frames, model, params, opts);
        for (std::size_t v = 0; v < domain->size(); ++v) {
            out.statistic[v] += m.statistic[v] / rc.realizations;
            out.numerator[v] += m.numerator[v] / rc.realizations;
            out.denominator[v] += m.denominator[v] / rc.realizations;
        }
        if (r == 0) out.stats = std::move(m.stats);
    }
    out.detected.assign(domain->size(), 0);
    for (std::size_t v = 0; v < domain->size(); ++v) {
        const double value = opts.sides == TestSides::Two ? std::abs(out.statistic[v]) : out.statistic[v];
        out.detected[v] = out.statistic[v] != 0.0 && value >= params.tau_s;
    }
    return out;
}

/// Voxel-wise GLM: detected where the p-value is at most alpha.
inline ActivationMap voxel_glm_detect(const Domain& d, const std::vector<std::vector<double>>& frames,
                                      const GlmModel& model, double alpha, const WspmOptions& opts = {}) {
    detail::check_frames(d, frames, model);
    ActivationMap m;
    m.statistic.assign(d.size(), 0.0);
    m.detected.assign(d.size(), 0);
    parallel_for(d.size(), opts.threads, [&](std::size_t v) {
        std::vector<double> y(frames.size());
        for (std::size_t n = 0; n < frames.size(); ++n) y[n] = frames[n][v];
        const TestResult r = model.fit(y);
        m.statistic[v] = r.t;
        const double p = opts.sides == TestSides::Two ? t_two_sided(r.t, r.dof) : r.p;
        m.detected[v] = p <= alpha;
    });
    return m;
}

// ---- synthetic ring phantom and ROC protocol ---------------------------------------

/// Design [1, n, box(+-1)] with contrast (0, 0, 1).
inline GlmModel block_design_model(int time_points, int block) {
    if (time_points < 4 || block < 1) throw std::invalid_argument("bad block design");
    Eigen::MatrixXd x(time_points, 3);
    for (int n = 0; n < time_points; ++n) {
        x(n, 0) = 1.0;
        x(n, 1) = (n - (time_points - 1) / 2.0) / time_points;
        x(n, 2) = (n / block) % 2 == 1 ? 1.0 : -1.0;
    }
    return GlmModel(DesignMatrix(x, {"constant", "drift", "task"}), Eigen::Vector3d(0.0, 0.0, 1.0));
}

enum class BasisFamily { Adapted, TensorHaar };

inline std::string family_name(BasisFamily f) { return f == BasisFamily::Adapted ? "adapted" : "tensor_haar"; }

struct PhantomConfig {
    int grid = 64;
    std::vector<Annulus> annuli = thin_ring_annuli();
    std::vector<int> active = {1, 3, 5};  // indices into annuli carrying the activation
    double amplitude = 1.0;
    double kappa = 64.0;  // noise sigma = kappa / (x + 1) in column x
    int time_points = 40;
    int block = 5;
};

struct Phantom {
    DomainPtr domain;
    std::vector<char> truth;
    std::vector<std::vector<double>> frames;
};

/// Ring phantom whose active rings follow the task regressor, with Gaussian
/// noise decreasing across columns so that sigma * (x + 1) is constant.
inline Phantom make_phantom(const PhantomConfig& cfg, std::uint64_t seed) {
    Phantom p;
    p.domain = std::make_shared<const Domain>(make_ring_domain(cfg.annuli, cfg.grid));
    const Domain& d = *p.domain;
    std::vector<Annulus> active;
    for (int a : cfg.active) active.push_back(cfg.annuli.at(static_cast<std::size_t>(a)));
    p.truth.assign(d.size(), 0);
    for (std::size_t v = 0; v < d.size(); ++v) p.truth[v] = in_rings(active, cfg.grid, d.voxel(v).x, d.voxel(v).y);
    const GlmModel model = block_design_model(cfg.time_points, cfg.block);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    p.frames.assign(static_cast<std::size_t>(cfg.time_points), std::vector<double>(d.size()));
    for (int n = 0; n < cfg.time_points; ++n) {
        const double task = model.design().matrix()(n, 2);
        for (std::size_t v = 0; v < d.size(); ++v) {
            const double sigma = cfg.kappa / (d.voxel(v).x + 1.0);
            p.frames[static_cast<std::size_t>(n)][v] = (p.truth[v] ? cfg.amplitude * task : 0.0) + sigma * g(rng);
        }
    }
    return p;
}

struct RocConfig {
    PhantomConfig phantom;
    std::vector<double> alphas = {0.001, 0.01, 0.05, 0.1};
    std::vector<int> levels = {1, 3};
    std::vector<BasisFamily> families = {BasisFamily::Adapted, BasisFamily::TensorHaar};
    Stage stage = Stage::AverageInterpolating;
    int max_merge = 3;
    double fit_tolerance = LiftingTransform::kFitRankTolerance;
    int trials = 10;
    std::uint64_t seed = 1;
    WspmOptions wspm;
};

struct RocRow {
    int trial = 0;
    BasisFamily family = BasisFamily::Adapted;
    int level = 0;
    double alpha = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
};

inline void score(const std::vector<char>& detected, const std::vector<char>& truth, double& sens, double& spec) {
    std::size_t tp = 0, pos = 0, tn = 0, neg = 0;
    for (std::size_t v = 0; v < truth.size(); ++v) {
        if (truth[v]) {
            ++pos;
            tp += detected[v] != 0;
        } else {
            ++neg;
            tn += detected[v] == 0;
        }
    }
    sens = pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0;
    spec = neg ? static_cast<double>(tn) / static_cast<double>(neg) : 1.0;
}

/// WSPM operating points per trial, family, level and alpha. Trial i uses
/// phantom seed `seed + i` and hierarchy seed `seed + 1000003 + i`.
inline std::vector<RocRow> roc_sweep(const RocConfig& cfg) {
    const GlmModel model = block_design_model(cfg.phantom.time_points, cfg.phantom.block);
    std::vector<WspmParams> params;
    for (double a : cfg.alphas) params.push_back(compute_thresholds(a));
    std::vector<RocRow> rows;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        const Phantom p = make_phantom(cfg.phantom, cfg.seed + static_cast<std::uint64_t>(trial));
        for (BasisFamily fam : cfg.families)
            for (int level : cfg.levels) {
                auto evaluate = [&](const auto& basis) {
                    for (const WspmParams& wp : params) {
                        const ActivationMap m = wspm_detect(basis, p.frames, model, wp, cfg.wspm);
                        RocRow r{trial, fam, level, wp.alpha, 0.0, 0.0};
                        score(m.detected, p.truth, r.sensitivity, r.specificity);
                        rows.push_back(r);
                    }
                };
                if (fam == BasisFamily::Adapted) {
                    auto h = build_hierarchy(p.domain, level, cfg.seed + 1000003 + static_cast<std::uint64_t>(trial),
                                             cfg.max_merge);
                    evaluate(AdaptedBasis(h, cfg.stage, 0, cfg.fit_tolerance));
                } else {
                    evaluate(TensorHaar2D(p.domain, level));
                }
            }
    }
    return rows;
}

inline void write_roc_csv(std::ostream& out, const std::vector<RocRow>& rows) {
    out << "trial,family,level,alpha,sensitivity,specificity\n";
    out.precision(17);
    for (const auto& r : rows)
        out << r.trial << ',' << family_name(r.family) << ',' << r.level << ',' << r.alpha << ',' << r.sensitivity << ','
            << r.specificity << '\n';
}

}  // namespace wavelift
