#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hierarchy.hpp"
#include "lifting.hpp"
#include "parallel.hpp"
#include "spatial_basis.hpp"
#include "voxel_domain.hpp"

namespace wavelift {

/// Hard threshold: coefficients with |c| <= tau are zeroed.
struct ThresholdRule {
    double tau = 0.0;
    bool details_only = true;  // keep approximation coefficients untouched
};

struct ThresholdResult {
    CoefficientPyramid pyramid;
    std::vector<std::size_t> survivors;  // flat indices of thresholded coefficients with |c| > tau
};

namespace detail {

inline void check_rule(const ThresholdRule& r) {
    if (!(r.tau >= 0.0)) throw std::invalid_argument("threshold must be non-negative");
}

}  // namespace detail

/// Thresholds a flat coefficient vector; `is_approx(k)` marks approximation coefficients.
template <class IsApprox>
std::vector<std::size_t> threshold_coefficients(std::vector<double>& c, const ThresholdRule& rule, IsApprox&& is_approx) {
    detail::check_rule(rule);
    std::vector<std::size_t> survivors;
    for (std::size_t k = 0; k < c.size(); ++k) {
        if (rule.details_only && is_approx(k)) continue;
        if (std::abs(c[k]) > rule.tau)
            survivors.push_back(k);
        else
            c[k] = 0.0;
    }
    return survivors;
}

inline ThresholdResult threshold_pyramid(const CoefficientPyramid& p, const ThresholdRule& rule) {
    std::vector<double> flat = p.flatten();
    const std::size_t approx = p.approx.size();
    ThresholdResult r;
    r.survivors = threshold_coefficients(flat, rule, [approx](std::size_t k) { return k < approx; });
    r.pyramid = p;
    r.pyramid.assign(flat);
    return r;
}

/// 10 log10(|f|^2 / |f - g|^2) in L^2(mu); +infinity for exact recovery.
inline double snr_db(const Domain& d, std::span<const double> clean, std::span<const double> estimate) {
    std::vector<double> diff(clean.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = clean[i] - estimate[i];
    const double err = inner_product(d, diff, diff);
    if (err == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(inner_product(d, clean, clean) / err);
}

/// Gaussian noise of standard deviation sigma per voxel.
inline std::vector<double> gaussian_noise(std::size_t n, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = sigma * g(rng);
    return v;
}

/// Projection of `values` onto the span of the coefficients selected by `keep`.
template <SpatialBasis B>
std::vector<double> reconstruct_subset(const B& basis, std::span<const double> values, const std::vector<char>& keep) {
    std::vector<double> c = basis.analyze(values, true);
    for (std::size_t k = 0; k < c.size(); ++k)
        if (!keep[k]) c[k] = 0.0;
    return basis.synthesize(c, true);
}

struct NoiseTransfer {
    double mean_norm = 0.0;     // E|n_rec|
    double mean_sq_norm = 0.0;  // E|n_rec|^2
};

/// Monte Carlo E|n_rec| for unit white noise reconstructed from the coefficients in `keep`.
template <SpatialBasis B>
NoiseTransfer noise_transfer(const B& basis, const std::vector<char>& keep, int realizations, std::uint64_t seed) {
    if (realizations < 1) throw std::invalid_argument("need at least one noise realization");
    if (keep.size() != basis.coefficient_count()) throw StructuralError("survivor mask does not match basis");
    NoiseTransfer out;
    const Domain& d = basis.domain();
    for (int r = 0; r < realizations; ++r) {
        const auto noise = gaussian_noise(d.size(), 1.0, seed + static_cast<std::uint64_t>(r));
        const auto rec = reconstruct_subset(basis, noise, keep);
        const double sq = inner_product(d, rec, rec);
        out.mean_norm += std::sqrt(sq);
        out.mean_sq_norm += sq;
    }
    out.mean_norm /= realizations;
    out.mean_sq_norm /= realizations;
    return out;
}

struct CurvePoint {
    double tau = 0.0;
    double error = 0.0;        // |f - f_approx| / |f|
    std::size_t survivors = 0;  // detail coefficients above tau
    double noise_norm = 0.0;    // E|n_rec| for the same survivors (0 when not computed)
};

struct CurveOptions {
    int noise_realizations = 0;  // 0: skip the noise transfer
    std::uint64_t noise_seed = 1;
};

/// Relative approximation error and survivor count per threshold (descending grid),
/// thresholding normalized detail coefficients and keeping the approximation.
template <SpatialBasis B>
std::vector<CurvePoint> approximation_curve(const B& basis, std::span<const double> f, std::span<const double> taus,
                                            const CurveOptions& opts = {}) {
    const Domain& d = basis.domain();
    const double fnorm = l2_norm(d, f);
    if (fnorm == 0.0) throw std::invalid_argument("approximation curve needs a non-zero signal");
    for (std::size_t i = 1; i < taus.size(); ++i)
        if (taus[i] > taus[i - 1]) throw std::invalid_argument("threshold grid must be sorted descending");
    const std::vector<double> coeffs = basis.analyze(f, true);
    std::vector<CurvePoint> curve;
    for (double tau : taus) {
        std::vector<double> c = coeffs;
        const auto surv =
            threshold_coefficients(c, {tau, true}, [&](std::size_t k) { return basis.is_approximation(k); });
        const auto approx = basis.synthesize(c, true);
        std::vector<double> diff(f.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = f[i] - approx[i];
        CurvePoint p;
        p.tau = tau;
        p.error = l2_norm(d, diff) / fnorm;
        p.survivors = surv.size();
        if (opts.noise_realizations > 0) {
            std::vector<char> keep(coeffs.size(), 0);
            for (std::size_t k = 0; k < keep.size(); ++k) keep[k] = basis.is_approximation(k);
            for (std::size_t k : surv) keep[k] = 1;
            p.noise_norm = noise_transfer(basis, keep, opts.noise_realizations, opts.noise_seed).mean_norm;
        }
        curve.push_back(p);
    }
    return curve;
}

/// Descending thresholds placed at `count` quantiles of the normalized detail magnitudes.
template <SpatialBasis B>
std::vector<double> quantile_thresholds(const B& basis, std::span<const double> f, int count) {
    const auto c = basis.analyze(f, true);
    std::vector<double> mags;
    for (std::size_t k = 0; k < c.size(); ++k)
        if (!basis.is_approximation(k)) mags.push_back(std::abs(c[k]));
    if (mags.empty() || count < 1) return {};
    std::sort(mags.begin(), mags.end(), std::greater<>());
    std::vector<double> taus{mags.front()};
    for (int i = 0; i < count; ++i) {
        const double q = std::pow(static_cast<double>(i + 1) / count, 2.0);
        const auto idx = std::min(mags.size() - 1, static_cast<std::size_t>(q * static_cast<double>(mags.size() - 1)));
        taus.push_back(mags[idx]);
    }
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    return taus;
}

/// Approximation error at E|n_rec| = target, linearly interpolated along the
/// curve ordered by noise norm; nullopt when the target is out of range.
inline std::optional<double> error_at_noise(std::vector<CurvePoint> curve, double target) {
    std::sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.noise_norm < b.noise_norm; });
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto& a = curve[i - 1];
        const auto& b = curve[i];
        if (a.noise_norm <= target && target <= b.noise_norm) {
            if (b.noise_norm == a.noise_norm) return std::min(a.error, b.error);
            const double s = (target - a.noise_norm) / (b.noise_norm - a.noise_norm);
            return a.error + s * (b.error - a.error);
        }
    }
    return std::nullopt;
}

// ---- smooth test signals -------------------------------------------------------

struct SmoothSignalConfig {
    int bumps_per_component = 3;
    double width = 6.0;      // Gaussian standard deviation, physical units
    double amplitude = 1.0;  // bump weights uniform in [-amplitude, amplitude]
};

/// Independent random mixture of isotropic Gaussian bumps on each connected component.
inline std::vector<double> smooth_signal(const Domain& d, std::uint64_t seed, const SmoothSignalConfig& cfg = {}) {
    if (cfg.bumps_per_component < 1 || !(cfg.width > 0.0)) throw std::invalid_argument("bad smooth signal config");
    const auto [labels, count] = connected_components(d);
    std::vector<std::vector<std::size_t>> members(count);
    for (std::size_t i = 0; i < d.size(); ++i) members[labels[i]].push_back(i);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> weight(-cfg.amplitude, cfg.amplitude);
    std::vector<double> out(d.size(), 0.0);
    for (const auto& comp : members) {
        std::uniform_int_distribution<std::size_t> pick(0, comp.size() - 1);
        for (int b = 0; b < cfg.bumps_per_component; ++b) {
            const Point3 c = d.position(comp[pick(rng)]);
            const double w = weight(rng);
            for (std::size_t i : comp) {
                const Point3 p = d.position(i);
                const double r2 = (p[0] - c[0]) * (p[0] - c[0]) + (p[1] - c[1]) * (p[1] - c[1]) + (p[2] - c[2]) * (p[2] - c[2]);
                out[i] += w * std::exp(-r2 / (2.0 * cfg.width * cfg.width));
            }
        }
    }
    return out;
}

/// Six thin concentric annuli used as the ring phantom on a 64 x 64 grid.
inline std::vector<Annulus> thin_ring_annuli() {
    return {{6.0, 8.0}, {10.0, 12.0}, {14.0, 16.0}, {18.0, 20.0}, {22.0, 24.0}, {26.0, 28.0}};
}

// ---- multi-realization denoising ---------------------------------------------------

struct DenoiseConfig {
    int levels = 4;
    int max_merge = 3;
    Stage stage = Stage::AverageInterpolating;
    double tau = 0.0;  // hard threshold on normalized detail coefficients
    double fit_tolerance = LiftingTransform::kFitRankTolerance;
    unsigned threads = 1;
};

struct DenoiseResult {
    std::vector<double> estimate;  // average over all realizations
    std::vector<double> snr;       // snr[r]: SNR of the average of the first r + 1 realizations (empty without reference)
    std::vector<double> single_snr;  // SNR of each realization alone (empty without reference)
};

/// Denoises with one hierarchy per seed base_seed + i, i < R, and averages
/// the outputs cumulatively in seed order.
inline DenoiseResult denoise_averaged(DomainPtr domain, std::span<const double> noisy, int realizations,
                                      std::uint64_t base_seed, const DenoiseConfig& cfg,
                                      std::optional<std::span<const double>> clean = std::nullopt) {
    if (!domain) throw std::invalid_argument("denoising needs a domain");
    if (realizations < 1) throw std::invalid_argument("need at least one realization");
    if (noisy.size() != domain->size()) throw StructuralError("noisy volume does not match domain");
    const std::size_t n = domain->size();
    std::vector<std::vector<double>> outputs(static_cast<std::size_t>(realizations));
    parallel_for(outputs.size(), cfg.threads, [&](std::size_t i) {
        auto h = build_hierarchy(domain, cfg.levels, base_seed + i, cfg.max_merge);
        const LiftingTransform t(h, cfg.stage, cfg.fit_tolerance);
        auto p = t.forward(noisy, 0, true);
        for (auto& det : p.details)
            for (double& x : det)
                if (std::abs(x) <= cfg.tau) x = 0.0;
        outputs[i] = t.inverse_values(p);
    });
    DenoiseResult r;
    r.estimate.assign(n, 0.0);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        for (std::size_t v = 0; v < n; ++v) r.estimate[v] += outputs[i][v];
        if (clean) {
            std::vector<double> avg(r.estimate);
            for (double& x : avg) x /= static_cast<double>(i + 1);
            r.snr.push_back(snr_db(*domain, *clean, avg));
            r.single_snr.push_back(snr_db(*domain, *clean, outputs[i]));
        }
    }
    for (double& x : r.estimate) x /= static_cast<double>(realizations);
    return r;
}

/// Noise level giving the requested input SNR (dB) for a signal on a domain with unit weights.
inline double sigma_for_snr(const Domain& d, std::span<const double> clean, double snr) {
    return std::sqrt(inner_product(d, clean, clean) / d.total_measure() / std::pow(10.0, snr / 10.0));
}

// ---- rotation / shift invariance ---------------------------------------------------

/// Nearest-neighbour resampling of an n x n image (x fastest) rotated by
/// `angle_deg` (a multiple of 45) about the grid center and shifted by (dx, dy).
/// Pixels mapping outside the grid become 0.
inline std::vector<double> resample_square(std::span<const double> image, int n, int angle_deg, int dx = 0, int dy = 0) {
    if (angle_deg % 45 != 0) throw std::invalid_argument("rotation must be a multiple of 45 degrees");
    if (image.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw StructuralError("image is not n x n");
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double ca = std::cos(a), sa = std::sin(a), c = (n - 1) / 2.0;
    std::vector<double> out(image.size(), 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double ux = x - dx - c, uy = y - dy - c;
            // inverse rotation of the output position
            const long sx = std::lround(ca * ux + sa * uy + c);
            const long sy = std::lround(-sa * ux + ca * uy + c);
            if (sx < 0 || sy < 0 || sx >= n || sy >= n) continue;
            out[static_cast<std::size_t>(y * n + x)] = image[static_cast<std::size_t>(sy * n + sx)];
        }
    return out;
}

struct InvarianceConfig {
    int levels = 5;
    int max_merge = 3;
    Stage stage = Stage::AverageInterpolating;
    int angle_deg = 45;
    int dx = 0, dy = 0;
    int realizations = 100;
    std::uint64_t base_seed = 1;
    double fit_tolerance = LiftingTransform::kFitRankTolerance;
    unsigned threads = 1;
};

struct InvarianceResult {
    std::vector<std::string> subspaces;  // "V0", "W0", ...
    std::vector<double> single;          // discrepancy with one realization
    std::vector<double> averaged;        // discrepancy with projections averaged over all realizations
    std::vector<std::vector<double>> projections;  // averaged projection of the image per subspace
};

/// Per-subspace |P(rot f) - rot(P f)| / |f| on the full n x n square, where P is
/// the projection onto one subspace (V0 or one W_j), for the first realization
/// and for the average over `realizations` hierarchies.
inline InvarianceResult invariance_experiment(std::span<const double> image, int n, const InvarianceConfig& cfg) {
    if (cfg.realizations < 1) throw std::invalid_argument("need at least one realization");
    auto domain = std::make_shared<const Domain>(make_box_domain(n, n));
    const std::vector<double> f(image.begin(), image.end());
    const std::vector<double> rf = resample_square(f, n, cfg.angle_deg, cfg.dx, cfg.dy);
    const double fnorm = l2_norm(*domain, f);
    if (fnorm == 0.0) throw std::invalid_argument("invariance experiment needs a non-zero image");
    const int subspaces = cfg.levels + 1;
    const std::size_t r_count = static_cast<std::size_t>(cfg.realizations);

    // proj[r][s][0]: P_s f, proj[r][s][1]: P_s rot f
    std::vector<std::vector<std::array<std::vector<double>, 2>>> proj(r_count);
    parallel_for(r_count, cfg.threads, [&](std::size_t r) {
        auto h = build_hierarchy(domain, cfg.levels, cfg.base_seed + r, cfg.max_merge);
        const AdaptedBasis b(h, cfg.stage, 0, cfg.fit_tolerance);
        const auto cf = b.analyze(f), crf = b.analyze(rf);
        proj[r].resize(static_cast<std::size_t>(subspaces));
        for (int s = 0; s < subspaces; ++s) {
            std::vector<double> a(cf.size(), 0.0), ar(crf.size(), 0.0);
            for (std::size_t k = 0; k < cf.size(); ++k)
                if (b.subspace(k) == s - 1) {
                    a[k] = cf[k];
                    ar[k] = crf[k];
                }
            proj[r][static_cast<std::size_t>(s)] = {b.synthesize(a), b.synthesize(ar)};
        }
    });

    auto discrepancy = [&](const std::vector<double>& pf, const std::vector<double>& prf) {
        const auto rot_pf = resample_square(pf, n, cfg.angle_deg, cfg.dx, cfg.dy);
        std::vector<double> diff(prf.size());
        for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = prf[i] - rot_pf[i];
        return l2_norm(*domain, diff) / fnorm;
    };

    InvarianceResult out;
    for (int s = 0; s < subspaces; ++s) {
        out.subspaces.push_back(s == 0 ? "V0" : "W" + std::to_string(s - 1));
        const auto si = static_cast<std::size_t>(s);
        out.single.push_back(discrepancy(proj[0][si][0], proj[0][si][1]));
        std::vector<double> pf(f.size(), 0.0), prf(f.size(), 0.0);
        for (std::size_t r = 0; r < r_count; ++r)
            for (std::size_t i = 0; i < f.size(); ++i) {
                pf[i] += proj[r][si][0][i];
                prf[i] += proj[r][si][1][i];
            }
        for (std::size_t i = 0; i < f.size(); ++i) {
            pf[i] /= static_cast<double>(r_count);
            prf[i] /= static_cast<double>(r_count);
        }
        out.averaged.push_back(discrepancy(pf, prf));
        out.projections.push_back(std::move(pf));
    }
    return out;
}

/// Smooth test image on an n x n grid supported inside the inscribed disc.
inline std::vector<double> disc_test_image(int n, std::uint64_t seed, int bumps = 6) {
    std::mt19937_64 rng(seed);
    const double c = (n - 1) / 2.0, radius = 0.45 * n;
    std::uniform_real_distribution<double> pos(c - 0.6 * radius, c + 0.6 * radius), amp(0.5, 1.5), width(0.05 * n, 0.12 * n);
    std::vector<std::array<double, 4>> b;
    for (int i = 0; i < bumps; ++i) b.push_back({pos(rng), pos(rng), amp(rng), width(rng)});
    std::vector<double> img(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double r = std::hypot(x - c, y - c);
            if (r >= radius) continue;
            const double taper = 0.5 * (1.0 + std::cos(std::numbers::pi * r / radius));
            double v = 0.0;
            for (const auto& g : b) {
                const double d2 = (x - g[0]) * (x - g[0]) + (y - g[1]) * (y - g[1]);
                v += g[2] * std::exp(-d2 / (2.0 * g[3] * g[3]));
            }
            img[static_cast<std::size_t>(y * n + x)] = taper * v;
        }
    return img;
}

}  // namespace wavelift
