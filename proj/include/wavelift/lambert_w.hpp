#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace wavelift {

/// Lower branch W_{-1} of the Lambert W function on [-1/e, 0).
///
/// Start: ln(-x) - ln(-ln(-x)) away from the branch point, the branch-point
/// series -1 + p - p^2/3 + 11 p^3/72 (p = -sqrt(2(1 + e x))) near it; then
/// Halley iterations. Arguments within a few ulps of -1/e return exactly -1.
inline double lambert_w_minus1(double x) {
    constexpr double e = std::numbers::e;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (!(x < 0.0)) throw std::domain_error("W_{-1} is defined on [-1/e, 0); got " + std::to_string(x));
    const double q = 1.0 + e * x;  // distance from the branch point, scaled
    if (q < -8.0 * eps) throw std::domain_error("W_{-1} argument below -1/e: " + std::to_string(x));
    if (q <= 8.0 * eps) return -1.0;

    const double p = -std::sqrt(2.0 * q);
    double w;
    if (p > -0.5) {
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
        if (p > -1e-4) return w;  // series error O(p^4) is below double precision
    } else {
        const double l1 = std::log(-x);
        w = l1 - std::log(-l1);
    }
    for (int it = 0; it < 64; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        const double wp1 = w + 1.0;
        const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        const double next = std::min(w - step, -1.0);
        if (std::abs(next - w) <= 4.0 * eps * std::abs(next)) return next;
        w = next;
    }
    return w;
}

struct WspmParams {
    double alpha = 0.05;
    double tau_w = 1.0;  // wavelet-domain threshold on |t|
    double tau_s = 1.0;  // spatial threshold, 1 / tau_w
};

/// Largest admissible significance level: sqrt(2 / (pi e)), where tau_w = 1.
inline double max_wspm_alpha() { return std::sqrt(2.0 / (std::numbers::pi * std::numbers::e)); }

/// tau_w = sqrt(-W_{-1}(-alpha^2 pi / 2)), tau_s = 1 / tau_w.
inline WspmParams compute_thresholds(double alpha) {
    if (!(alpha > 0.0)) throw std::domain_error("alpha must be positive");
    const double x = -alpha * alpha * std::numbers::pi / 2.0;
    double w;
    try {
        w = lambert_w_minus1(x);
    } catch (const std::domain_error&) {
        throw std::domain_error("alpha = " + std::to_string(alpha) + " too large; admissible alpha <= " +
                                std::to_string(max_wspm_alpha()));
    }
    WspmParams p;
    p.alpha = alpha;
    p.tau_w = std::sqrt(-w);
    p.tau_s = 1.0 / p.tau_w;
    return p;
}

/// Significance level whose threshold is tau_w: the inverse of compute_thresholds.
inline double alpha_for_threshold(double tau_w) {
    if (!(tau_w >= 1.0)) throw std::domain_error("tau_w must be at least 1");
    return std::sqrt(2.0 / std::numbers::pi) * tau_w * std::exp(-tau_w * tau_w / 2.0);
}

}  // namespace wavelift
