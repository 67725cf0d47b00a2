#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>

#include <wavelift/lambert_w.hpp>
#include <wavelift/wspm.hpp>

#include "test_support.hpp"

namespace wl = wavelift;
using wl::testing::random_values;

namespace {

// w e^w = x on w <= -1
double bisect_w(double x) {
    double lo = -800.0, hi = -1.0;
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        (mid * std::exp(mid) > x ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// sqrt(2/pi) tau exp(-tau^2 / 2) = alpha on tau >= 1
double bisect_tau(double alpha) {
    double lo = 1.0, hi = 60.0;
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f = std::sqrt(2.0 / std::numbers::pi) * mid * std::exp(-mid * mid / 2.0);
        (f > alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

wl::DomainPtr box(int n) { return std::make_shared<const wl::Domain>(wl::make_box_domain(n, n)); }

struct Series {
    wl::DomainPtr domain;
    std::vector<std::vector<double>> frames;
    wl::GlmModel model = wl::block_design_model(24, 4);
};

// task-locked signal plus unit Gaussian noise
Series make_series(wl::DomainPtr d, const std::vector<double>& signal, double noise, std::uint64_t seed) {
    Series s;
    s.domain = d;
    const auto& x = s.model.design().matrix();
    for (Eigen::Index n = 0; n < x.rows(); ++n) {
        auto f = random_values(d->size(), seed + static_cast<std::uint64_t>(n), noise);
        for (std::size_t v = 0; v < f.size(); ++v) f[v] += signal[v] * x(n, 2);
        s.frames.push_back(std::move(f));
    }
    return s;
}

template <wl::SpatialBasis B>
std::vector<double> brute_abs_synthesis(const B& b, const std::vector<double>& w) {
    std::vector<double> out(b.domain().size(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) {
        std::vector<double> e(w.size(), 0.0);
        e[k] = 1.0;
        const auto psi = b.synthesize(e, false);
        for (std::size_t v = 0; v < out.size(); ++v) out[v] += w[k] * std::abs(psi[v]);
    }
    return out;
}

}  // namespace

TEST(LambertW, BranchPointAndKnownValue) {
    EXPECT_DOUBLE_EQ(wl::lambert_w_minus1(-1.0 / std::numbers::e), -1.0);
    EXPECT_NEAR(wl::lambert_w_minus1(-2.0 * std::exp(-2.0)), -2.0, 1e-13);
    EXPECT_NEAR(wl::lambert_w_minus1(-5.0 * std::exp(-5.0)), -5.0, 1e-12);
    EXPECT_THROW(wl::lambert_w_minus1(0.0), std::domain_error);
    EXPECT_THROW(wl::lambert_w_minus1(-0.5), std::domain_error);
}

TEST(LambertW, MatchesBisectionAcrossRange) {
    for (double x : {-0.3678, -0.35, -0.2, -0.1, -1e-2, -1e-5, -1e-12, -1e-100}) {
        const double w = wl::lambert_w_minus1(x);
        EXPECT_NEAR(w, bisect_w(x), 1e-10 * std::abs(w)) << x;
        EXPECT_LE(std::abs(w * std::exp(w) - x), 1e-12 * std::abs(x)) << x;
        EXPECT_LE(w, -1.0);
    }
}

TEST(Thresholds, AlphaFivePercent) {
    const auto p = wl::compute_thresholds(0.05);
    EXPECT_NEAR(p.tau_w, bisect_tau(0.05), 1e-10);
    EXPECT_NEAR(p.tau_w, 2.750, 5e-3);
    EXPECT_NEAR(p.tau_s, 0.3636, 5e-4);
    EXPECT_DOUBLE_EQ(p.tau_s * p.tau_w, 1.0);
    for (double a : {1e-6, 1e-3, 0.01, 0.1, 0.4})
        EXPECT_NEAR(wl::alpha_for_threshold(wl::compute_thresholds(a).tau_w), a, 1e-12 * std::max(a, 1e-3));
}

TEST(Thresholds, AdmissibleRange) {
    EXPECT_NEAR(wl::max_wspm_alpha(), 0.48394144903828673, 1e-15);
    EXPECT_NEAR(wl::compute_thresholds(wl::max_wspm_alpha()).tau_w, 1.0, 1e-6);
    EXPECT_THROW(wl::compute_thresholds(0.9), std::domain_error);
    EXPECT_THROW(wl::compute_thresholds(0.0), std::domain_error);
    EXPECT_THROW(wl::alpha_for_threshold(0.5), std::domain_error);
}

TEST(Wspm, HugeWaveletThresholdDetectsNothing) {
    const auto d = box(8);
    const auto s = make_series(d, std::vector<double>(d->size(), 2.0), 1.0, 11);
    const wl::TensorHaar2D b(d, 2);
    const auto m = wl::wspm_detect_thresholds(b, s.frames, s.model, 1e9, 0.3);
    for (double r : m.numerator) EXPECT_EQ(r, 0.0);
    EXPECT_EQ(m.count(), 0u);
}

TEST(Wspm, NoiselessDataIsDegenerate) {
    const auto d = box(8);
    const auto s = make_series(d, std::vector<double>(d->size(), 1.0), 0.0, 1);
    const wl::TensorHaar2D b(d, 2);
    EXPECT_THROW(wl::wspm_detect(b, s.frames, s.model, wl::compute_thresholds(0.05)), wl::DegenerateVarianceError);
}

TEST(Wspm, TinyJitterRecoversSignal) {
    const auto d = box(8);
    std::vector<double> signal(d->size());
    for (std::size_t v = 0; v < signal.size(); ++v) signal[v] = d->voxel(v).x < 4 ? 1.0 : 0.0;
    const auto s = make_series(d, signal, 1e-6, 5);
    const wl::TensorHaar2D b(d, 2);
    const auto m = wl::wspm_detect(b, s.frames, s.model, wl::compute_thresholds(0.05));
    for (std::size_t v = 0; v < signal.size(); ++v) {
        EXPECT_NEAR(m.numerator[v], signal[v], 1e-5);
        if (signal[v] > 0.0) {
            EXPECT_TRUE(m.detected[v]);
        }
    }
}

TEST(Wspm, CoefficientStatsMatchInnerProducts) {
    const auto d = box(8);
    const wl::TensorHaar2D b(d, 3);
    std::vector<double> e(b.coefficient_count(), 0.0);
    e[9] = 3.0;
    const auto s = make_series(d, b.synthesize(e), 1.0, 21);
    const auto stats = wl::coefficient_stats(b, s.frames, s.model, 2.0);
    for (std::size_t k = 0; k < b.coefficient_count(); ++k) {
        std::vector<double> unit(b.coefficient_count(), 0.0);
        unit[k] = 1.0;
        const auto psi = b.synthesize(unit);
        std::vector<double> y;
        for (const auto& f : s.frames) y.push_back(wl::inner_product(*d, f, psi));
        const auto r = s.model.fit(y);
        EXPECT_NEAR(stats.t[k], r.t, 1e-9);
        EXPECT_NEAR(stats.sigma[k], std::sqrt(r.s2 / r.dof), 1e-12);
        EXPECT_EQ(stats.survived[k] != 0, std::abs(r.t) >= 2.0);
    }
    EXPECT_TRUE(stats.survived[9]);
    EXPECT_NEAR(stats.g[9], 3.0, 0.5);
}

TEST(Wspm, MapMatchesDirectReconstruction) {
    const auto d = wl::testing::random_blob(60, 2, 4, 16);
    const auto h = wl::build_hierarchy(d, 2, 17);
    const wl::AdaptedBasis b(h, wl::Stage::AverageInterpolating);
    std::vector<double> signal(d->size(), 0.0);
    for (std::size_t v = 0; v < 20; ++v) signal[v] = 1.5;
    const auto s = make_series(d, signal, 1.0, 31);
    const auto m = wl::wspm_detect_thresholds(b, s.frames, s.model, 1.5, 0.2);
    std::vector<double> kept(m.stats.size(), 0.0);
    for (std::size_t k = 0; k < kept.size(); ++k)
        if (std::abs(m.stats.t[k]) >= 1.5) kept[k] = m.stats.g[k];
    const auto num = b.synthesize(kept);
    const auto den = brute_abs_synthesis(b, m.stats.sigma);
    for (std::size_t v = 0; v < d->size(); ++v) {
        EXPECT_NEAR(m.numerator[v], num[v], 1e-10);
        EXPECT_NEAR(m.denominator[v], den[v], 1e-10);
        EXPECT_EQ(m.detected[v] != 0, den[v] > 0 && num[v] != 0.0 && std::abs(num[v] / den[v]) >= 0.2);
    }
}

TEST(Wspm, ScalingDataLeavesMapUnchanged) {
    const auto d = box(8);
    std::vector<double> signal(d->size(), 0.0);
    for (std::size_t v = 0; v < 16; ++v) signal[v] = 2.0;
    auto s = make_series(d, signal, 1.0, 41);
    const wl::TensorHaar2D b(d, 2);
    const auto params = wl::compute_thresholds(0.05);
    const auto a = wl::wspm_detect(b, s.frames, s.model, params);
    for (auto& f : s.frames)
        for (double& x : f) x *= -4.0;
    const auto c = wl::wspm_detect(b, s.frames, s.model, params);
    EXPECT_EQ(a.detected, c.detected);
    for (std::size_t v = 0; v < d->size(); ++v) EXPECT_NEAR(c.statistic[v], -a.statistic[v], 1e-12);
}

TEST(Wspm, ZeroSpatialThresholdKeepsSupport) {
    const auto d = box(8);
    const auto s = make_series(d, std::vector<double>(d->size(), 0.0), 1.0, 51);
    const wl::TensorHaar2D b(d, 2);
    const auto m = wl::wspm_detect_thresholds(b, s.frames, s.model, 1.0, 0.0);
    for (std::size_t v = 0; v < d->size(); ++v) EXPECT_EQ(m.detected[v] != 0, m.numerator[v] != 0.0);
}

TEST(Wspm, OneSidedIgnoresNegativeEffects) {
    const auto d = box(8);
    const auto s = make_series(d, std::vector<double>(d->size(), -3.0), 1.0, 61);
    const wl::TensorHaar2D b(d, 2);
    const auto params = wl::compute_thresholds(0.05);
    EXPECT_GT(wl::wspm_detect(b, s.frames, s.model, params).count(), 0u);
    EXPECT_EQ(wl::wspm_detect(b, s.frames, s.model, params, {wl::TestSides::One, 1}).count(), 0u);
}

TEST(Wspm, NullSurvivorFractionMatchesTailMass) {
    const auto d = box(16);
    const wl::TensorHaar2D b(d, 2);
    const double tau = 2.0;
    std::size_t survivors = 0, total = 0;
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
        const auto s = make_series(d, std::vector<double>(d->size(), 0.0), 1.0, 1000 * trial + 7);
        const auto stats = wl::coefficient_stats(b, s.frames, s.model, tau);
        survivors += stats.survivors();
        total += stats.size();
    }
    const double p = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(21), tau));
    const double band = 4.0 * std::sqrt(p * (1 - p) / static_cast<double>(total));
    EXPECT_NEAR(static_cast<double>(survivors) / static_cast<double>(total), p, band);
}

TEST(Wspm, ThreadedAndSerialAgree) {
    const auto d = wl::testing::random_blob(80, 2, 9, 16);
    const wl::AdaptedBasis b(wl::build_hierarchy(d, 3, 2), wl::Stage::AverageInterpolating);
    const auto s = make_series(d, std::vector<double>(d->size(), 0.5), 1.0, 71);
    const auto params = wl::compute_thresholds(0.05);
    const auto a = wl::wspm_detect(b, s.frames, s.model, params, {wl::TestSides::Two, 1});
    const auto c = wl::wspm_detect(b, s.frames, s.model, params, {wl::TestSides::Two, 4});
    EXPECT_EQ(a.statistic, c.statistic);
}

TEST(Wspm, SingleRealizationAveragingMatchesPlainDetection) {
    const auto d = wl::testing::random_blob(70, 2, 3, 16);
    const auto s = make_series(d, std::vector<double>(d->size(), 0.7), 1.0, 81);
    const auto params = wl::compute_thresholds(0.05);
    wl::RealizationConfig rc;
    rc.levels = 2;
    rc.base_seed = 99;
    const auto avg = wl::wspm_detect_averaged(d, s.frames, s.model, params, rc);
    const wl::AdaptedBasis b(wl::build_hierarchy(d, 2, 99, 3), wl::Stage::AverageInterpolating);
    const auto one = wl::wspm_detect(b, s.frames, s.model, params);
    EXPECT_EQ(avg.detected, one.detected);
    for (std::size_t v = 0; v < d->size(); ++v) EXPECT_NEAR(avg.statistic[v], one.statistic[v], 1e-14);
}

TEST(VoxelGlm, MatchesPerVoxelFit) {
    const auto d = box(4);
    const auto s = make_series(d, random_values(d->size(), 3, 1.0), 1.0, 91);
    const auto m = wl::voxel_glm_detect(*d, s.frames, s.model, 0.05);
    for (std::size_t v = 0; v < d->size(); ++v) {
        std::vector<double> y;
        for (const auto& f : s.frames) y.push_back(f[v]);
        const auto r = s.model.fit(y);
        EXPECT_DOUBLE_EQ(m.statistic[v], r.t);
        EXPECT_EQ(m.detected[v] != 0, wl::t_two_sided(r.t, r.dof) <= 0.05);
    }
}

TEST(Score, CountsAgainstTruth) {
    const std::vector<char> truth{1, 1, 1, 0, 0, 0, 0, 0};
    const std::vector<char> det{1, 0, 1, 1, 0, 0, 0, 0};
    double sens = 0, spec = 0;
    wl::score(det, truth, sens, spec);
    EXPECT_DOUBLE_EQ(sens, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(spec, 4.0 / 5.0);
}

TEST(Roc, SweepShapeAndVanishingAlpha) {
    wl::RocConfig cfg;
    cfg.phantom.grid = 24;
    cfg.phantom.annuli = {{3.0, 5.0}, {7.0, 9.0}};
    cfg.phantom.active = {1};
    cfg.phantom.kappa = 4.0;
    cfg.alphas = {1e-12, 0.1};
    cfg.trials = 2;
    const auto rows = wl::roc_sweep(cfg);
    ASSERT_EQ(rows.size(), 2u * 2u * 2u * 2u);
    double low = 0.0, high = 0.0;
    for (const auto& r : rows) {
        EXPECT_GE(r.sensitivity, 0.0);
        EXPECT_LE(r.specificity, 1.0);
        (r.alpha < 1e-6 ? low : high) += r.sensitivity;
    }
    EXPECT_LT(low, high);
    EXPECT_THROW(wl::make_phantom([] {
        wl::PhantomConfig p;
        p.active = {9};
        return p;
    }(), 1), std::out_of_range);
}
