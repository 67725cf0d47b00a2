#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include <wavelift/errors.hpp>
#include <wavelift/stat_glm.hpp>
#include <wavelift/wspm.hpp>

namespace wl = wavelift;

namespace {

Eigen::MatrixXd example_design(int n) {
    Eigen::MatrixXd x(n, 3);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = i;
        x(i, 2) = (i / 4) % 2 == 0 ? 1.0 : -1.0;
    }
    return x;
}

}  // namespace

TEST(OneSampleT, HandComputedExample) {
    const std::vector<double> s{1.0, 2.0, 3.0};
    const auto r = wl::one_sample_t(s);
    EXPECT_DOUBLE_EQ(r.g, 2.0);
    EXPECT_DOUBLE_EQ(r.s2, 1.0);
    EXPECT_NEAR(r.t, 3.4641016151377544, 1e-12);
    EXPECT_EQ(r.dof, 2);
}

TEST(OneSampleT, SymmetricSamplesGiveZero) {
    const std::vector<double> s{0.0, 0.0, -1.0, 1.0, 0.0};
    const auto r = wl::one_sample_t(s);
    EXPECT_DOUBLE_EQ(r.t, 0.0);
    EXPECT_NEAR(r.p, 0.5, 1e-12);
}

TEST(OneSampleT, ConstantSamplesAreDegenerate) {
    const std::vector<double> s{5.0, 5.0, 5.0};
    EXPECT_THROW(wl::one_sample_t(s), wl::DegenerateVarianceError);
    const std::vector<double> one{1.0};
    EXPECT_THROW(wl::one_sample_t(one), wl::InsufficientDofError);
}

TEST(StudentT, TailMatchesClosedForms) {
    for (double t : {-3.0, -0.5, 0.0, 0.7, 2.0, 10.0}) {
        EXPECT_NEAR(wl::t_upper_tail(t, 1), 0.5 - std::atan(t) / std::numbers::pi, 1e-12);
        EXPECT_NEAR(wl::t_upper_tail(t, 2), 0.5 * (1.0 - t / std::sqrt(t * t + 2.0)), 1e-12);
    }
    EXPECT_NEAR(wl::t_two_sided(-2.0, 2), 2.0 * wl::t_upper_tail(2.0, 2), 1e-15);
    EXPECT_NEAR(wl::t_upper_tail(wl::t_quantile_upper(0.01, 7), 7), 0.01, 1e-12);
    EXPECT_THROW(wl::t_upper_tail(1.0, 0), std::invalid_argument);
}

TEST(Glm, ExampleDesignRecoversThirdColumn) {
    const wl::DesignMatrix x(example_design(16));
    const Eigen::VectorXd col = x.matrix().col(2);
    const std::vector<double> y(col.data(), col.data() + col.size());
    const wl::GlmModel m(x, Eigen::Vector3d(0, 0, 1));
    const Eigen::VectorXd beta = m.beta(y);
    EXPECT_NEAR(beta(0), 0.0, 1e-12);
    EXPECT_NEAR(beta(1), 0.0, 1e-12);
    EXPECT_NEAR(beta(2), 1.0, 1e-12);
    EXPECT_THROW(m.fit(y), wl::DegenerateVarianceError);
}

TEST(Glm, NoisyExampleMatchesNormalEquations) {
    const Eigen::MatrixXd xm = example_design(20);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::VectorXd y(20);
    for (int i = 0; i < 20; ++i) y(i) = 0.3 + 0.05 * i + 0.8 * xm(i, 2) + g(rng);
    const Eigen::Vector3d c(0, 0, 1);
    const auto r = wl::glm_fit(std::vector<double>(y.data(), y.data() + 20), wl::DesignMatrix(xm), c);
    // independent solve via QR
    const Eigen::VectorXd beta = xm.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd e = y - xm * beta;
    const double var = c.dot((xm.transpose() * xm).inverse() * c);
    EXPECT_NEAR(r.g, beta(2), 1e-10);
    EXPECT_NEAR(r.s2, e.squaredNorm() * var, 1e-10);
    EXPECT_EQ(r.dof, 17);
    EXPECT_NEAR(r.t, beta(2) / std::sqrt(e.squaredNorm() * var / 17.0), 1e-9);
}

TEST(Glm, InterceptOnlyReproducesOneSampleT) {
    const std::vector<double> s{0.3, -1.2, 2.5, 0.9, 1.1, -0.4};
    const wl::DesignMatrix x(Eigen::MatrixXd::Ones(6, 1));
    const auto r = wl::glm_fit(s, x, Eigen::VectorXd::Ones(1));
    const auto o = wl::one_sample_t(s);
    EXPECT_NEAR(r.t, o.t, 1e-12);
    EXPECT_EQ(r.dof, o.dof);
    EXPECT_NEAR(r.g, o.g, 1e-14);
}

TEST(Glm, ScalingDataLeavesTUnchanged) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    std::vector<double> y(24), z(24);
    for (double& v : y) v = g(rng);
    const wl::GlmModel m(wl::DesignMatrix(example_design(24)), Eigen::Vector3d(0, 0, 1));
    const auto a = m.fit(y);
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = 7.5 * y[i];
    const auto b = m.fit(z);
    EXPECT_NEAR(b.g, 7.5 * a.g, 1e-12);
    EXPECT_NEAR(std::sqrt(b.s2), 7.5 * std::sqrt(a.s2), 1e-12);
    EXPECT_NEAR(b.t, a.t, 1e-12);
}

TEST(Glm, RankDeficientDesignUsesPseudoInverse) {
    Eigen::MatrixXd x(10, 3);
    for (int i = 0; i < 10; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = i;
        x(i, 2) = 2.0 * i;
    }
    const wl::DesignMatrix d(x);
    EXPECT_EQ(d.rank(), 2);
    EXPECT_TRUE(d.rank_deficient());
    std::vector<double> y{0.1, 1.2, 1.9, 3.3, 3.8, 5.1, 6.2, 6.8, 8.1, 9.0};
    const wl::GlmModel m(d, Eigen::Vector3d(1, 0, 0));
    EXPECT_EQ(m.dof(), 8);
    const auto r = m.fit(y);
    EXPECT_TRUE(std::isfinite(r.t));
}

TEST(Glm, ArgumentErrors) {
    EXPECT_THROW(wl::GlmModel(wl::DesignMatrix(Eigen::Matrix3d::Identity()), Eigen::Vector3d(0, 0, 1)), wl::InsufficientDofError);
    EXPECT_THROW(wl::GlmModel(wl::DesignMatrix(example_design(8)), Eigen::Vector2d(0, 1)), std::invalid_argument);
    EXPECT_THROW(wl::GlmModel(wl::DesignMatrix(example_design(8)), Eigen::Vector3d(0, 0, 0)), std::invalid_argument);
    const wl::GlmModel m(wl::DesignMatrix(example_design(8)), Eigen::Vector3d(0, 0, 1));
    EXPECT_THROW(m.fit(std::vector<double>(7, 1.0)), std::invalid_argument);
}

TEST(Glm, NullRejectionRateMatchesAlpha) {
    const auto model = wl::block_design_model(40, 5);
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    const int trials = 10000;
    int one = 0, two = 0;
    std::vector<double> y(40);
    for (int i = 0; i < trials; ++i) {
        for (double& v : y) v = 3.0 + g(rng);
        const auto r = model.fit(y);
        one += r.p <= 0.05;
        two += wl::t_two_sided(r.t, r.dof) <= 0.05;
    }
    const double band = 3.0 * std::sqrt(0.05 * 0.95 / trials);
    EXPECT_NEAR(one / static_cast<double>(trials), 0.05, band);
    EXPECT_NEAR(two / static_cast<double>(trials), 0.05, band);
}

TEST(Bonferroni, Values) {
    EXPECT_DOUBLE_EQ(wl::bonferroni(0.05, 1), 0.05);
    EXPECT_NEAR(wl::bonferroni(0.05, 100), 5e-4, 1e-18);
    EXPECT_NEAR(wl::bonferroni(0.05, 10000), 5e-6, 1e-20);
    EXPECT_THROW(wl::bonferroni(0.0, 3), std::invalid_argument);
    EXPECT_THROW(wl::bonferroni(0.05, 0), std::invalid_argument);
}

TEST(Convolution, DeltaAndTwoTap) {
    const std::vector<double> box{0, 0, 1, 1, 1, 0, 0};
    EXPECT_EQ(wl::convolve_regressor(box, std::vector<double>{1.0}), box);
    const std::vector<double> step{0, 0, 1, 1, 1};
    const auto r = wl::convolve_regressor(step, std::vector<double>{0.5, 0.5});
    const std::vector<double> expect{0, 0, 0.5, 1, 1};
    for (std::size_t i = 0; i < r.size(); ++i) EXPECT_DOUBLE_EQ(r[i], expect[i]);
}

TEST(Convolution, MatchesToeplitzProduct) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> x(30), k(9);
    for (double& v : x) v = u(rng);
    for (double& v : k) v = u(rng);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(30, 30);
    for (int r = 0; r < 30; ++r)
        for (int c = 0; c <= r; ++c)
            if (r - c < 9) t(r, c) = k[static_cast<std::size_t>(r - c)];
    const Eigen::VectorXd expect = t * Eigen::Map<Eigen::VectorXd>(x.data(), 30);
    const auto got = wl::convolve_regressor(x, k);
    for (int i = 0; i < 30; ++i) EXPECT_NEAR(got[static_cast<std::size_t>(i)], expect(i), 1e-14);
    EXPECT_THROW(wl::convolve_regressor(x, std::vector<double>{NAN}), std::invalid_argument);
}

TEST(Hrf, DefaultKernelShape) {
    const auto h = wl::default_hrf();
    double sum = 0.0;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < h.size(); ++i) {
        sum += h[i];
        if (h[i] > h[peak]) peak = i;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_GE(peak, 4u);
    EXPECT_LE(peak, 6u);
    EXPECT_LT(*std::min_element(h.begin(), h.end()), 0.0);  // undershoot
    const auto box = wl::box_regressor(10, 3, 2);
    const std::vector<double> expect{0, 0, 1, 1, 1, 0, 0, 1, 1, 1};
    EXPECT_EQ(box, expect);
}

TEST(DesignCsv, RoundTripWithLabels) {
    const wl::DesignMatrix x(example_design(6), {"one", "time", "task"});
    std::stringstream s;
    wl::write_design_csv(s, x);
    const auto back = wl::read_design_csv(s);
    EXPECT_EQ(back.labels(), x.labels());
    EXPECT_EQ(back.matrix(), x.matrix());
    std::istringstream c("0, 0, 1\n");
    EXPECT_EQ(wl::read_contrast_csv(c), Eigen::Vector3d(0, 0, 1));
}

TEST(DesignCsv, MalformedInput) {
    std::istringstream ragged("1,2\n1\n");
    EXPECT_THROW(wl::read_design_csv(ragged), wl::ParseError);
    std::istringstream text("1,2\n1,x\n");
    EXPECT_THROW(wl::read_design_csv(text), wl::ParseError);
    std::istringstream empty("");
    EXPECT_THROW(wl::read_design_csv(empty), wl::ParseError);
    std::istringstream bad("0,a\n");
    EXPECT_THROW(wl::read_contrast_csv(bad), wl::ParseError);
}
