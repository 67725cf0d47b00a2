#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "errors.hpp"

namespace wavelift {

struct TestResult {
    double g = 0.0;   // effect estimate
    double s2 = 0.0;  // variance term of the statistic
    double t = 0.0;
    int dof = 0;
    double p = 0.5;   // one-sided: P(T >= t)
};

/// Upper tail P(T >= t) of Student's t with `dof` degrees of freedom.
inline double t_upper_tail(double t, int dof) {
    if (dof < 1) throw std::invalid_argument("degrees of freedom must be positive");
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::students_t(dof), t));
}

/// P(|T| >= |t|).
inline double t_two_sided(double t, int dof) { return std::min(1.0, 2.0 * t_upper_tail(std::abs(t), dof)); }

/// Critical value c with P(T >= c) = q.
inline double t_quantile_upper(double q, int dof) {
    return boost::math::quantile(boost::math::complement(boost::math::students_t(dof), q));
}

/// Relative size below which a residual is treated as exactly zero.
inline constexpr double kDegenerateTolerance = 1e-13;

/// t = mean / sqrt(s^2 / N) with the unbiased s^2 and N - 1 degrees of freedom.
inline TestResult one_sample_t(std::span<const double> samples) {
    const std::size_t n = samples.size();
    if (n < 2) throw InsufficientDofError("one-sample t-test needs at least two samples");
    double mean = 0.0, scale = 0.0;
    for (double x : samples) {
        mean += x;
        scale = std::max(scale, std::abs(x));
    }
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : samples) ss += (x - mean) * (x - mean);
    const double s2 = ss / static_cast<double>(n - 1);
    if (std::sqrt(s2) <= kDegenerateTolerance * scale || s2 == 0.0)
        throw DegenerateVarianceError("samples have zero variance");
    TestResult r;
    r.g = mean;
    r.s2 = s2;
    r.dof = static_cast<int>(n - 1);
    r.t = mean / std::sqrt(s2 / static_cast<double>(n));
    r.p = t_upper_tail(r.t, r.dof);
    return r;
}

/// Design matrix X (N_t x L) with cached rank and pseudo-inverse of X^T X.
class DesignMatrix {
 public:
    static constexpr double kRankTolerance = 1e-10;

    explicit DesignMatrix(Eigen::MatrixXd x, std::vector<std::string> labels = {})
        : x_(std::move(x)), labels_(std::move(labels)) {
        if (x_.cols() < 1 || x_.rows() < 1) throw std::invalid_argument("design matrix is empty");
        if (!x_.allFinite()) throw std::invalid_argument("design matrix has non-finite entries");
        if (!labels_.empty() && labels_.size() != static_cast<std::size_t>(x_.cols()))
            throw std::invalid_argument("one label per design column expected");
        const Eigen::MatrixXd normal = x_.transpose() * x_;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
        const Eigen::VectorXd& ev = eig.eigenvalues();
        const double cutoff = kRankTolerance * std::max(ev.maxCoeff(), 0.0);
        Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
        rank_ = 0;
        for (Eigen::Index i = 0; i < ev.size(); ++i)
            if (ev(i) > cutoff) {
                inv(i) = 1.0 / ev(i);
                ++rank_;
            }
        if (rank_ == 0) throw std::invalid_argument("design matrix is zero");
        normal_pinv_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    }

    const Eigen::MatrixXd& matrix() const noexcept { return x_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    Eigen::Index rows() const noexcept { return x_.rows(); }
    Eigen::Index cols() const noexcept { return x_.cols(); }
    int rank() const noexcept { return rank_; }
    bool rank_deficient() const noexcept { return rank_ < x_.cols(); }
    /// (X^T X)^+
    const Eigen::MatrixXd& normal_pinv() const noexcept { return normal_pinv_; }

 private:
    Eigen::MatrixXd x_;
    std::vector<std::string> labels_;
    int rank_ = 0;
    Eigen::MatrixXd normal_pinv_;
};

/// GLM y = X beta + e with contrast c, prepared for many series.
///   beta = (X^T X)^+ X^T y,  g = c^T beta,  s^2 = e^T e * c^T (X^T X)^+ c,
///   t = g / sqrt(s^2 / J),  J = N_t - rank(X)
class GlmModel {
 public:
    GlmModel(DesignMatrix x, Eigen::VectorXd c) : x_(std::move(x)), c_(std::move(c)) {
        if (c_.size() != x_.cols())
            throw std::invalid_argument("contrast has " + std::to_string(c_.size()) + " entries, design has " +
                                        std::to_string(x_.cols()) + " columns");
        if (c_.isZero(0.0)) throw std::invalid_argument("contrast must be non-zero");
        if (!c_.allFinite()) throw std::invalid_argument("contrast has non-finite entries");
        dof_ = static_cast<int>(x_.rows()) - x_.rank();
        if (dof_ < 1)
            throw InsufficientDofError("design has " + std::to_string(x_.rows()) + " rows but rank " +
                                       std::to_string(x_.rank()));
        solve_ = x_.normal_pinv() * x_.matrix().transpose();
        contrast_row_ = c_.transpose() * solve_;
        contrast_var_ = c_.dot(x_.normal_pinv() * c_);
    }

    const DesignMatrix& design() const noexcept { return x_; }
    const Eigen::VectorXd& contrast() const noexcept { return c_; }
    int dof() const noexcept { return dof_; }

    TestResult fit(std::span<const double> y) const {
        if (static_cast<Eigen::Index>(y.size()) != x_.rows())
            throw std::invalid_argument("series has " + std::to_string(y.size()) + " samples, design has " +
                                        std::to_string(x_.rows()) + " rows");
        const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
        const Eigen::VectorXd beta = solve_ * yv;
        const Eigen::VectorXd e = yv - x_.matrix() * beta;
        const double ee = e.squaredNorm();
        const double yy = yv.squaredNorm();
        if (ee == 0.0 || ee <= kDegenerateTolerance * kDegenerateTolerance * yy)
            throw DegenerateVarianceError("series lies in the span of the design (zero residual)");
        TestResult r;
        r.g = contrast_row_.dot(yv);
        r.s2 = ee * contrast_var_;
        r.dof = dof_;
        r.t = r.g / std::sqrt(r.s2 / dof_);
        r.p = t_upper_tail(r.t, dof_);
        return r;
    }

    Eigen::VectorXd beta(std::span<const double> y) const {
        const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
        return solve_ * yv;
    }

 private:
    DesignMatrix x_;
    Eigen::VectorXd c_;
    int dof_ = 0;
    Eigen::MatrixXd solve_;
    Eigen::RowVectorXd contrast_row_;
    double contrast_var_ = 0.0;
};

inline TestResult glm_fit(std::span<const double> y, const DesignMatrix& x, const Eigen::VectorXd& c) {
    return GlmModel(x, c).fit(y);
}

inline double bonferroni(double alpha, long long k) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    if (k < 1) throw std::invalid_argument("number of tests must be at least 1");
    return alpha / static_cast<double>(k);
}

/// Causal convolution truncated to the input length: out[n] = sum_i kernel[i] box[n - i].
inline std::vector<double> convolve_regressor(std::span<const double> box, std::span<const double> kernel) {
    for (double k : kernel)
        if (!std::isfinite(k)) throw std::invalid_argument("kernel has non-finite entries");
    std::vector<double> out(box.size(), 0.0);
    for (std::size_t n = 0; n < box.size(); ++n)
        for (std::size_t i = 0; i < kernel.size() && i <= n; ++i) out[n] += kernel[i] * box[n - i];
    return out;
}

/// Difference of two gamma densities with modes 6 and 16 (unit scale), the
/// second weighted 1/6, sampled at 0, dt, 2 dt, ... and normalized to unit sum.
inline std::vector<double> default_hrf(double dt = 1.0, double length = 32.0) {
    if (!(dt > 0.0) || !(length > 0.0)) throw std::invalid_argument("HRF sampling must be positive");
    const boost::math::gamma_distribution<double> peak(7.0, 1.0), undershoot(17.0, 1.0);
    std::vector<double> h;
    for (double t = 0.0; t <= length; t += dt) h.push_back(boost::math::pdf(peak, t) - boost::math::pdf(undershoot, t) / 6.0);
    double s = 0.0;
    for (double x : h) s += x;
    for (double& x : h) x /= s;
    return h;
}

/// Block design regressor: `off` samples of 0 then `on` samples of 1, repeated, starting with rest.
inline std::vector<double> box_regressor(std::size_t n, std::size_t on, std::size_t off) {
    if (on == 0) throw std::invalid_argument("block length must be positive");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (i % (on + off)) >= off ? 1.0 : 0.0;
    return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    return cells;
}

inline bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t used = 0;
    try {
        out = std::stod(s, &used);
    } catch (const std::exception&) {
        return false;
    }
    return used == s.size() && std::isfinite(out);
}

}  // namespace detail

/// Numeric CSV table; a first line that is not numeric is taken as column labels.
inline DesignMatrix read_design_csv(std::istream& in) {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        const auto cells = detail::split_csv_line(line);
        std::vector<double> row;
        bool numeric = true;
        for (const auto& c : cells) {
            double v;
            if (!detail::parse_double(c, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (!first) throw ParseError("non-numeric design entry in line: " + line);
            labels = cells;
        } else {
            if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged design matrix");
            rows.push_back(std::move(row));
        }
        first = false;
    }
    if (rows.empty()) throw ParseError("design matrix has no rows");
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    if (!labels.empty() && labels.size() != rows.front().size()) throw ParseError("label count does not match columns");
    return DesignMatrix(std::move(x), std::move(labels));
}

inline DesignMatrix read_design_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_design_csv(in);
}

/// Contrast as one row or one column of numbers.
inline Eigen::VectorXd read_contrast_csv(std::istream& in) {
    std::vector<double> c;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        for (const auto& cell : detail::split_csv_line(line)) {
            double v;
            if (!detail::parse_double(cell, v)) throw ParseError("non-numeric contrast entry '" + cell + "'");
            c.push_back(v);
        }
    }
    if (c.empty()) throw ParseError("contrast is empty");
    return Eigen::Map<Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
}

inline Eigen::VectorXd read_contrast_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_contrast_csv(in);
}

inline void write_design_csv(std::ostream& out, const DesignMatrix& x) {
    const auto old = out.precision(17);
    if (!x.labels().empty())
        for (std::size_t i = 0; i < x.labels().size(); ++i) out << (i ? "," : "") << x.labels()[i];
    if (!x.labels().empty()) out << '\n';
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) out << (c ? "," : "") << x.matrix()(r, c);
        out << '\n';
    }
    out.precision(old);
}

}  // namespace wavelift
