#pragma once

#include <cmath>
#include <concepts>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "errors.hpp"
#include "lifting.hpp"
#include "voxel_domain.hpp"

namespace wavelift {

/// A linear analysis/synthesis pair on a domain with a flat coefficient layout.
/// Coefficient k belongs to the approximation space or to detail subspace
/// subspace(k) (0 = coarsest). `normalized` coefficients refer to unit-norm
/// functions; synthesize_abs(w) returns sum_k w_k |psi_k| with psi_k the
/// unnormalized synthesis functions.
template <class B>
concept SpatialBasis = requires(const B& b, std::span<const double> v, std::size_t k, bool normalized) {
    { b.domain() } -> std::convertible_to<const Domain&>;
    { b.coefficient_count() } -> std::convertible_to<std::size_t>;
    { b.is_approximation(k) } -> std::convertible_to<bool>;
    { b.subspace(k) } -> std::convertible_to<int>;
    { b.subspace_count() } -> std::convertible_to<int>;
    { b.analyze(v, normalized) } -> std::same_as<std::vector<double>>;
    { b.synthesize(v, normalized) } -> std::same_as<std::vector<double>>;
    { b.synthesize_abs(v) } -> std::same_as<std::vector<double>>;
};

/// Domain-adapted lifting wavelets over a fixed number of levels.
class AdaptedBasis {
 public:
    AdaptedBasis(std::shared_ptr<const LiftingTransform> t, int levels = 0)
        : t_(std::move(t)) {
        if (!t_) throw std::invalid_argument("basis needs a transform");
        layout_ = t_->forward(std::vector<double>(t_->hierarchy().domain().size(), 0.0), levels);
        approx_ = layout_.approx.size();
        sub_.assign(approx_, -1);
        for (std::size_t j = 0; j < layout_.details.size(); ++j) sub_.insert(sub_.end(), layout_.details[j].size(), static_cast<int>(j));
    }

    AdaptedBasis(HierarchyPtr h, Stage stage, int levels = 0,
                 double fit_tolerance = LiftingTransform::kFitRankTolerance)
        : AdaptedBasis(std::make_shared<const LiftingTransform>(std::move(h), stage, fit_tolerance), levels) {}

    const Domain& domain() const { return t_->hierarchy().domain(); }
    const LiftingTransform& transform() const noexcept { return *t_; }
    std::size_t coefficient_count() const noexcept { return sub_.size(); }
    bool is_approximation(std::size_t k) const noexcept { return k < approx_; }
    int subspace(std::size_t k) const { return sub_.at(k); }
    int subspace_count() const noexcept { return static_cast<int>(layout_.details.size()); }
    int top_level() const noexcept { return layout_.top_level; }

    std::vector<double> analyze(std::span<const double> values, bool normalized = false) const {
        return t_->forward(values, t_->levels() - layout_.top_level, normalized).flatten();
    }

    std::vector<double> synthesize(std::span<const double> coeffs, bool normalized = false) const {
        CoefficientPyramid p = layout_;
        p.normalized = normalized;
        p.assign(coeffs);
        return t_->inverse_values(p);
    }

    std::vector<double> synthesize_abs(std::span<const double> weights) const {
        if (weights.size() != coefficient_count()) throw StructuralError("weight count does not match basis");
        std::vector<double> out(domain().size(), 0.0);
        std::size_t k = 0;
        for (std::size_t a = 0; a < approx_; ++a, ++k)
            if (weights[k] != 0.0)
                for (const auto& [v, x] : t_->scaling_function(layout_.top_level, a)) out[v] += weights[k] * std::abs(x);
        for (std::size_t j = 0; j < layout_.details.size(); ++j) {
            const int level = layout_.top_level + static_cast<int>(j);
            for (std::size_t m = 0; m < layout_.details[j].size(); ++m, ++k)
                if (weights[k] != 0.0)
                    for (const auto& [v, x] : t_->wavelet(level, m)) out[v] += weights[k] * std::abs(x);
        }
        return out;
    }

    /// Unnormalized synthesis function of coefficient k as a dense vector.
    std::vector<double> function(std::size_t k) const {
        std::vector<double> e(coefficient_count(), 0.0);
        e.at(k) = 1.0;
        return synthesize(e);
    }

 private:
    std::shared_ptr<const LiftingTransform> t_;
    CoefficientPyramid layout_;
    std::size_t approx_ = 0;
    std::vector<int> sub_;
};

/// Orthonormal separable 2D Haar transform on the rectangle [0, W) x [0, H)
/// containing the domain, with W and H rounded up to multiples of 2^levels.
/// Values outside the domain are taken as zero; synthesis is restricted to
/// the domain. Requires a 2D domain with unit voxel measures.
class TensorHaar2D {
 public:
    TensorHaar2D(DomainPtr domain, int levels) : d_(std::move(domain)), levels_(levels) {
        if (!d_) throw std::invalid_argument("basis needs a domain");
        if (d_->dim() != 2) throw std::invalid_argument("tensor Haar baseline needs a 2D domain");
        if (levels < 1) throw std::invalid_argument("tensor Haar needs at least one level");
        for (std::size_t i = 0; i < d_->size(); ++i) {
            if (d_->measure(i) != 1.0) throw std::invalid_argument("tensor Haar baseline needs unit voxel measures");
            if (d_->voxel(i).x < 0 || d_->voxel(i).y < 0)
                throw std::invalid_argument("tensor Haar baseline needs non-negative coordinates");
        }
        const int block = 1 << levels;
        int mx = 0, my = 0;
        for (const Voxel& v : d_->voxels()) {
            mx = std::max(mx, v.x);
            my = std::max(my, v.y);
        }
        w_ = (mx + block) / block * block;
        h_ = (my + block) / block * block;
        sub_.resize(static_cast<std::size_t>(w_) * static_cast<std::size_t>(h_));
        for (int y = 0; y < h_; ++y)
            for (int x = 0; x < w_; ++x) {
                int s = -1;
                for (int l = 1; l <= levels; ++l) {
                    const bool inside = x < (w_ >> (l - 1)) && y < (h_ >> (l - 1));
                    const bool coarser = x < (w_ >> l) && y < (h_ >> l);
                    if (inside && !coarser) s = levels - l;
                }
                sub_[index(x, y)] = s;
            }
    }

    const Domain& domain() const { return *d_; }
    int width() const noexcept { return w_; }
    int height() const noexcept { return h_; }
    std::size_t coefficient_count() const noexcept { return sub_.size(); }
    bool is_approximation(std::size_t k) const { return sub_.at(k) < 0; }
    int subspace(std::size_t k) const { return sub_.at(k); }
    int subspace_count() const noexcept { return levels_; }

    std::vector<double> analyze(std::span<const double> values, bool = false) const {
        if (values.size() != d_->size()) throw StructuralError("value count does not match domain");
        std::vector<double> a(coefficient_count(), 0.0);
        for (std::size_t i = 0; i < d_->size(); ++i) a[index(d_->voxel(i).x, d_->voxel(i).y)] = values[i];
        std::vector<double> tmp(static_cast<std::size_t>(std::max(w_, h_)));
        for (int l = 0; l < levels_; ++l) {
            const int w = w_ >> l, h = h_ >> l;
            for (int y = 0; y < h; ++y) forward_line(a, index(0, y), 1, w, tmp);
            for (int x = 0; x < w; ++x) forward_line(a, index(x, 0), static_cast<std::size_t>(w_), h, tmp);
        }
        return a;
    }

    std::vector<double> synthesize(std::span<const double> coeffs, bool = false) const {
        return restrict(inverse(coeffs, false));
    }

    std::vector<double> synthesize_abs(std::span<const double> weights) const {
        return restrict(inverse(weights, true));
    }

 private:
    static constexpr double kRoot = std::numbers::sqrt2 / 2.0;

    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(w_) + static_cast<std::size_t>(x);
    }

    static void forward_line(std::vector<double>& a, std::size_t start, std::size_t stride, int n,
                             std::vector<double>& tmp) {
        const int half = n / 2;
        for (int i = 0; i < half; ++i) {
            const double p = a[start + stride * static_cast<std::size_t>(2 * i)];
            const double q = a[start + stride * static_cast<std::size_t>(2 * i + 1)];
            tmp[static_cast<std::size_t>(i)] = (p + q) * kRoot;
            tmp[static_cast<std::size_t>(half + i)] = (p - q) * kRoot;
        }
        for (int i = 0; i < n; ++i) a[start + stride * static_cast<std::size_t>(i)] = tmp[static_cast<std::size_t>(i)];
    }

    static void inverse_line(std::vector<double>& a, std::size_t start, std::size_t stride, int n,
                             std::vector<double>& tmp, bool absolute) {
        const int half = n / 2;
        for (int i = 0; i < half; ++i) {
            const double s = a[start + stride * static_cast<std::size_t>(i)];
            const double d = a[start + stride * static_cast<std::size_t>(half + i)];
            tmp[static_cast<std::size_t>(2 * i)] = (s + d) * kRoot;
            tmp[static_cast<std::size_t>(2 * i + 1)] = (absolute ? s + d : s - d) * kRoot;
        }
        for (int i = 0; i < n; ++i) a[start + stride * static_cast<std::size_t>(i)] = tmp[static_cast<std::size_t>(i)];
    }

    std::vector<double> inverse(std::span<const double> coeffs, bool absolute) const {
        if (coeffs.size() != coefficient_count()) throw StructuralError("coefficient count does not match basis");
        std::vector<double> a(coeffs.begin(), coeffs.end());
        std::vector<double> tmp(static_cast<std::size_t>(std::max(w_, h_)));
        for (int l = levels_ - 1; l >= 0; --l) {
            const int w = w_ >> l, h = h_ >> l;
            for (int x = 0; x < w; ++x) inverse_line(a, index(x, 0), static_cast<std::size_t>(w_), h, tmp, absolute);
            for (int y = 0; y < h; ++y) inverse_line(a, index(0, y), 1, w, tmp, absolute);
        }
        return a;
    }

    std::vector<double> restrict(const std::vector<double>& grid) const {
        std::vector<double> out(d_->size());
        for (std::size_t i = 0; i < d_->size(); ++i) out[i] = grid[index(d_->voxel(i).x, d_->voxel(i).y)];
        return out;
    }

    DomainPtr d_;
    int levels_;
    int w_ = 0, h_ = 0;
    std::vector<int> sub_;
};

static_assert(SpatialBasis<AdaptedBasis>);
static_assert(SpatialBasis<TensorHaar2D>);

}  // namespace wavelift
