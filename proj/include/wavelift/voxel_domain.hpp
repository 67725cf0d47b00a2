#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace wavelift {

using Point3 = std::array<double, 3>;

/// Integer grid coordinate of a voxel; 2D domains keep z = 0.
struct Voxel {
    std::int32_t x = 0;
    std::int32_t y = 0;
    std::int32_t z = 0;

    friend bool operator==(const Voxel&, const Voxel&) = default;

    // z slowest, x fastest: the iteration order the seeded hierarchy relies on.
    friend std::strong_ordering operator<=>(const Voxel& a, const Voxel& b) {
        if (auto c = a.z <=> b.z; c != 0) return c;
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }
};

struct VoxelHash {
    std::size_t operator()(const Voxel& v) const noexcept {
        std::uint64_t h = static_cast<std::uint32_t>(v.x);
        h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.y);
        h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.z);
        return static_cast<std::size_t>(h ^ (h >> 29));
    }
};

/// Face adjacency: L1 distance between the integer coordinates is exactly one.
inline bool are_neighbors(const Voxel& a, const Voxel& b) {
    const std::int64_t d = std::abs(std::int64_t{a.x} - b.x) + std::abs(std::int64_t{a.y} - b.y) +
                           std::abs(std::int64_t{a.z} - b.z);
    return d == 1;
}

/// Finite set of voxels with per-voxel measure and the face-adjacency graph.
///
/// Voxels are stored in (z, y, x) lexicographic order and addressed by their
/// position in that order. Immutable after construction.
class Domain {
 public:
    /// `measure` may be empty (unit measure per voxel). `dim` must be 2 or 3;
    /// in 2D every z must be 0 and the z spacing 1.
    Domain(std::vector<Voxel> voxels, Point3 spacing = {1.0, 1.0, 1.0}, std::vector<double> measure = {},
           int dim = 0)
        : spacing_(spacing) {
        if (voxels.empty()) throw std::invalid_argument("domain must contain at least one voxel");
        for (double d : spacing_)
            if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("spacing must be positive and finite");

        std::vector<std::size_t> order(voxels.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return voxels[a] < voxels[b]; });
        voxels_.reserve(voxels.size());
        for (std::size_t i : order) voxels_.push_back(voxels[i]);
        for (std::size_t i = 1; i < voxels_.size(); ++i)
            if (voxels_[i] == voxels_[i - 1]) throw std::invalid_argument("duplicate voxel in domain");

        if (measure.empty()) {
            measure_.assign(voxels_.size(), 1.0);
        } else {
            if (measure.size() != voxels_.size()) throw std::invalid_argument("measure size does not match voxel count");
            measure_.resize(measure.size());
            for (std::size_t i = 0; i < order.size(); ++i) measure_[i] = measure[order[i]];
            for (double m : measure_)
                if (!(m > 0.0) || !std::isfinite(m)) throw std::invalid_argument("voxel measure must be positive");
        }

        const bool flat = std::all_of(voxels_.begin(), voxels_.end(), [](const Voxel& v) { return v.z == 0; });
        dim_ = dim == 0 ? (flat && spacing_[2] == 1.0 ? 2 : 3) : dim;
        if (dim_ != 2 && dim_ != 3) throw std::invalid_argument("dimension must be 2 or 3");
        if (dim_ == 2 && (!flat || spacing_[2] != 1.0))
            throw std::invalid_argument("2D domain requires z = 0 and unit z spacing");

        index_.reserve(voxels_.size() * 2);
        for (std::size_t i = 0; i < voxels_.size(); ++i) index_.emplace(voxels_[i], i);

        neighbor_offsets_.assign(voxels_.size() + 1, 0);
        static constexpr std::array<std::array<int, 3>, 6> kFaces{
            {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
        for (std::size_t i = 0; i < voxels_.size(); ++i) {
            const Voxel& v = voxels_[i];
            std::vector<std::size_t> found;
            for (const auto& f : kFaces) {
                if (auto j = index_of(Voxel{v.x + f[0], v.y + f[1], v.z + f[2]})) found.push_back(*j);
            }
            std::sort(found.begin(), found.end());
            neighbors_.insert(neighbors_.end(), found.begin(), found.end());
            neighbor_offsets_[i + 1] = neighbors_.size();
        }

        for (const Voxel& v : voxels_) {
            grid_dims_[0] = std::max(grid_dims_[0], v.x + 1);
            grid_dims_[1] = std::max(grid_dims_[1], v.y + 1);
            grid_dims_[2] = std::max(grid_dims_[2], v.z + 1);
        }
    }

    std::size_t size() const noexcept { return voxels_.size(); }
    int dim() const noexcept { return dim_; }
    const Point3& spacing() const noexcept { return spacing_; }
    const Voxel& voxel(std::size_t i) const { return voxels_[i]; }
    std::span<const Voxel> voxels() const noexcept { return voxels_; }
    double measure(std::size_t i) const { return measure_[i]; }
    std::span<const double> measures() const noexcept { return measure_; }

    double total_measure() const { return std::accumulate(measure_.begin(), measure_.end(), 0.0); }

    /// Physical center of voxel i (index times spacing).
    Point3 position(std::size_t i) const {
        const Voxel& v = voxels_[i];
        return {v.x * spacing_[0], v.y * spacing_[1], v.z * spacing_[2]};
    }

    std::optional<std::size_t> index_of(const Voxel& v) const {
        auto it = index_.find(v);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::span<const std::size_t> neighbors(std::size_t i) const {
        return std::span<const std::size_t>(neighbors_).subspan(neighbor_offsets_[i],
                                                                neighbor_offsets_[i + 1] - neighbor_offsets_[i]);
    }

    /// Grid extent used when writing the domain to a dense file. Defaults to the
    /// bounding box from the origin; a domain loaded from a mask keeps the mask's extent.
    const std::array<std::int32_t, 3>& grid_dims() const noexcept { return grid_dims_; }

    void set_grid_dims(const std::array<std::int32_t, 3>& dims) {
        for (int a = 0; a < 3; ++a)
            if (dims[a] < grid_dims_[a]) throw std::invalid_argument("grid extent smaller than domain bounding box");
        grid_dims_ = dims;
    }

    /// Same voxels and spacing, different per-voxel measure (indexed in domain order).
    Domain with_measure(std::vector<double> measure) const {
        Domain d(voxels_, spacing_, std::move(measure), dim_);
        d.grid_dims_ = grid_dims_;
        return d;
    }

    friend bool operator==(const Domain& a, const Domain& b) {
        return a.voxels_ == b.voxels_ && a.spacing_ == b.spacing_ && a.measure_ == b.measure_ && a.dim_ == b.dim_;
    }

 private:
    std::vector<Voxel> voxels_;
    Point3 spacing_;
    std::vector<double> measure_;
    int dim_ = 3;
    std::unordered_map<Voxel, std::size_t, VoxelHash> index_;
    std::vector<std::size_t> neighbors_;
    std::vector<std::size_t> neighbor_offsets_;
    std::array<std::int32_t, 3> grid_dims_{0, 0, 0};
};

using DomainPtr = std::shared_ptr<const Domain>;

/// Real values on a domain, one per voxel in domain order.
struct Volume {
    DomainPtr domain;
    std::vector<double> values;

    Volume() = default;
    Volume(DomainPtr d, std::vector<double> v) : domain(std::move(d)), values(std::move(v)) {
        if (!domain) throw std::invalid_argument("volume needs a domain");
        if (values.size() != domain->size()) throw StructuralError("volume value count does not match domain size");
    }
    explicit Volume(DomainPtr d) : Volume(d, std::vector<double>(d ? d->size() : 0, 0.0)) {}

    std::size_t size() const noexcept { return values.size(); }
};

/// L2(mu) inner product of two value vectors on the same domain.
inline double inner_product(const Domain& d, std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += a[i] * b[i] * d.measure(i);
    return s;
}

inline double l2_norm(const Domain& d, std::span<const double> a) { return std::sqrt(inner_product(d, a, a)); }

/// Component label per voxel (face connectivity), labels 0..count-1 in order of first voxel.
inline std::pair<std::vector<std::size_t>, std::size_t> connected_components(const Domain& d) {
    constexpr auto kUnset = static_cast<std::size_t>(-1);
    std::vector<std::size_t> label(d.size(), kUnset);
    std::size_t count = 0;
    for (std::size_t seed = 0; seed < d.size(); ++seed) {
        if (label[seed] != kUnset) continue;
        std::queue<std::size_t> todo;
        todo.push(seed);
        label[seed] = count;
        while (!todo.empty()) {
            std::size_t i = todo.front();
            todo.pop();
            for (std::size_t n : d.neighbors(i)) {
                if (label[n] == kUnset) {
                    label[n] = count;
                    todo.push(n);
                }
            }
        }
        ++count;
    }
    return {std::move(label), count};
}

/// Annulus [inner, outer) in pixel units, measured from the grid center.
struct Annulus {
    double inner = 0.0;
    double outer = 0.0;
};

/// Pixel (i, j) of a grid_size x grid_size image belongs to the domain when the
/// distance of its center from ((n-1)/2, (n-1)/2) falls in any annulus.
inline bool in_rings(std::span<const Annulus> rings, int grid_size, int i, int j) {
    const double c = 0.5 * (grid_size - 1);
    const double r = std::hypot(i - c, j - c);
    return std::any_of(rings.begin(), rings.end(), [r](const Annulus& a) { return r >= a.inner && r < a.outer; });
}

inline Domain make_ring_domain(std::span<const Annulus> rings, int grid_size) {
    if (rings.empty()) throw std::invalid_argument("ring domain needs at least one annulus");
    if (grid_size < 1) throw std::invalid_argument("grid size must be positive");
    for (std::size_t r = 0; r < rings.size(); ++r) {
        if (!(rings[r].inner >= 0.0) || !(rings[r].outer > rings[r].inner))
            throw std::invalid_argument("annulus needs 0 <= inner < outer");
        if (r > 0 && rings[r].inner < rings[r - 1].outer)
            throw std::invalid_argument("annuli must be increasing and disjoint");
    }
    std::vector<Voxel> voxels;
    for (int y = 0; y < grid_size; ++y)
        for (int x = 0; x < grid_size; ++x)
            if (in_rings(rings, grid_size, x, y)) voxels.push_back({x, y, 0});
    if (voxels.empty()) throw std::invalid_argument("annuli contain no pixel centers");
    Domain d(std::move(voxels), {1.0, 1.0, 1.0}, {}, 2);
    d.set_grid_dims({grid_size, grid_size, 1});
    return d;
}

/// Full nx x ny x nz box with unit measure.
inline Domain make_box_domain(int nx, int ny, int nz = 1, Point3 spacing = {1.0, 1.0, 1.0}) {
    if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("box extent must be positive");
    std::vector<Voxel> voxels;
    voxels.reserve(static_cast<std::size_t>(nx) * ny * nz);
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) voxels.push_back({x, y, z});
    return Domain(std::move(voxels), spacing, {}, nz == 1 && spacing[2] == 1.0 ? 2 : 3);
}

}  // namespace wavelift
