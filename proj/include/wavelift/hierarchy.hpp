#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "voxel_domain.hpp"

namespace wavelift {

/// One grid K(j) of the hierarchy. Members are addressed by a local index
/// 0..size()-1; `members[k]` is the finest-level voxel that represents k.
struct GridLevel {
    std::vector<std::size_t> members;                 // ascending finest voxel ids
    std::vector<std::vector<std::size_t>> neighbors;  // local indices, ascending
    std::vector<double> measure;                      // mu(S_{j,k})
    std::vector<Point3> centroid;                     // C(S_{j,k})
    std::vector<std::size_t> region;                  // finest voxel -> local k with voxel in S_{j,k}

    std::size_t size() const noexcept { return members.size(); }

    /// Local index of the member represented by finest voxel `finest`, or size() if absent.
    std::size_t local_of(std::size_t finest) const {
        auto it = std::lower_bound(members.begin(), members.end(), finest);
        if (it == members.end() || *it != finest) return size();
        return static_cast<std::size_t>(it - members.begin());
    }
};

/// Coarsening K(j+1) -> K(j) u M(j). Fine indices are local to level j+1,
/// coarse indices local to level j, detail positions index M(j).
struct LevelSplit {
    std::vector<std::vector<std::size_t>> groups;        // coarse k -> sibling group, survivor first
    std::vector<std::size_t> kept;                       // coarse k -> fine survivor
    std::vector<std::size_t> details;                    // M(j) as ascending fine indices
    std::vector<std::size_t> detail_parent;              // detail position -> coarse k_m
    std::vector<std::vector<std::size_t>> group_details; // coarse k -> detail positions of its group
    std::vector<std::size_t> parent;                     // fine index -> coarse k
};

/// Nested grids K(N) = X, ..., K(0) produced by seeded random merging.
class GridHierarchy {
 public:
    GridHierarchy(DomainPtr domain, std::vector<GridLevel> levels, std::vector<LevelSplit> splits, std::uint64_t seed,
                  int max_merge)
        : domain_(std::move(domain)),
          levels_(std::move(levels)),
          splits_(std::move(splits)),
          seed_(seed),
          max_merge_(max_merge) {}

    const Domain& domain() const noexcept { return *domain_; }
    const DomainPtr& domain_ptr() const noexcept { return domain_; }
    /// Number of coarsening steps N; levels are 0..N.
    int levels() const noexcept { return static_cast<int>(splits_.size()); }
    const GridLevel& level(int j) const { return levels_.at(static_cast<std::size_t>(j)); }
    /// Split between level j+1 and level j, for j in [0, N).
    const LevelSplit& split(int j) const { return splits_.at(static_cast<std::size_t>(j)); }
    std::uint64_t seed() const noexcept { return seed_; }
    int max_merge() const noexcept { return max_merge_; }

    /// Finest voxels making up S_{j,k} (ascending).
    std::vector<std::size_t> region_voxels(int j, std::size_t k) const {
        std::vector<std::size_t> out;
        const auto& reg = level(j).region;
        for (std::size_t v = 0; v < reg.size(); ++v)
            if (reg[v] == k) out.push_back(v);
        return out;
    }

    friend bool operator==(const GridHierarchy& a, const GridHierarchy& b) {
        if (a.seed_ != b.seed_ || a.max_merge_ != b.max_merge_ || a.levels_.size() != b.levels_.size()) return false;
        if (!(*a.domain_ == *b.domain_)) return false;
        for (std::size_t j = 0; j < a.levels_.size(); ++j) {
            if (a.levels_[j].members != b.levels_[j].members) return false;
            if (a.levels_[j].neighbors != b.levels_[j].neighbors) return false;
        }
        for (std::size_t j = 0; j < a.splits_.size(); ++j)
            if (a.splits_[j].groups != b.splits_[j].groups) return false;
        return true;
    }

 private:
    DomainPtr domain_;
    std::vector<GridLevel> levels_;
    std::vector<LevelSplit> splits_;
    std::uint64_t seed_;
    int max_merge_;
};

using HierarchyPtr = std::shared_ptr<const GridHierarchy>;

namespace detail {

inline GridLevel finest_level(const Domain& d) {
    GridLevel g;
    const std::size_t n = d.size();
    g.members.resize(n);
    std::iota(g.members.begin(), g.members.end(), std::size_t{0});
    g.region = g.members;
    g.neighbors.resize(n);
    g.measure.resize(n);
    g.centroid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto nb = d.neighbors(i);
        g.neighbors[i].assign(nb.begin(), nb.end());
        g.measure[i] = d.measure(i);
        g.centroid[i] = d.position(i);
    }
    return g;
}

inline double distance(const Point3& a, const Point3& b) {
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

/// Assembles the split and coarse grid from sibling groups (survivor first, in
/// any group order) over the fine grid.
inline std::pair<LevelSplit, GridLevel> assemble_split(const GridLevel& fine,
                                                       std::vector<std::vector<std::size_t>> groups) {
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });

    LevelSplit s;
    const std::size_t nf = fine.size();
    constexpr auto kUnset = static_cast<std::size_t>(-1);
    s.parent.assign(nf, kUnset);
    s.kept.resize(groups.size());
    for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) throw StructuralError("empty sibling group");
        s.kept[k] = groups[k].front();
        for (std::size_t f : groups[k]) {
            if (f >= nf || s.parent[f] != kUnset) throw StructuralError("sibling groups must partition the grid");
            s.parent[f] = k;
        }
    }
    for (std::size_t f = 0; f < nf; ++f)
        if (s.parent[f] == kUnset) throw StructuralError("sibling groups must cover the grid");

    std::vector<std::size_t> position(nf, kUnset);
    for (std::size_t f = 0; f < nf; ++f) {
        if (s.kept[s.parent[f]] != f) {
            position[f] = s.details.size();
            s.details.push_back(f);
            s.detail_parent.push_back(s.parent[f]);
        }
    }
    s.group_details.resize(groups.size());
    for (std::size_t k = 0; k < groups.size(); ++k)
        for (std::size_t idx = 1; idx < groups[k].size(); ++idx) s.group_details[k].push_back(position[groups[k][idx]]);
    s.groups = std::move(groups);

    GridLevel c;
    const std::size_t nc = s.groups.size();
    c.members.resize(nc);
    c.measure.assign(nc, 0.0);
    c.centroid.assign(nc, Point3{0.0, 0.0, 0.0});
    for (std::size_t k = 0; k < nc; ++k) {
        c.members[k] = fine.members[s.kept[k]];
        for (std::size_t f : s.groups[k]) {
            const double m = fine.measure[f];
            c.measure[k] += m;
            for (int a = 0; a < 3; ++a) c.centroid[k][a] += m * fine.centroid[f][a];
        }
        for (int a = 0; a < 3; ++a) c.centroid[k][a] /= c.measure[k];
    }
    c.region.resize(fine.region.size());
    for (std::size_t v = 0; v < fine.region.size(); ++v) c.region[v] = s.parent[fine.region[v]];
    c.neighbors.resize(nc);
    for (std::size_t a = 0; a < nf; ++a)
        for (std::size_t b : fine.neighbors[a])
            if (s.parent[a] != s.parent[b]) c.neighbors[s.parent[a]].push_back(s.parent[b]);
    for (auto& nb : c.neighbors) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    return {std::move(s), std::move(c)};
}

/// One random merging pass over `fine`.
inline std::vector<std::vector<std::size_t>> random_groups(const GridLevel& fine, int max_merge,
                                                           std::mt19937_64& rng) {
    constexpr double kMinDistance = 1e-12;
    const std::size_t n = fine.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<char> available(n, 1);
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::size_t> candidates;
    std::vector<double> weights;
    for (std::size_t k : order) {
        if (!available[k]) continue;
        std::vector<std::size_t> group{k};
        available[k] = 0;

        candidates.clear();
        for (std::size_t s : fine.neighbors[k])
            if (available[s]) candidates.push_back(s);
        if (!candidates.empty()) {
            const std::size_t limit = std::min(static_cast<std::size_t>(max_merge), candidates.size());
            std::uniform_int_distribution<std::size_t> count(1, limit);
            std::size_t q = count(rng);
            weights.clear();
            for (std::size_t s : candidates)
                weights.push_back(1.0 / std::max(distance(fine.centroid[k], fine.centroid[s]), kMinDistance));
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            while (q-- > 0) {
                const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
                double u = unit(rng) * total;
                std::size_t pick = 0;
                while (pick + 1 < weights.size() && u >= weights[pick]) u -= weights[pick++];
                group.push_back(candidates[pick]);
                available[candidates[pick]] = 0;
                candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(pick));
                weights.erase(weights.begin() + static_cast<std::ptrdiff_t>(pick));
            }
        }
        groups.push_back(std::move(group));
    }
    return groups;
}

}  // namespace detail

/// Builds K(N) = X down to K(0) by seeded random merging of available neighbors.
///
/// Each pass shuffles the grid, lets the first available member absorb q
/// available neighbors (q uniform in 1..min(p, available), picked without
/// replacement with weight 1/centroid distance), and repeats until every
/// member is used. The survivor keeps its identity on the coarse grid.
/// Generator: std::mt19937_64 seeded with `seed`.
inline HierarchyPtr build_hierarchy(DomainPtr domain, int levels, std::uint64_t seed, int max_merge = 3) {
    if (!domain || domain->size() == 0) throw std::invalid_argument("hierarchy needs a non-empty domain");
    if (levels < 1) throw std::invalid_argument("hierarchy needs at least one level");
    if (max_merge < 1) throw std::invalid_argument("max_merge must be at least 1");

    std::mt19937_64 rng(seed);
    std::vector<GridLevel> grids(static_cast<std::size_t>(levels) + 1);
    std::vector<LevelSplit> splits(static_cast<std::size_t>(levels));
    grids[static_cast<std::size_t>(levels)] = detail::finest_level(*domain);
    for (int j = levels - 1; j >= 0; --j) {
        const GridLevel& fine = grids[static_cast<std::size_t>(j) + 1];
        auto [split, coarse] = detail::assemble_split(fine, detail::random_groups(fine, max_merge, rng));
        splits[static_cast<std::size_t>(j)] = std::move(split);
        grids[static_cast<std::size_t>(j)] = std::move(coarse);
    }
    return std::make_shared<const GridHierarchy>(std::move(domain), std::move(grids), std::move(splits), seed,
                                                 max_merge);
}

struct LevelStats {
    int level = 0;
    std::size_t members = 0;
    double mean_group_size = 1.0;  // groups merging level+1 into this level
    std::size_t max_group_size = 1;
    double mean_region_measure = 0.0;
};

/// One entry per level, finest first (j = N, ..., 0). The finest entry has no groups.
inline std::vector<LevelStats> coarsen_stats(const GridHierarchy& h) {
    std::vector<LevelStats> out;
    for (int j = h.levels(); j >= 0; --j) {
        const GridLevel& g = h.level(j);
        LevelStats s;
        s.level = j;
        s.members = g.size();
        s.mean_region_measure = std::accumulate(g.measure.begin(), g.measure.end(), 0.0) / static_cast<double>(g.size());
        if (j < h.levels()) {
            const LevelSplit& sp = h.split(j);
            std::size_t total = 0;
            s.max_group_size = 0;
            for (const auto& grp : sp.groups) {
                total += grp.size();
                s.max_group_size = std::max(s.max_group_size, grp.size());
            }
            s.mean_group_size = static_cast<double>(total) / static_cast<double>(sp.groups.size());
        }
        out.push_back(s);
    }
    return out;
}

}  // namespace wavelift
