#pragma once

// HIER1 text format. All member ids are finest-level voxel indices (domain order).
//
//   HIER1
//   seed <u64>
//   max_merge <p>
//   levels <N>
//   voxels <|X|>
//   then for j = N-1 down to 0:
//     level <j> groups <G>
//     <survivor> <merged> ...        (G lines, coarse order)
//     neighbors <G>
//     <k>: <n> <n> ...               (G lines)

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "hierarchy.hpp"

namespace wavelift {

inline void write_hierarchy(std::ostream& out, const GridHierarchy& h) {
    out << "HIER1\n";
    out << "seed " << h.seed() << '\n';
    out << "max_merge " << h.max_merge() << '\n';
    out << "levels " << h.levels() << '\n';
    out << "voxels " << h.domain().size() << '\n';
    for (int j = h.levels() - 1; j >= 0; --j) {
        const GridLevel& fine = h.level(j + 1);
        const GridLevel& coarse = h.level(j);
        const LevelSplit& s = h.split(j);
        out << "level " << j << " groups " << s.groups.size() << '\n';
        for (const auto& grp : s.groups) {
            for (std::size_t i = 0; i < grp.size(); ++i) out << (i ? " " : "") << fine.members[grp[i]];
            out << '\n';
        }
        out << "neighbors " << coarse.size() << '\n';
        for (std::size_t k = 0; k < coarse.size(); ++k) {
            out << coarse.members[k] << ':';
            for (std::size_t n : coarse.neighbors[k]) out << ' ' << coarse.members[n];
            out << '\n';
        }
    }
}

inline std::string hierarchy_text(const GridHierarchy& h) {
    std::ostringstream s;
    write_hierarchy(s, h);
    return s.str();
}

/// 64-bit FNV-1a of the HIER1 text; identifies a hierarchy in pyramid files.
inline std::uint64_t hierarchy_hash(const GridHierarchy& h) {
    std::uint64_t x = 0xcbf29ce484222325ULL;
    for (unsigned char c : hierarchy_text(h)) {
        x ^= c;
        x *= 0x100000001b3ULL;
    }
    return x;
}

namespace detail {

template <class T>
T keyed_value(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("missing '" + key + "' line");
    std::istringstream ls(line);
    std::string k;
    T v{};
    if (!(ls >> k >> v) || k != key) throw ParseError("expected '" + key + " <value>'");
    return v;
}

}  // namespace detail

/// Reads a HIER1 hierarchy built on `domain`; the stored neighbor lists must
/// agree with those implied by the groups.
inline HierarchyPtr read_hierarchy(std::istream& in, DomainPtr domain) {
    if (!domain) throw std::invalid_argument("hierarchy needs a domain");
    std::string line;
    if (!std::getline(in, line) || line != "HIER1") throw ParseError("bad magic, expected HIER1");
    const auto seed = detail::keyed_value<std::uint64_t>(in, "seed");
    const auto p = detail::keyed_value<int>(in, "max_merge");
    const auto n = detail::keyed_value<int>(in, "levels");
    const auto voxels = detail::keyed_value<std::size_t>(in, "voxels");
    if (n < 1 || p < 1) throw ParseError("levels and max_merge must be positive");
    if (voxels != domain->size()) throw StructuralError("hierarchy voxel count does not match domain");

    std::vector<GridLevel> grids(static_cast<std::size_t>(n) + 1);
    std::vector<LevelSplit> splits(static_cast<std::size_t>(n));
    grids[static_cast<std::size_t>(n)] = detail::finest_level(*domain);
    for (int j = n - 1; j >= 0; --j) {
        const GridLevel& fine = grids[static_cast<std::size_t>(j) + 1];
        if (!std::getline(in, line)) throw ParseError("missing level header");
        std::istringstream hs(line);
        std::string lk, gk;
        int lj = -1;
        std::size_t count = 0;
        if (!(hs >> lk >> lj >> gk >> count) || lk != "level" || gk != "groups" || lj != j)
            throw ParseError("expected 'level " + std::to_string(j) + " groups <G>'");
        std::vector<std::vector<std::size_t>> groups(count);
        for (auto& grp : groups) {
            if (!std::getline(in, line)) throw ParseError("truncated group list");
            std::istringstream gs(line);
            std::size_t id;
            while (gs >> id) {
                const std::size_t local = fine.local_of(id);
                if (local == fine.size()) throw ParseError("group member " + std::to_string(id) + " not in level");
                grp.push_back(local);
            }
            if (grp.empty()) throw ParseError("empty group line");
        }
        auto [split, coarse] = detail::assemble_split(fine, std::move(groups));

        const auto ncount = [&] {
            if (!std::getline(in, line)) throw ParseError("missing neighbors header");
            std::istringstream ns(line);
            std::string key;
            std::size_t c = 0;
            if (!(ns >> key >> c) || key != "neighbors") throw ParseError("expected 'neighbors <G>'");
            return c;
        }();
        if (ncount != coarse.size()) throw ParseError("neighbor list count mismatch");
        for (std::size_t k = 0; k < coarse.size(); ++k) {
            if (!std::getline(in, line)) throw ParseError("truncated neighbor list");
            std::istringstream ns(line);
            std::size_t id;
            char colon;
            if (!(ns >> id >> colon) || colon != ':' || id != coarse.members[k])
                throw ParseError("neighbor line out of order");
            std::vector<std::size_t> nb;
            while (ns >> id) {
                const std::size_t local = coarse.local_of(id);
                if (local == coarse.size()) throw ParseError("unknown neighbor id");
                nb.push_back(local);
            }
            std::sort(nb.begin(), nb.end());
            if (nb != coarse.neighbors[k]) throw ParseError("neighbor list disagrees with groups");
        }
        splits[static_cast<std::size_t>(j)] = std::move(split);
        grids[static_cast<std::size_t>(j)] = std::move(coarse);
    }
    return std::make_shared<const GridHierarchy>(std::move(domain), std::move(grids), std::move(splits), seed, p);
}

inline void save_hierarchy(const std::filesystem::path& path, const GridHierarchy& h) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_hierarchy(out, h);
}

inline HierarchyPtr load_hierarchy(const std::filesystem::path& path, DomainPtr domain) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_hierarchy(in, std::move(domain));
}

}  // namespace wavelift
