#pragma once

// PYR1 format:
//
//   PYR1
//   hierarchy <16 hex digits>     (hierarchy_hash of the hierarchy)
//   top_level <j0>
//   stage <lazy|predict|haar|ai>
//   normalized <0|1>
//   count <n>
//   data
//   <n little-endian f64: approx, then details for j = j0 .. N-1 in M(j) order>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "hierarchy_io.hpp"
#include "lifting.hpp"
#include "vxl_io.hpp"

namespace wavelift {

inline std::string hash_hex(std::uint64_t h) {
    std::ostringstream s;
    s << std::hex << std::setw(16) << std::setfill('0') << h;
    return s.str();
}

inline void write_pyramid(std::ostream& out, const CoefficientPyramid& p) {
    if (!p.hierarchy) throw StructuralError("pyramid has no hierarchy");
    const std::vector<double> flat = p.flatten();
    out << "PYR1\n";
    out << "hierarchy " << hash_hex(hierarchy_hash(*p.hierarchy)) << '\n';
    out << "top_level " << p.top_level << '\n';
    out << "stage " << stage_name(p.stage) << '\n';
    out << "normalized " << (p.normalized ? 1 : 0) << '\n';
    out << "count " << flat.size() << '\n';
    out << "data\n";
    for (double v : flat) detail::write_f64_le(out, v);
}

/// Reads a pyramid and binds it to `h`, which must hash to the stored value.
inline CoefficientPyramid read_pyramid(std::istream& in, HierarchyPtr h) {
    if (!h) throw std::invalid_argument("pyramid needs a hierarchy");
    std::string line;
    if (!std::getline(in, line) || line != "PYR1") throw ParseError("bad magic, expected PYR1");
    const auto hash = detail::keyed_value<std::string>(in, "hierarchy");
    const auto top = detail::keyed_value<int>(in, "top_level");
    const auto stage = detail::keyed_value<std::string>(in, "stage");
    const auto normalized = detail::keyed_value<int>(in, "normalized");
    const auto count = detail::keyed_value<std::size_t>(in, "count");
    if (!std::getline(in, line) || line != "data") throw ParseError("expected 'data' line");
    if (hash != hash_hex(hierarchy_hash(*h))) throw StructuralError("pyramid was written for a different hierarchy");
    if (top < 0 || top >= h->levels()) throw ParseError("top_level out of range");
    if (normalized != 0 && normalized != 1) throw ParseError("normalized must be 0 or 1");

    CoefficientPyramid p;
    p.hierarchy = h;
    p.top_level = top;
    try {
        p.stage = parse_stage(stage);
    } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
    }
    p.normalized = normalized == 1;
    p.approx.resize(h->level(top).size());
    for (int j = top; j < h->levels(); ++j) p.details.emplace_back(h->split(j).details.size());
    if (count != p.size()) throw ParseError("coefficient count does not match hierarchy");

    std::string payload(count * 8, '\0');
    in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) throw ParseError("truncated payload");
    if (in.peek() != std::char_traits<char>::eof()) throw ParseError("trailing bytes after payload");
    std::vector<double> flat(count);
    for (std::size_t i = 0; i < count; ++i) {
        flat[i] = detail::read_f64_le(payload.data() + 8 * i);
        if (!std::isfinite(flat[i])) throw ParseError("non-finite coefficient");
    }
    p.assign(flat);
    return p;
}

inline void save_pyramid(const std::filesystem::path& path, const CoefficientPyramid& p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_pyramid(out, p);
}

inline CoefficientPyramid load_pyramid(const std::filesystem::path& path, HierarchyPtr h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_pyramid(in, std::move(h));
}

}  // namespace wavelift
