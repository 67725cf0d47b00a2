#pragma once

// VXL1 volume files: a five-line text header followed by a raw little-endian
// payload, x fastest, then y, z, t.
//
//   VXL1
//   dims nx ny nz [nt]
//   spacing dx dy dz
//   dtype u8|f64
//   data

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "voxel_domain.hpp"

namespace wavelift {

enum class VxlType { U8, F64 };

struct VxlGrid {
    std::array<std::int32_t, 4> dims{1, 1, 1, 1};  // nx, ny, nz, nt
    bool has_time = false;
    Point3 spacing{1.0, 1.0, 1.0};
    VxlType type = VxlType::F64;
    std::vector<double> data;  // dense, x fastest

    std::size_t spatial_size() const {
        return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    }
    std::size_t total_size() const { return spatial_size() * static_cast<std::size_t>(dims[3]); }
    std::size_t offset(const Voxel& v, std::int32_t t = 0) const {
        return static_cast<std::size_t>(v.x) +
               static_cast<std::size_t>(dims[0]) * (v.y + static_cast<std::size_t>(dims[1]) * v.z) +
               spatial_size() * t;
    }
};

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
        return r;
    }
}

inline void write_f64_le(std::ostream& out, double x) {
    const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(x));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
}

inline double read_f64_le(const char* p) {
    std::uint64_t bits;
    std::memcpy(&bits, p, 8);
    return std::bit_cast<double>(to_little_endian(bits));
}

inline std::string expect_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(std::string("missing header line '") + what + "'");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace detail

inline VxlGrid read_vxl(std::istream& in) {
    using detail::expect_line;
    VxlGrid g;
    if (expect_line(in, "VXL1") != "VXL1") throw ParseError("bad magic, expected VXL1");

    {
        std::istringstream ls(expect_line(in, "dims"));
        std::string key;
        ls >> key;
        if (key != "dims") throw ParseError("expected 'dims'");
        std::vector<long long> d;
        long long v;
        while (ls >> v) d.push_back(v);
        if (!ls.eof()) throw ParseError("non-numeric dims");
        if (d.size() != 3 && d.size() != 4) throw ParseError("dims needs 3 or 4 values");
        for (long long x : d)
            if (x < 1 || x > (1LL << 30)) throw ParseError("dims must be positive");
        for (std::size_t a = 0; a < d.size(); ++a) g.dims[a] = static_cast<std::int32_t>(d[a]);
        g.has_time = d.size() == 4;
    }
    {
        std::istringstream ls(expect_line(in, "spacing"));
        std::string key;
        ls >> key;
        if (key != "spacing") throw ParseError("expected 'spacing'");
        for (double& s : g.spacing) {
            if (!(ls >> s) || !(s > 0.0) || !std::isfinite(s)) throw ParseError("spacing must be three positive numbers");
        }
        std::string extra;
        if (ls >> extra) throw ParseError("trailing tokens after spacing");
    }
    {
        std::istringstream ls(expect_line(in, "dtype"));
        std::string key, t;
        ls >> key >> t;
        if (key != "dtype") throw ParseError("expected 'dtype'");
        if (t == "u8")
            g.type = VxlType::U8;
        else if (t == "f64")
            g.type = VxlType::F64;
        else
            throw ParseError("dtype must be u8 or f64");
    }
    if (detail::expect_line(in, "data") != "data") throw ParseError("expected 'data'");

    const std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t n = g.total_size();
    const std::size_t width = g.type == VxlType::U8 ? 1 : 8;
    if (payload.size() < n * width)
        throw ParseError("truncated payload: expected " + std::to_string(n * width) + " bytes, got " +
                         std::to_string(payload.size()));
    if (payload.size() > n * width) throw ParseError("payload longer than dims imply");

    g.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (g.type == VxlType::U8) {
            const auto b = static_cast<unsigned char>(payload[i]);
            if (b > 1) throw ParseError("mask values must be 0 or 1");
            g.data[i] = b;
        } else {
            g.data[i] = detail::read_f64_le(payload.data() + 8 * i);
            if (!std::isfinite(g.data[i])) throw ParseError("non-finite value at payload index " + std::to_string(i));
        }
    }
    return g;
}

inline VxlGrid read_vxl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return read_vxl(in);
}

inline void write_vxl(std::ostream& out, const VxlGrid& g) {
    if (g.data.size() != g.total_size()) throw std::invalid_argument("grid data size does not match dims");
    out << "VXL1\n";
    out << "dims " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2];
    if (g.has_time) out << ' ' << g.dims[3];
    out << '\n';
    std::ostringstream sp;
    sp.precision(17);
    sp << "spacing " << g.spacing[0] << ' ' << g.spacing[1] << ' ' << g.spacing[2] << '\n';
    out << sp.str();
    out << "dtype " << (g.type == VxlType::U8 ? "u8" : "f64") << '\n';
    out << "data\n";
    for (double v : g.data) {
        if (g.type == VxlType::U8) {
            out.put(static_cast<char>(v != 0.0 ? 1 : 0));
        } else {
            detail::write_f64_le(out, v);
        }
    }
}

inline void write_vxl(const std::filesystem::path& path, const VxlGrid& g) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_vxl(out, g);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

/// Domain of all nonzero entries of a 3D grid (the first time frame of a 4D grid is not accepted).
inline Domain domain_from_grid(const VxlGrid& g) {
    if (g.has_time && g.dims[3] != 1) throw ParseError("mask must be three-dimensional");
    std::vector<Voxel> voxels;
    for (std::int32_t z = 0; z < g.dims[2]; ++z)
        for (std::int32_t y = 0; y < g.dims[1]; ++y)
            for (std::int32_t x = 0; x < g.dims[0]; ++x)
                if (g.data[g.offset({x, y, z})] != 0.0) voxels.push_back({x, y, z});
    if (voxels.empty()) throw ParseError("mask selects no voxels");
    const int dim = g.dims[2] == 1 && g.spacing[2] == 1.0 ? 2 : 3;
    Domain d(std::move(voxels), g.spacing, {}, dim);
    d.set_grid_dims({g.dims[0], g.dims[1], g.dims[2]});
    return d;
}

inline VxlGrid grid_for(const Domain& d, VxlType type, std::int32_t nt = 1, bool has_time = false) {
    for (const Voxel& v : d.voxels())
        if (v.x < 0 || v.y < 0 || v.z < 0) throw std::invalid_argument("VXL1 output needs non-negative voxel coordinates");
    VxlGrid g;
    g.dims = {d.grid_dims()[0], d.grid_dims()[1], d.grid_dims()[2], nt};
    g.has_time = has_time;
    g.spacing = d.spacing();
    g.type = type;
    g.data.assign(g.total_size(), 0.0);
    return g;
}

inline void save_mask(const std::filesystem::path& path, const Domain& d) {
    VxlGrid g = grid_for(d, VxlType::U8);
    for (const Voxel& v : d.voxels()) g.data[g.offset(v)] = 1.0;
    write_vxl(path, g);
}

/// Values outside the domain are written as zero.
inline void save_volume(const std::filesystem::path& path, const Volume& v) {
    VxlGrid g = grid_for(*v.domain, VxlType::F64);
    for (std::size_t i = 0; i < v.size(); ++i) g.data[g.offset(v.domain->voxel(i))] = v.values[i];
    write_vxl(path, g);
}

inline DomainPtr load_mask(const std::filesystem::path& path) {
    return std::make_shared<const Domain>(domain_from_grid(read_vxl(path)));
}

/// Values of a 3D f64 grid restricted to `domain`; without a domain the full grid is used.
inline Volume volume_from_grid(const VxlGrid& g, DomainPtr domain = nullptr) {
    if (g.type != VxlType::F64) throw ParseError("value volume must have dtype f64");
    if (g.has_time && g.dims[3] != 1) throw ParseError("expected a 3D volume, got a time series");
    if (!domain) {
        Domain full = make_box_domain(g.dims[0], g.dims[1], g.dims[2], g.spacing);
        domain = std::make_shared<const Domain>(std::move(full));
    }
    std::vector<double> values(domain->size());
    for (std::size_t i = 0; i < domain->size(); ++i) {
        const Voxel& v = domain->voxel(i);
        if (v.x >= g.dims[0] || v.y >= g.dims[1] || v.z >= g.dims[2])
            throw StructuralError("domain voxel outside the volume grid");
        values[i] = g.data[g.offset(v)];
    }
    return Volume(std::move(domain), std::move(values));
}

/// Reads either a mask (u8) or a value volume (f64).
inline std::variant<DomainPtr, Volume> load_volume(const std::filesystem::path& path, DomainPtr domain = nullptr) {
    VxlGrid g = read_vxl(path);
    if (g.type == VxlType::U8) return std::make_shared<const Domain>(domain_from_grid(g));
    return volume_from_grid(g, std::move(domain));
}

/// Time series: frames[t][i] is the value of domain voxel i at time t.
struct Series {
    DomainPtr domain;
    std::vector<std::vector<double>> frames;

    std::size_t time_points() const noexcept { return frames.size(); }
};

inline Series load_series(const std::filesystem::path& path, DomainPtr domain) {
    VxlGrid g = read_vxl(path);
    if (g.type != VxlType::F64) throw ParseError("time series must have dtype f64");
    if (!domain) throw std::invalid_argument("series needs a domain");
    Series s{domain, {}};
    s.frames.assign(static_cast<std::size_t>(g.dims[3]), std::vector<double>(domain->size()));
    for (std::int32_t t = 0; t < g.dims[3]; ++t)
        for (std::size_t i = 0; i < domain->size(); ++i) {
            const Voxel& v = domain->voxel(i);
            if (v.x >= g.dims[0] || v.y >= g.dims[1] || v.z >= g.dims[2])
                throw StructuralError("domain voxel outside the series grid");
            s.frames[t][i] = g.data[g.offset(v, t)];
        }
    return s;
}

inline void save_series(const std::filesystem::path& path, const Series& s) {
    VxlGrid g = grid_for(*s.domain, VxlType::F64, static_cast<std::int32_t>(s.frames.size()), true);
    for (std::size_t t = 0; t < s.frames.size(); ++t)
        for (std::size_t i = 0; i < s.domain->size(); ++i)
            g.data[g.offset(s.domain->voxel(i), static_cast<std::int32_t>(t))] = s.frames[t][i];
    write_vxl(path, g);
}

}  // namespace wavelift
