#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include <wavelift/voxel_domain.hpp>
#include <wavelift/vxl_io.hpp>

#include "test_support.hpp"

namespace wl = wavelift;
using wl::testing::temp_path;

namespace {

std::string mask_file(int nx, int ny, int nz, const std::vector<unsigned char>& payload) {
    std::ostringstream s;
    s << "VXL1\ndims " << nx << ' ' << ny << ' ' << nz << "\nspacing 1 1 1\ndtype u8\ndata\n";
    for (unsigned char c : payload) s.put(static_cast<char>(c));
    return s.str();
}

}  // namespace

TEST(Neighbors, FaceAdjacencyExamples) {
    EXPECT_TRUE(wl::are_neighbors({0, 0, 0}, {1, 0, 0}));
    EXPECT_FALSE(wl::are_neighbors({0, 0, 0}, {1, 1, 0}));
    EXPECT_FALSE(wl::are_neighbors({2, 3, 0}, {2, 3, 0}));
    EXPECT_TRUE(wl::are_neighbors({2, 3, 4}, {2, 3, 5}));
}

TEST(Neighbors, SymmetricAndIrreflexive) {
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> c(-3, 3);
    for (int trial = 0; trial < 2000; ++trial) {
        wl::Voxel a{c(rng), c(rng), c(rng)}, b{c(rng), c(rng), c(rng)};
        EXPECT_EQ(wl::are_neighbors(a, b), wl::are_neighbors(b, a));
        EXPECT_FALSE(wl::are_neighbors(a, a));
    }
}

TEST(Domain, GraphMatchesPairwiseRelation) {
    auto d = wl::testing::random_blob(300, 3, 11);
    for (std::size_t i = 0; i < d->size(); ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < d->size(); ++j) {
            const bool adj = wl::are_neighbors(d->voxel(i), d->voxel(j));
            count += adj;
            if (adj) {
                auto nb = d->neighbors(i);
                EXPECT_TRUE(std::find(nb.begin(), nb.end(), j) != nb.end());
            }
        }
        EXPECT_EQ(count, d->neighbors(i).size());
    }
}

TEST(Domain, OrderingIsZThenYThenX) {
    wl::Domain d({{1, 0, 1}, {0, 1, 0}, {1, 0, 0}, {0, 0, 1}}, {1, 1, 1}, {}, 3);
    ASSERT_EQ(d.size(), 4u);
    EXPECT_EQ(d.voxel(0), (wl::Voxel{1, 0, 0}));
    EXPECT_EQ(d.voxel(1), (wl::Voxel{0, 1, 0}));
    EXPECT_EQ(d.voxel(2), (wl::Voxel{0, 0, 1}));
    EXPECT_EQ(d.voxel(3), (wl::Voxel{1, 0, 1}));
}

TEST(Domain, RejectsInvalidInput) {
    EXPECT_THROW(wl::Domain({}, {1, 1, 1}), std::invalid_argument);
    EXPECT_THROW(wl::Domain({{0, 0, 0}, {0, 0, 0}}), std::invalid_argument);
    EXPECT_THROW(wl::Domain({{0, 0, 0}}, {1, 1, 1}, {0.0}), std::invalid_argument);
    EXPECT_THROW(wl::Domain({{0, 0, 1}}, {1, 1, 1}, {}, 2), std::invalid_argument);
    EXPECT_THROW(wl::Domain({{0, 0, 0}}, {1, -1, 1}), std::invalid_argument);
}

TEST(Domain, TotalMeasureIsSumOfVoxelMeasures) {
    auto d = wl::testing::random_blob(200, 2, 5, 64, true);
    double s = 0.0;
    for (std::size_t i = 0; i < d->size(); ++i) s += d->measure(i);
    EXPECT_DOUBLE_EQ(d->total_measure(), s);
    const wl::Domain unit = d->with_measure({});
    EXPECT_DOUBLE_EQ(unit.total_measure(), static_cast<double>(d->size()));
}

TEST(Domain, MeasureFollowsVoxelsThroughSorting) {
    wl::Domain d({{1, 0, 0}, {0, 0, 0}}, {1, 1, 1}, {3.0, 5.0});
    EXPECT_EQ(d.voxel(0), (wl::Voxel{0, 0, 0}));
    EXPECT_DOUBLE_EQ(d.measure(0), 5.0);
    EXPECT_DOUBLE_EQ(d.measure(1), 3.0);
}

TEST(VxlIo, FullMaskGivesAllVoxels) {
    std::istringstream in(mask_file(2, 2, 1, {1, 1, 1, 1}));
    const wl::Domain d = wl::domain_from_grid(wl::read_vxl(in));
    EXPECT_EQ(d.size(), 4u);
    EXPECT_EQ(d.dim(), 2);
}

TEST(VxlIo, DiagonalMaskGivesTwoSeparateVoxels) {
    std::istringstream in(mask_file(2, 2, 1, {1, 0, 0, 1}));
    const wl::Domain d = wl::domain_from_grid(wl::read_vxl(in));
    ASSERT_EQ(d.size(), 2u);
    EXPECT_FALSE(wl::are_neighbors(d.voxel(0), d.voxel(1)));
    EXPECT_TRUE(d.neighbors(0).empty());
}

TEST(VxlIo, TruncatedPayloadIsRejected) {
    std::istringstream in(mask_file(2, 2, 1, {1, 1, 1}));
    EXPECT_THROW(wl::read_vxl(in), wl::ParseError);
}

TEST(VxlIo, MalformedHeadersAreRejected) {
    for (const char* text : {"VXL2\n", "VXL1\ndims 2 2\n", "VXL1\ndims 2 2 1\nspacing 1 0 1\n",
                             "VXL1\ndims 1 1 1\nspacing 1 1 1\ndtype i32\ndata\n",
                             "VXL1\ndims 1 1 1\nspacing 1 1 1\ndtype u8\nbody\n"}) {
        std::istringstream in(text);
        EXPECT_THROW(wl::read_vxl(in), wl::ParseError) << text;
    }
}

TEST(VxlIo, NonFiniteValuesAreRejected) {
    std::ostringstream s;
    s << "VXL1\ndims 1 1 1\nspacing 1 1 1\ndtype f64\ndata\n";
    wl::detail::write_f64_le(s, std::nan(""));
    std::istringstream in(s.str());
    EXPECT_THROW(wl::read_vxl(in), wl::ParseError);
}

TEST(VxlIo, PayloadIsLittleEndianXFastest) {
    wl::VxlGrid g;
    g.dims = {2, 1, 1, 1};
    g.data = {1.0, -2.5};
    std::ostringstream out;
    wl::write_vxl(out, g);
    const std::string text = out.str();
    const std::string header = "VXL1\ndims 2 1 1\nspacing 1 1 1\ndtype f64\ndata\n";
    ASSERT_EQ(text.substr(0, header.size()), header);
    ASSERT_EQ(text.size(), header.size() + 16);
    // 1.0 = 0x3FF0000000000000 little-endian
    EXPECT_EQ(static_cast<unsigned char>(text[header.size() + 7]), 0x3F);
    EXPECT_EQ(static_cast<unsigned char>(text[header.size() + 6]), 0xF0);
    EXPECT_EQ(wl::detail::read_f64_le(text.data() + header.size() + 8), -2.5);
}

TEST(VxlIo, VolumeRoundTripIsBitExact) {
    auto d = wl::testing::random_blob(400, 3, 21, 16);
    const wl::Volume v(d, wl::testing::random_values(d->size(), 4, 1e3));
    const auto path = temp_path("roundtrip.vxl");
    wl::save_volume(path, v);
    const wl::Volume back = wl::volume_from_grid(wl::read_vxl(path), d);
    ASSERT_EQ(back.size(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(std::bit_cast<std::uint64_t>(back.values[i]),
                                                         std::bit_cast<std::uint64_t>(v.values[i]));

    const auto mpath = temp_path("roundtrip_mask.vxl");
    wl::save_mask(mpath, *d);
    const auto loaded = wl::load_mask(mpath);
    EXPECT_TRUE(*loaded == *d);
}

TEST(VxlIo, FullGridVolumeRoundTripWithoutMask) {
    auto box = std::make_shared<const wl::Domain>(wl::make_box_domain(3, 4, 2, {0.5, 0.25, 2.0}));
    const wl::Volume v(box, wl::testing::random_values(box->size(), 9));
    const auto path = temp_path("box.vxl");
    wl::save_volume(path, v);
    auto loaded = wl::load_volume(path);
    ASSERT_TRUE(std::holds_alternative<wl::Volume>(loaded));
    const auto& back = std::get<wl::Volume>(loaded);
    EXPECT_TRUE(*back.domain == *box);
    EXPECT_EQ(back.values, v.values);
}

TEST(VxlIo, SeriesRoundTrip) {
    auto d = wl::testing::random_blob(50, 2, 8, 12);
    wl::Series s{d, {}};
    for (int t = 0; t < 5; ++t) s.frames.push_back(wl::testing::random_values(d->size(), 100 + t));
    const auto path = temp_path("series.vxl");
    wl::save_series(path, s);
    const wl::Series back = wl::load_series(path, d);
    EXPECT_EQ(back.frames, s.frames);
}

TEST(RingDomain, FullDiscFromDegenerateAnnulus) {
    const std::vector<wl::Annulus> rings{{0.0, 100.0}};
    const wl::Domain d = wl::make_ring_domain(rings, 16);
    EXPECT_EQ(d.size(), 256u);
    const std::vector<wl::Annulus> disc{{0.0, 5.0}};
    const wl::Domain small = wl::make_ring_domain(disc, 16);
    std::size_t expected = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) expected += std::hypot(x - 7.5, y - 7.5) < 5.0;
    EXPECT_EQ(small.size(), expected);
}

TEST(RingDomain, ErrorsOnEmptyOrOverlappingAnnuli) {
    EXPECT_THROW(wl::make_ring_domain(std::vector<wl::Annulus>{}, 16), std::invalid_argument);
    const std::vector<wl::Annulus> overlap{{2.0, 5.0}, {4.0, 7.0}};
    EXPECT_THROW(wl::make_ring_domain(overlap, 16), std::invalid_argument);
}

TEST(RingDomain, ThinRingsMatchDirectMembershipCount) {
    const std::vector<wl::Annulus> rings{{10.0, 12.0}, {20.0, 21.5}};
    const wl::Domain d = wl::make_ring_domain(rings, 64);
    // Independent oracle: count pixel centers inside either annulus.
    std::size_t count = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const double r = std::sqrt((x - 31.5) * (x - 31.5) + (y - 31.5) * (y - 31.5));
            if ((r >= 10.0 && r < 12.0) || (r >= 20.0 && r < 21.5)) ++count;
        }
    EXPECT_EQ(d.size(), count);
    const auto [labels, components] = wl::connected_components(d);
    EXPECT_EQ(components, 2u);
}
