#include <gtest/gtest.h>

#include <bit>
#include <set>

#include "holodsn/core/hvol_io.hpp"
#include "holodsn/core/rng.hpp"
#include "test_util.hpp"

using namespace holodsn;

namespace {

GridSpec full_backprop_grid() { return {512, 512, 100, 0.1725, 0.1725, 5.0}; }

}  // namespace

TEST(WorldCoords, VoxelCenters) {
    const auto g = full_backprop_grid();
    auto p = world_coords({0, 0, 0}, g);
    EXPECT_DOUBLE_EQ(p[0], 0.08625);
    EXPECT_DOUBLE_EQ(p[1], 0.08625);
    EXPECT_DOUBLE_EQ(p[2], 2.5);
    p = world_coords({511, 511, 49}, g);
    EXPECT_NEAR(p[0], 88.23375, 1e-12);
    EXPECT_NEAR(p[1], 88.23375, 1e-12);
    EXPECT_DOUBLE_EQ(p[2], 247.5);
    p = world_coords({0, 0, 0}, GridSpec{4, 4, 4, 1, 1, 1});
    EXPECT_EQ(p, (Vec3{0.5, 0.5, 0.5}));
}

TEST(WorldCoords, OutOfBoundsThrows) {
    const GridSpec g{4, 4, 4, 1, 1, 1};
    EXPECT_THROW(world_coords({4, 0, 0}, g), BoundsError);
    EXPECT_THROW(world_coords({0, 0, 7}, g), BoundsError);
}

TEST(WorldCoords, NearestVoxelInvertsCenters) {
    const GridSpec g{7, 5, 3, 0.3, 0.7, 2.0};
    std::set<std::size_t> seen;
    for (std::size_t n = 0; n < g.size(); ++n) {
        const auto idx = g.unravel(n);
        const auto p = world_coords(idx, g);
        seen.insert(static_cast<std::size_t>(std::llround(p[0] * 1e6)) * 1000003u +
                    static_cast<std::size_t>(std::llround(p[1] * 1e6)) * 101u +
                    static_cast<std::size_t>(std::llround(p[2] * 1e6)));
        auto back = nearest_voxel(p, g);
        ASSERT_TRUE(back.has_value());
        EXPECT_EQ(*back, idx);
        // Any point strictly inside the voxel maps back to it.
        back = nearest_voxel({p[0] + 0.49 * g.dx, p[1] - 0.49 * g.dy, p[2] + 0.3 * g.dz}, g);
        ASSERT_TRUE(back.has_value());
        EXPECT_EQ(*back, idx);
    }
    EXPECT_EQ(seen.size(), g.size());
    EXPECT_FALSE(nearest_voxel({-0.1, 0.1, 0.1}, g).has_value());
}

TEST(GridSpec, RejectsInvalid) {
    EXPECT_THROW((GridSpec{0, 1, 1, 1, 1, 1}.validate()), ShapeError);
    EXPECT_THROW((GridSpec{1, 1, 1, 1, 0, 1}.validate()), ShapeError);
}

TEST(HvolIo, ZeroRealRoundtrip) {
    testutil::TempDir tmp;
    RealVolume v(GridSpec{4, 4, 4, 0.5, 0.5, 2.0}, 0.0);
    write_hvol(tmp / "zero.hvol", v);
    const auto back = read_hvol<double>(tmp / "zero.hvol");
    EXPECT_EQ(back, v);
}

TEST(HvolIo, ComplexRoundtripIsBitExact) {
    testutil::TempDir tmp;
    Rng rng(11);
    ComplexVolume v(GridSpec{8, 8, 8, 0.1725, 0.1725, 5.0});
    for (auto& c : v.data) {
        c = {static_cast<float>(rng.normal()), static_cast<float>(rng.normal())};
    }
    const auto path = tmp / "c.hvol";
    write_hvol(path, v, Sidecar{0.6328, 1.33, {{"seed", 11}}});
    Sidecar meta;
    const auto back = read_hvol<std::complex<double>>(path, &meta);
    ASSERT_EQ(back.grid.nx, 8u);
    EXPECT_EQ(back.grid.dx, 0.1725);
    EXPECT_EQ(back.grid.dz, 5.0);
    for (std::size_t n = 0; n < v.size(); ++n) {
        EXPECT_EQ(std::bit_cast<std::uint64_t>(back.data[n].real()), std::bit_cast<std::uint64_t>(v.data[n].real()));
        EXPECT_EQ(std::bit_cast<std::uint64_t>(back.data[n].imag()), std::bit_cast<std::uint64_t>(v.data[n].imag()));
    }
    EXPECT_EQ(*meta.wavelength, 0.6328);
    EXPECT_EQ(*meta.n_medium, 1.33);
    EXPECT_EQ(meta.provenance["seed"], 11);
    // Bytes are stable across a second write.
    write_hvol(tmp / "c2.hvol", back);
    EXPECT_EQ(read_bytes(path), read_bytes(tmp / "c2.hvol"));
}

TEST(HvolIo, BinaryRoundtrip) {
    BinaryVolume v(GridSpec{3, 2, 5, 1, 1, 1}, 0);
    for (std::size_t n = 0; n < v.size(); n += 3) v.data[n] = 1;
    EXPECT_EQ(decode_hvol<std::uint8_t>(encode_hvol(v)).data, v.data);
}

TEST(HvolIo, HeaderLayout) {
    RealVolume v(GridSpec{2, 3, 4, 1, 1, 1}, 1.0);
    const auto bytes = encode_hvol(v);
    ASSERT_EQ(bytes.size(), 18u + 24u * 4u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HVOL");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[5], 1);
    EXPECT_EQ(bytes[6], 2);
    EXPECT_EQ(bytes[10], 3);
    EXPECT_EQ(bytes[14], 4);
}

TEST(HvolIo, CorruptInputsRaiseFormatError) {
    RealVolume v(GridSpec{4, 4, 4, 1, 1, 1}, 2.0);
    auto bytes = encode_hvol(v);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    EXPECT_THROW(decode_hvol<double>(truncated), FormatError);
    truncated.resize(10);
    EXPECT_THROW(decode_hvol<double>(truncated), FormatError);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_hvol<double>(bad_magic), FormatError);
    auto bad_dims = bytes;
    bad_dims[6] = 5;
    EXPECT_THROW(decode_hvol<double>(bad_dims), FormatError);
    EXPECT_THROW(decode_hvol<std::complex<double>>(bytes), FormatError);
    EXPECT_THROW(decode_hvol<std::uint8_t>(bytes), FormatError);
}

TEST(HvolIo, MissingFile) {
    testutil::TempDir tmp;
    EXPECT_THROW(read_hvol<double>(tmp / "nope.hvol"), MissingInputError);
}

TEST(HvolIo, HologramMetadataRoundtrip) {
    testutil::TempDir tmp;
    Hologram h;
    h.intensity = RealVolume(GridSpec{4, 4, 1, 0.25, 0.25, 1.0}, 1.0);
    h.wavelength = 0.5;
    h.n_medium = 1.4;
    write_hologram(tmp / "h.hvol", h);
    const auto back = read_hologram(tmp / "h.hvol");
    EXPECT_EQ(back.wavelength, 0.5);
    EXPECT_EQ(back.n_medium, 1.4);
    EXPECT_EQ(back.intensity, h.intensity);
}

TEST(Rng, Deterministic) {
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
    Rng c(5);
    double s = 0;
    for (int i = 0; i < 20000; ++i) s += c.uniform();
    EXPECT_NEAR(s / 20000, 0.5, 0.01);
}
