#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "holodsn/fieldgen/voxelize.hpp"
#include "test_util.hpp"

using namespace holodsn;

namespace {

ParticleField single(double x, double y, double z, Vec3 dims, double d = 1.0, double dn = 0.26) {
    ParticleField f;
    f.dims = dims;
    f.particles.push_back({x, y, z, d, dn});
    return f;
}

}  // namespace

TEST(SampleParticles, ReferenceDensitiesGiveExpectedCounts) {
    const Vec3 dims{176.64, 176.64, 500.0};
    EXPECT_EQ(expected_count(1.6e4, dims), 250u);
    EXPECT_EQ(expected_count(12.82e4, dims), 2000u);
    SamplingParams p;
    p.dims = dims;
    p.density = 1.6e4;
    p.seed = 3;
    EXPECT_EQ(sample_particles(p).particles.size(), 250u);
}

TEST(SampleParticles, MinDistanceAndContainment) {
    SamplingParams p;
    p.density = 12.82e4;
    p.seed = 9;
    const auto f = sample_particles(p);
    ASSERT_EQ(f.particles.size(), 2000u);
    const auto& ps = f.particles;
    for (std::size_t a = 0; a < ps.size(); ++a) {
        const double r = ps[a].radius();
        EXPECT_GE(ps[a].x, r);
        EXPECT_LE(ps[a].x, p.dims[0] - r);
        EXPECT_GE(ps[a].z, r);
        EXPECT_LE(ps[a].z, p.dims[2] - r);
        for (std::size_t b = a + 1; b < ps.size(); ++b) {
            const double d = std::hypot(ps[a].x - ps[b].x, ps[a].y - ps[b].y, ps[a].z - ps[b].z);
            ASSERT_GE(d, p.min_dist);
        }
    }
}

TEST(SampleParticles, SameSeedIdentical) {
    SamplingParams p;
    p.seed = 42;
    const auto a = sample_particles(p), b = sample_particles(p);
    ASSERT_EQ(a.particles.size(), b.particles.size());
    for (std::size_t n = 0; n < a.particles.size(); ++n) {
        EXPECT_EQ(a.particles[n].x, b.particles[n].x);
        EXPECT_EQ(a.particles[n].z, b.particles[n].z);
    }
    p.seed = 43;
    EXPECT_NE(sample_particles(p).particles[0].x, a.particles[0].x);
}

TEST(SampleParticles, InfeasiblePackingThrows) {
    SamplingParams p;
    p.dims = {10, 10, 10};
    p.density = 5e9;  // 5000 particles in 1000 µm³ with 2 µm spacing
    p.attempts_per_particle = 10;
    EXPECT_THROW(sample_particles(p), PackingError);
}

TEST(FieldJsonl, RoundtripAndByteIdentical) {
    testutil::TempDir tmp;
    SamplingParams p;
    p.density = 5e4;
    p.dims = {40, 40, 100};
    p.seed = 7;
    const auto f = sample_particles(p);
    write_field_jsonl(tmp / "a.jsonl", f);
    write_field_jsonl(tmp / "b.jsonl", sample_particles(p));
    EXPECT_EQ(read_bytes(tmp / "a.jsonl"), read_bytes(tmp / "b.jsonl"));
    const auto back = read_field_jsonl(tmp / "a.jsonl");
    ASSERT_EQ(back.particles.size(), f.particles.size());
    EXPECT_EQ(back.particles[0].x, f.particles[0].x);
    EXPECT_EQ(back.particles[0].index_contrast, 0.26);
    EXPECT_EQ(back.seed, 7u);
}

TEST(Voxelize, EmptyFieldIsZero) {
    ParticleField f;
    f.dims = {4, 4, 4};
    const auto v = voxelize(f, GridSpec{8, 8, 8, 0.5, 0.5, 0.5});
    for (double x : v.data) EXPECT_EQ(x, 0.0);
}

TEST(Voxelize, SingleParticleVoxelCountMatchesBruteForce) {
    const GridSpec g{40, 40, 40, 0.1725, 0.1725, 0.1184};
    const auto ext = g.extent();
    const auto f = single(3.41, 3.37, 2.33, ext);
    const auto v = voxelize(f, g);
    std::size_t count = 0, brute = 0;
    for (std::size_t n = 0; n < v.size(); ++n) {
        if (v.data[n] != 0.0) {
            EXPECT_EQ(v.data[n], 0.26);
            ++count;
        }
        const auto c = world_coords(g.unravel(n), g);
        if (std::hypot(c[0] - 3.41, c[1] - 3.37, c[2] - 2.33) <= 0.5) ++brute;
    }
    EXPECT_EQ(count, brute);
    const double expected = 4.0 / 3.0 * std::numbers::pi * 0.125 / (0.1725 * 0.1725 * 0.1184);
    EXPECT_NEAR(static_cast<double>(count), expected, 0.1 * expected);
}

TEST(Voxelize, ShiftByOnePitchShiftsFootprint) {
    const GridSpec g{24, 24, 24, 0.25, 0.25, 0.25};
    const auto a = voxelize(single(2.9, 3.1, 3.0, g.extent()), g);
    const auto b = voxelize(single(2.9 + 0.25, 3.1, 3.0 + 0.25, g.extent()), g);
    for (std::size_t k = 1; k < g.nz; ++k) {
        for (std::size_t j = 0; j < g.ny; ++j) {
            for (std::size_t i = 1; i < g.nx; ++i) EXPECT_EQ(b.at(i, j, k), a.at(i - 1, j, k - 1));
        }
    }
}

TEST(GroundTruth, NearestSliceBinning) {
    // Fine axial pitch 0.1184 µm over 500 µm, coarse 5 µm: particle at 250 µm
    // lands in coarse slices 49 and 50 only.
    const GridSpec fine{32, 32, 4223, 0.1725, 0.1725, 0.1184};
    const GridSpec coarse{32, 32, 100, 0.1725, 0.1725, 5.0};
    const auto f = single(2.76, 2.76, 250.0, {5.52, 5.52, 500.0});
    const auto gt = make_ground_truth(f, fine, coarse);
    std::vector<std::size_t> per_slice(coarse.nz, 0);
    for (std::size_t n = 0; n < gt.size(); ++n) {
        if (gt.data[n]) ++per_slice[coarse.unravel(n).k];
    }
    // Brute force: every fine voxel center inside the sphere, projected to floor(z/5).
    std::vector<std::set<std::size_t>> brute(coarse.nz);
    for (std::size_t k = 0; k < fine.nz; ++k) {
        const double z = (k + 0.5) * fine.dz;
        for (std::size_t j = 0; j < fine.ny; ++j) {
            for (std::size_t i = 0; i < fine.nx; ++i) {
                const double x = (i + 0.5) * fine.dx, y = (j + 0.5) * fine.dy;
                if (std::hypot(x - 2.76, y - 2.76, z - 250.0) <= 0.5) {
                    brute[static_cast<std::size_t>(z / 5.0)].insert(j * fine.nx + i);
                }
            }
        }
    }
    for (std::size_t k = 0; k < coarse.nz; ++k) {
        EXPECT_EQ(per_slice[k], brute[k].size()) << "slice " << k;
        if (k != 49 && k != 50) EXPECT_EQ(per_slice[k], 0u);
    }
    EXPECT_GT(per_slice[49] + per_slice[50], 0u);
    // In-plane cluster size of the merged projection is near the geometric cross-section.
    const std::size_t merged = std::max(per_slice[49], per_slice[50]);
    EXPECT_GE(merged, 20u);
    EXPECT_LE(merged, 27u);
}

TEST(GroundTruth, EmptyFieldAndGeometryMismatch) {
    ParticleField f;
    f.dims = {4, 4, 10};
    const GridSpec fine{8, 8, 20, 0.5, 0.5, 0.5}, coarse{8, 8, 2, 0.5, 0.5, 5.0};
    const auto gt = make_ground_truth(f, fine, coarse);
    for (auto b : gt.data) EXPECT_EQ(b, 0);
    EXPECT_THROW(make_ground_truth(f, fine, GridSpec{4, 8, 2, 0.5, 0.5, 5.0}), GeometryError);
}

TEST(GroundTruth, MonotoneInParticleCount) {
    SamplingParams p;
    p.density = 2e5;
    p.dims = {16, 16, 40};
    p.seed = 2;
    auto f = sample_particles(p);
    const GridSpec fine{64, 64, 160, 0.25, 0.25, 0.25}, coarse{64, 64, 8, 0.25, 0.25, 5.0};
    std::size_t prev = 0;
    ParticleField nested;
    nested.dims = f.dims;
    for (const auto& q : f.particles) {
        nested.particles.push_back(q);
        const auto gt = make_ground_truth(nested, fine, coarse);
        const auto n = static_cast<std::size_t>(std::count(gt.data.begin(), gt.data.end(), 1));
        EXPECT_GE(n, prev);
        prev = n;
    }
}
