#pragma once

#include <vector>

#include "holodsn/core/grid.hpp"
#include "holodsn/evaluate/segment.hpp"
#include "holodsn/fieldgen/particles.hpp"

namespace holodsn {

enum class CentroidSource { Prediction, GroundTruth };

struct Centroid {
    Vec3 position{};  ///< µm
    std::size_t voxels = 0;
    CentroidSource source = CentroidSource::Prediction;
};

/// Unweighted mean of the member voxel centers.
inline std::vector<Centroid> extract_centroids(const std::vector<Cluster>& clusters, const GridSpec& grid) {
    std::vector<Centroid> out;
    out.reserve(clusters.size());
    for (const auto& c : clusters) {
        Vec3 sum{0.0, 0.0, 0.0};
        for (auto v : c.voxels) {
            const auto p = world_coords(grid.unravel(v), grid);
            for (int a = 0; a < 3; ++a) sum[a] += p[a];
        }
        const double n = static_cast<double>(c.voxels.size());
        out.push_back({{sum[0] / n, sum[1] / n, sum[2] / n}, c.voxels.size(), CentroidSource::Prediction});
    }
    return out;
}

/// Ground-truth centroids straight from the particle centers.
inline std::vector<Centroid> particle_centroids(const ParticleField& field) {
    std::vector<Centroid> out;
    out.reserve(field.particles.size());
    for (const auto& p : field.particles) out.push_back({{p.x, p.y, p.z}, 0, CentroidSource::GroundTruth});
    return out;
}

}  // namespace holodsn
