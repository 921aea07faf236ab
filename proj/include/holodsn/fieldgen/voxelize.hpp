#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"
#include "holodsn/fieldgen/particles.hpp"

namespace holodsn {

namespace detail {

/// Inclusive index range covering voxel centers within [lo, hi] along one axis,
/// padded by one voxel on each side; callers apply the exact membership test.
inline bool center_range(double lo, double hi, double pitch, std::size_t n, std::size_t& first,
                         std::size_t& last) {
    const double a = std::ceil(lo / pitch - 0.5) - 1.0;
    const double b = std::floor(hi / pitch - 0.5) + 1.0;
    if (b < 0.0 || a > static_cast<double>(n) - 1.0 || a > b) return false;
    first = static_cast<std::size_t>(std::max(0.0, a));
    last = static_cast<std::size_t>(std::min(static_cast<double>(n) - 1.0, b));
    return true;
}

inline void check_coverage(const ParticleField& field, const GridSpec& grid) {
    grid.validate();
    const auto ext = grid.extent();
    const double pitch[3] = {grid.dx, grid.dy, grid.dz};
    for (int a = 0; a < 3; ++a) {
        if (field.dims[a] > 0.0 && ext[a] < field.dims[a] - pitch[a]) {
            throw GeometryError("grid does not cover the particle volume");
        }
    }
}

}  // namespace detail

/// Fills slice k of the Δn volume: a voxel takes the Δn of the particle whose
/// center lies within D/2 of the voxel center. Returns false when the slice is empty.
inline bool voxelize_slice(const ParticleField& field, const GridSpec& grid, std::size_t k,
                           std::span<double> out) {
    std::fill(out.begin(), out.end(), 0.0);
    const double zc = (static_cast<double>(k) + 0.5) * grid.dz;
    bool any = false;
    for (const auto& p : field.particles) {
        const double r = p.radius();
        const double dz = zc - p.z;
        const double rr = r * r - dz * dz;
        if (rr < 0.0) continue;
        const double rxy = std::sqrt(rr);
        std::size_t i0, i1, j0, j1;
        if (!detail::center_range(p.x - rxy, p.x + rxy, grid.dx, grid.nx, i0, i1)) continue;
        if (!detail::center_range(p.y - rxy, p.y + rxy, grid.dy, grid.ny, j0, j1)) continue;
        for (std::size_t j = j0; j <= j1; ++j) {
            const double y = (static_cast<double>(j) + 0.5) * grid.dy - p.y;
            for (std::size_t i = i0; i <= i1; ++i) {
                const double x = (static_cast<double>(i) + 0.5) * grid.dx - p.x;
                if (x * x + y * y + dz * dz <= r * r) {
                    out[j * grid.nx + i] = p.index_contrast;
                    any = true;
                }
            }
        }
    }
    return any;
}

inline RIVolume voxelize(const ParticleField& field, const GridSpec& grid) {
    detail::check_coverage(field, grid);
    RIVolume vol(grid);
    const std::size_t plane = grid.slice_size();
    for (std::size_t k = 0; k < grid.nz; ++k) {
        voxelize_slice(field, grid, k, std::span<double>(vol.data.data() + k * plane, plane));
    }
    return vol;
}

/// Axially binned binary labels: each fine slice is projected to the coarse slice
/// whose center is nearest, and a coarse voxel is set when any fine voxel mapped to
/// it lies inside a particle.
inline BinaryVolume make_ground_truth(const ParticleField& field, const GridSpec& fine,
                                      const GridSpec& coarse) {
    detail::check_coverage(field, fine);
    coarse.validate();
    if (fine.nx != coarse.nx || fine.ny != coarse.ny || fine.dx != coarse.dx || fine.dy != coarse.dy) {
        throw GeometryError("ground-truth grid must share lateral dims with the fine grid");
    }
    BinaryVolume gt(coarse, 0);
    for (const auto& p : field.particles) {
        const double r = p.radius();
        std::size_t k0, k1;
        if (!detail::center_range(p.z - r, p.z + r, fine.dz, fine.nz, k0, k1)) continue;
        for (std::size_t k = k0; k <= k1; ++k) {
            const double zf = (static_cast<double>(k) + 0.5) * fine.dz;
            const double dz = zf - p.z;
            const double rr = r * r - dz * dz;
            if (rr < 0.0) continue;
            const double rxy = std::sqrt(rr);
            const auto kc = std::min<std::size_t>(
                coarse.nz - 1, static_cast<std::size_t>(std::max(0.0, std::floor(zf / coarse.dz))));
            std::size_t i0, i1, j0, j1;
            if (!detail::center_range(p.x - rxy, p.x + rxy, fine.dx, fine.nx, i0, i1)) continue;
            if (!detail::center_range(p.y - rxy, p.y + rxy, fine.dy, fine.ny, j0, j1)) continue;
            for (std::size_t j = j0; j <= j1; ++j) {
                const double y = (static_cast<double>(j) + 0.5) * fine.dy - p.y;
                for (std::size_t i = i0; i <= i1; ++i) {
                    const double x = (static_cast<double>(i) + 0.5) * fine.dx - p.x;
                    if (x * x + y * y + dz * dz <= r * r) gt.at(i, j, kc) = 1;
                }
            }
        }
    }
    return gt;
}

}  // namespace holodsn
