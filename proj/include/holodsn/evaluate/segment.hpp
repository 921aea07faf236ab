#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "holodsn/core/grid.hpp"
#include "holodsn/evaluate/otsu.hpp"

namespace holodsn {

inline constexpr std::size_t kMinClusterVoxels = 10;

struct SegmentOptions {
    OtsuRange range{};
    std::size_t min_voxels = kMinClusterVoxels;
};

/// Sorted linear voxel indices of one connected component.
struct Cluster {
    std::vector<std::size_t> voxels;
};

/// Slice-wise Otsu foreground mask.
inline BinaryVolume otsu_mask(const RealVolume& prob, const OtsuRange& range = {}) {
    BinaryVolume mask(prob.grid, 0);
    const std::size_t plane = prob.grid.slice_size();
    for (std::size_t k = 0; k < prob.grid.nz; ++k) {
        const std::span<const double> s(prob.data.data() + k * plane, plane);
        const auto t = otsu_threshold(s, range);
        for (std::size_t n = 0; n < plane; ++n) mask.data[k * plane + n] = t.foreground(s[n]) ? 1 : 0;
    }
    return mask;
}

/// 26-connected components of a binary mask, keeping those with at least
/// `min_voxels` voxels. Components are ordered by their smallest voxel index.
inline std::vector<Cluster> connected_components(const BinaryVolume& mask, std::size_t min_voxels) {
    const auto& g = mask.grid;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<Cluster> out;
    std::vector<std::size_t> stack;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask.data[start] || seen[start]) continue;
        Cluster c;
        stack.assign(1, start);
        seen[start] = 1;
        while (!stack.empty()) {
            const std::size_t cur = stack.back();
            stack.pop_back();
            c.voxels.push_back(cur);
            const auto [i, j, k] = g.unravel(cur);
            for (int dk = -1; dk <= 1; ++dk) {
                if ((dk < 0 && k == 0) || (dk > 0 && k + 1 == g.nz)) continue;
                for (int dj = -1; dj <= 1; ++dj) {
                    if ((dj < 0 && j == 0) || (dj > 0 && j + 1 == g.ny)) continue;
                    for (int di = -1; di <= 1; ++di) {
                        if ((di < 0 && i == 0) || (di > 0 && i + 1 == g.nx)) continue;
                        const std::size_t nb = g.linear(i + di, j + dj, k + dk);
                        if (mask.data[nb] && !seen[nb]) {
                            seen[nb] = 1;
                            stack.push_back(nb);
                        }
                    }
                }
            }
        }
        if (c.voxels.size() < min_voxels) continue;
        std::sort(c.voxels.begin(), c.voxels.end());
        out.push_back(std::move(c));
    }
    return out;
}

/// Per-slice Otsu binarization, 26-connected components, size filter.
inline std::vector<Cluster> segment_volume(const RealVolume& prob, const SegmentOptions& opt = {}) {
    return connected_components(otsu_mask(prob, opt.range), opt.min_voxels);
}

}  // namespace holodsn
