#pragma once

#include <string>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"

namespace holodsn {

/// Lateral crop window; all axial slices are kept.
struct PatchWindow {
    std::size_t x0 = 0;
    std::size_t y0 = 0;
    std::size_t size = 0;
    friend bool operator==(const PatchWindow&, const PatchWindow&) = default;
};

/// Raster-order (y outer, x inner) square windows with stride = patch − overlap.
inline std::vector<PatchWindow> crop_patches(std::size_t nx, std::size_t ny, std::size_t patch,
                                             std::size_t overlap) {
    if (patch == 0 || patch > nx || patch > ny) throw GeometryError("patch larger than the volume");
    if (overlap >= patch) throw GeometryError("overlap must be smaller than the patch");
    const std::size_t stride = patch - overlap;
    if ((nx - patch) % stride != 0 || (ny - patch) % stride != 0) {
        throw GeometryError("(size - patch) = " + std::to_string(nx - patch) +
                            " is not divisible by stride " + std::to_string(stride));
    }
    std::vector<PatchWindow> out;
    for (std::size_t y = 0; y + patch <= ny; y += stride) {
        for (std::size_t x = 0; x + patch <= nx; x += stride) out.push_back({x, y, patch});
    }
    return out;
}

template <typename T>
Volume<T> crop(const Volume<T>& v, const PatchWindow& w) {
    if (w.x0 + w.size > v.grid.nx || w.y0 + w.size > v.grid.ny) throw GeometryError("window outside volume");
    GridSpec g = v.grid;
    g.nx = w.size;
    g.ny = w.size;
    Volume<T> out(g);
    for (std::size_t k = 0; k < g.nz; ++k) {
        for (std::size_t j = 0; j < w.size; ++j) {
            for (std::size_t i = 0; i < w.size; ++i) out.at(i, j, k) = v.at(w.x0 + i, w.y0 + j, k);
        }
    }
    return out;
}

/// Windows at every stride offset, wrapping past the far edge; covers each lateral
/// position exactly patch/stride times per axis. For FFT-periodic volumes.
inline std::vector<PatchWindow> periodic_patches(std::size_t nx, std::size_t ny, std::size_t patch,
                                                 std::size_t overlap) {
    if (patch == 0 || patch > nx || patch > ny) throw GeometryError("patch larger than the volume");
    if (overlap >= patch) throw GeometryError("overlap must be smaller than the patch");
    const std::size_t stride = patch - overlap;
    if (nx % stride != 0 || ny % stride != 0) throw GeometryError("volume size not divisible by stride");
    std::vector<PatchWindow> out;
    for (std::size_t y = 0; y < ny; y += stride) {
        for (std::size_t x = 0; x < nx; x += stride) out.push_back({x, y, patch});
    }
    return out;
}

template <typename T>
Volume<T> crop_periodic(const Volume<T>& v, const PatchWindow& w) {
    if (w.size > v.grid.nx || w.size > v.grid.ny) throw GeometryError("window larger than volume");
    GridSpec g = v.grid;
    g.nx = w.size;
    g.ny = w.size;
    Volume<T> out(g);
    for (std::size_t k = 0; k < g.nz; ++k) {
        for (std::size_t j = 0; j < w.size; ++j) {
            for (std::size_t i = 0; i < w.size; ++i)
                out.at(i, j, k) = v.at((w.x0 + i) % v.grid.nx, (w.y0 + j) % v.grid.ny, k);
        }
    }
    return out;
}

/// Separable tent weight for blending overlapping patch outputs; peaks at the centre,
/// (i + 0.5) / (size / 2) at the edges so no position gets zero weight.
inline double tent_weight(std::size_t i, std::size_t size) {
    const double h = 0.5 * static_cast<double>(size);
    const double t = static_cast<double>(i) + 0.5;
    return (t < h ? t : static_cast<double>(size) - t) / h;
}

/// Writes `patch` into `dst` at window `w` (inverse of crop).
template <typename T>
void paste(Volume<T>& dst, const Volume<T>& patch, const PatchWindow& w) {
    if (patch.grid.nx != w.size || patch.grid.ny != w.size || patch.grid.nz != dst.grid.nz ||
        w.x0 + w.size > dst.grid.nx || w.y0 + w.size > dst.grid.ny) {
        throw GeometryError("patch does not fit destination window");
    }
    for (std::size_t k = 0; k < dst.grid.nz; ++k) {
        for (std::size_t j = 0; j < w.size; ++j) {
            for (std::size_t i = 0; i < w.size; ++i) dst.at(w.x0 + i, w.y0 + j, k) = patch.at(i, j, k);
        }
    }
}

template <typename T>
Volume<T> stitch(const std::vector<Volume<T>>& patches, const std::vector<PatchWindow>& windows,
                 const GridSpec& full) {
    if (patches.size() != windows.size()) throw GeometryError("patch/window count mismatch");
    Volume<T> out(full);
    for (std::size_t n = 0; n < patches.size(); ++n) paste(out, patches[n], windows[n]);
    return out;
}

}  // namespace holodsn
