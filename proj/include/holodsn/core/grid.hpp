#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "holodsn/core/errors.hpp"

namespace holodsn {

using Vec3 = std::array<double, 3>;

struct Index3 {
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t k = 0;
    friend bool operator==(const Index3&, const Index3&) = default;
};

/// Regular voxel grid. Voxel (i, j, k) is centered at ((i+0.5)dx, (j+0.5)dy, (k+0.5)dz) µm.
/// Storage order is x fastest, then y, then z.
struct GridSpec {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::size_t nz = 1;
    double dx = 1.0;
    double dy = 1.0;
    double dz = 1.0;

    void validate() const {
        if (nx < 1 || ny < 1 || nz < 1) {
            throw ShapeError("grid voxel counts must be >= 1");
        }
        if (!(dx > 0.0) || !(dy > 0.0) || !(dz > 0.0)) {
            throw ShapeError("grid pitches must be > 0");
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return nx * ny * nz; }
    [[nodiscard]] std::size_t slice_size() const noexcept { return nx * ny; }

    [[nodiscard]] bool contains(const Index3& idx) const noexcept {
        return idx.i < nx && idx.j < ny && idx.k < nz;
    }

    [[nodiscard]] std::size_t linear(std::size_t i, std::size_t j, std::size_t k) const noexcept {
        return (k * ny + j) * nx + i;
    }

    [[nodiscard]] Index3 unravel(std::size_t lin) const noexcept {
        return {lin % nx, (lin / nx) % ny, lin / (nx * ny)};
    }

    /// Physical extent in µm.
    [[nodiscard]] Vec3 extent() const noexcept {
        return {static_cast<double>(nx) * dx, static_cast<double>(ny) * dy,
                static_cast<double>(nz) * dz};
    }

    [[nodiscard]] GridSpec lateral_slice() const noexcept {
        GridSpec g = *this;
        g.nz = 1;
        return g;
    }

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

inline Vec3 world_coords(const Index3& idx, const GridSpec& grid) {
    if (!grid.contains(idx)) {
        throw BoundsError("voxel index (" + std::to_string(idx.i) + "," + std::to_string(idx.j) +
                          "," + std::to_string(idx.k) + ") outside grid");
    }
    return {(static_cast<double>(idx.i) + 0.5) * grid.dx,
            (static_cast<double>(idx.j) + 0.5) * grid.dy,
            (static_cast<double>(idx.k) + 0.5) * grid.dz};
}

/// Nearest voxel to a physical point; empty when the point lies outside the grid.
inline std::optional<Index3> nearest_voxel(const Vec3& pos, const GridSpec& grid) {
    const auto ext = grid.extent();
    for (int a = 0; a < 3; ++a) {
        if (!(pos[a] >= 0.0) || !(pos[a] < ext[a])) return std::nullopt;
    }
    auto axis = [](double p, double pitch, std::size_t n) {
        auto v = static_cast<std::size_t>(std::floor(p / pitch));
        return v < n ? v : n - 1;
    };
    return Index3{axis(pos[0], grid.dx, grid.nx), axis(pos[1], grid.dy, grid.ny),
                  axis(pos[2], grid.dz, grid.nz)};
}

template <typename T>
struct Volume {
    GridSpec grid;
    std::vector<T> data;

    Volume() = default;
    explicit Volume(const GridSpec& g, T fill = T{}) : grid(g), data(g.size(), fill) {
        grid.validate();
    }
    Volume(const GridSpec& g, std::vector<T> values) : grid(g), data(std::move(values)) {
        grid.validate();
        if (data.size() != grid.size()) {
            throw ShapeError("volume payload length does not match grid");
        }
    }

    [[nodiscard]] T& at(std::size_t i, std::size_t j, std::size_t k) {
        return data[grid.linear(i, j, k)];
    }
    [[nodiscard]] const T& at(std::size_t i, std::size_t j, std::size_t k) const {
        return data[grid.linear(i, j, k)];
    }
    [[nodiscard]] std::size_t size() const noexcept { return data.size(); }

    friend bool operator==(const Volume&, const Volume&) = default;
};

using RealVolume = Volume<double>;
using ComplexVolume = Volume<std::complex<double>>;
using BinaryVolume = Volume<std::uint8_t>;

/// 2D complex field; a ComplexVolume with nz == 1.
using ComplexField2D = ComplexVolume;

/// Refractive-index contrast volume (Δn per voxel).
using RIVolume = RealVolume;

struct Hologram {
    RealVolume intensity;  ///< nz == 1
    double wavelength = 0.6328;  ///< vacuum wavelength, µm
    double n_medium = 1.33;

    [[nodiscard]] std::size_t nx() const noexcept { return intensity.grid.nx; }
    [[nodiscard]] std::size_t ny() const noexcept { return intensity.grid.ny; }
};

}  // namespace holodsn
