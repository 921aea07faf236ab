#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"
#include "holodsn/core/rng.hpp"
#include "holodsn/fieldgen/particles.hpp"
#include "holodsn/fieldgen/voxelize.hpp"
#include "holodsn/wavesim/propagate.hpp"

namespace holodsn {

// Geometry: sample depth z is measured from the volume face nearest the camera.
// The unit plane wave enters at z = nz·dz, travels toward decreasing z and leaves
// through z = 0; the hologram plane sits `standoff` µm beyond that exit face.

/// Fills one Δn slice; returns false when the slice is homogeneous (all zero).
using SliceSource = std::function<bool(std::size_t k, std::span<double> out)>;

/// Split-step propagation: for each slice in travel order, diffract over dz in the
/// medium, then apply the thin phase screen exp(i k0 Δn dz). Runs of empty slices are
/// merged into a single free-space step, which is exact for the band-limited kernel.
inline ComplexField2D bpm_run(const GridSpec& grid, const OpticalConfig& cfg, const SliceSource& source,
                              ComplexField2D incident = {}) {
    grid.validate();
    cfg.validate();
    const GridSpec lateral = grid.lateral_slice();
    ComplexField2D u = incident.data.empty() ? ComplexField2D(lateral, std::complex<double>(1.0, 0.0)) : std::move(incident);
    if (u.grid.nx != grid.nx || u.grid.ny != grid.ny || u.grid.nz != 1) {
        throw ShapeError("incident field does not match volume lateral grid");
    }
    AngularSpectrum asp(lateral, cfg);
    std::vector<double> dn(lateral.size());
    const double k0dz = cfg.k0() * grid.dz;
    double pending = 0.0;
    for (std::size_t step = 0; step < grid.nz; ++step) {
        const std::size_t k = grid.nz - 1 - step;
        pending += grid.dz;
        if (!source(k, dn)) continue;
        asp.propagate(u.data, pending);
        pending = 0.0;
        for (std::size_t n = 0; n < dn.size(); ++n) {
            if (dn[n] != 0.0) u.data[n] *= std::polar(1.0, k0dz * dn[n]);
        }
    }
    asp.propagate(u.data, pending);
    return u;
}

/// Exit-face field for a dense Δn volume.
inline ComplexField2D bpm_exit_field(const RIVolume& rivol, const OpticalConfig& cfg,
                                     ComplexField2D incident = {}) {
    const auto& g = rivol.grid;
    const std::size_t plane = g.slice_size();
    auto source = [&](std::size_t k, std::span<double> out) {
        bool any = false;
        for (std::size_t n = 0; n < plane; ++n) {
            out[n] = rivol.data[k * plane + n];
            any = any || out[n] != 0.0;
        }
        return any;
    };
    return bpm_run(g, cfg, source, std::move(incident));
}

/// Exit-face field for a particle list, voxelized slice by slice on `grid` (never
/// materializes the full Δn volume). Identical to bpm_exit_field(voxelize(field, grid)).
inline ComplexField2D bpm_exit_field(const ParticleField& field, const GridSpec& grid,
                                     const OpticalConfig& cfg) {
    detail::check_coverage(field, grid);
    auto source = [&](std::size_t k, std::span<double> out) { return voxelize_slice(field, grid, k, out); };
    return bpm_run(grid, cfg, source);
}

enum class NoiseKind { None, Poisson, Gaussian };

/// Optional sensor noise; off by default.
struct NoiseModel {
    NoiseKind kind = NoiseKind::None;
    /// Poisson: photons per unit intensity. Gaussian: standard deviation in intensity units.
    double level = 0.0;
    std::uint64_t seed = 0;
};

/// Intensity at the hologram plane: propagate the exit field by cfg.standoff, then |U|².
inline Hologram record_hologram(const ComplexField2D& exit_field, const OpticalConfig& cfg,
                                const NoiseModel& noise = {}) {
    if (exit_field.grid.nz != 1) throw ShapeError("record_hologram expects a 2D field");
    ComplexField2D u = cfg.standoff == 0.0 ? exit_field : angular_spectrum_propagate(exit_field, cfg.standoff, cfg);
    Hologram h;
    h.wavelength = cfg.wavelength;
    h.n_medium = cfg.n_medium;
    h.intensity = RealVolume(exit_field.grid);
    for (std::size_t n = 0; n < u.data.size(); ++n) h.intensity.data[n] = std::norm(u.data[n]);
    if (noise.kind != NoiseKind::None) {
        Rng rng(noise.seed);
        for (auto& v : h.intensity.data) {
            if (noise.kind == NoiseKind::Poisson) {
                if (!(noise.level > 0.0)) throw ConfigError("Poisson noise needs photons per unit intensity > 0");
                v = static_cast<double>(rng.poisson(v * noise.level)) / noise.level;
            } else {
                v = std::max(0.0, v + noise.level * rng.normal());
            }
        }
    }
    return h;
}

}  // namespace holodsn
