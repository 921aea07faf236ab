#pragma once

#include <complex>
#include <numeric>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"
#include "holodsn/wavesim/propagate.hpp"

namespace holodsn {

struct BackpropOptions {
    std::size_t nz = 100;
    double dz = 5.0;  ///< µm
    double band_limit = 1.0;
    /// Propagate I − mean(I) instead of the raw intensity.
    bool subtract_dc = false;
};

/// Slice k (0-based) holds R(x, y; z_j) = F⁻¹{F{I} · H(−z_j)} with z_j = (k+1)·dz measured
/// from the hologram plane. The hologram is used directly as the field, so DC and
/// twin-image terms are retained.
inline ComplexVolume backpropagate_volume(const Hologram& holo, const BackpropOptions& opt) {
    const GridSpec lateral = holo.intensity.grid.lateral_slice();
    if (holo.intensity.grid.nz != 1) throw ShapeError("hologram must be 2D");
    if (opt.nz < 1 || !(opt.dz > 0.0)) throw ConfigError("backprop needs nz >= 1 and dz > 0");
    OpticalConfig cfg;
    cfg.wavelength = holo.wavelength;
    cfg.n_medium = holo.n_medium;
    cfg.band_limit = opt.band_limit;
    AngularSpectrum asp(lateral, cfg);

    const std::size_t plane = lateral.size();
    std::vector<std::complex<double>> spectrum(plane);
    double mean = 0.0;
    if (opt.subtract_dc) {
        mean = std::accumulate(holo.intensity.data.begin(), holo.intensity.data.end(), 0.0) /
               static_cast<double>(plane);
    }
    for (std::size_t n = 0; n < plane; ++n) spectrum[n] = holo.intensity.data[n] - mean;
    asp.forward(spectrum);

    GridSpec g = lateral;
    g.nz = opt.nz;
    g.dz = opt.dz;
    ComplexVolume out(g);
    std::vector<std::complex<double>> slice(plane);
    for (std::size_t k = 0; k < opt.nz; ++k) {
        slice = spectrum;
        asp.apply_transfer(slice, -static_cast<double>(k + 1) * opt.dz);
        asp.inverse(slice);
        std::copy(slice.begin(), slice.end(), out.data.begin() + static_cast<std::ptrdiff_t>(k * plane));
    }
    return out;
}

}  // namespace holodsn
