#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"
#include "holodsn/wavesim/fft.hpp"

namespace holodsn {

struct OpticalConfig {
    double wavelength = 0.6328;  ///< vacuum wavelength λ0, µm
    double n_medium = 1.33;
    /// Fraction of the medium wavenumber kept by the angular-spectrum kernel.
    double band_limit = 1.0;
    /// Distance from the volume exit face to the hologram plane, µm.
    double standoff = 0.0;

    void validate() const {
        if (!(wavelength > 0.0)) throw ConfigError("wavelength must be > 0");
        if (!(n_medium >= 1.0)) throw ConfigError("medium index must be >= 1");
        if (!(band_limit > 0.0 && band_limit <= 1.0)) throw ConfigError("band limit must be in (0, 1]");
        if (!(standoff >= 0.0)) throw ConfigError("standoff must be >= 0");
    }

    [[nodiscard]] double k0() const noexcept { return 2.0 * std::numbers::pi / wavelength; }
    [[nodiscard]] double k_medium() const noexcept { return k0() * n_medium; }
    [[nodiscard]] double wavelength_medium() const noexcept { return wavelength / n_medium; }
};

/// Angular spatial frequency (rad/µm) of FFT bin `idx` on an n-point axis with pitch d.
inline double angular_frequency(std::size_t idx, std::size_t n, double d) {
    const auto i = static_cast<long>(idx);
    const auto nn = static_cast<long>(n);
    const long f = i < (nn + 1) / 2 ? i : i - nn;
    return 2.0 * std::numbers::pi * static_cast<double>(f) / (static_cast<double>(n) * d);
}

/// Free-space propagator in the homogeneous medium: U(z) = F⁻¹{F{U} · exp(i z k_z)},
/// k_z = √(k_m² − k_x² − k_y²). Modes outside the band (including all evanescent
/// modes) are zeroed, so the kernel is unitary on what it keeps.
class AngularSpectrum {
public:
    AngularSpectrum(const GridSpec& lateral, const OpticalConfig& cfg)
        : nx_(lateral.nx), ny_(lateral.ny), fft_(lateral.nx, lateral.ny), kz_(lateral.nx * lateral.ny),
          keep_(lateral.nx * lateral.ny) {
        lateral.validate();
        cfg.validate();
        const double km = cfg.k_medium();
        const double cut = cfg.band_limit * km;
        for (std::size_t j = 0; j < ny_; ++j) {
            const double ky = angular_frequency(j, ny_, lateral.dy);
            for (std::size_t i = 0; i < nx_; ++i) {
                const double kx = angular_frequency(i, nx_, lateral.dx);
                const double kt2 = kx * kx + ky * ky;
                const std::size_t n = j * nx_ + i;
                keep_[n] = kt2 <= cut * cut && kt2 <= km * km;
                kz_[n] = keep_[n] ? std::sqrt(km * km - kt2) : 0.0;
            }
        }
    }

    [[nodiscard]] std::size_t nx() const noexcept { return nx_; }
    [[nodiscard]] std::size_t ny() const noexcept { return ny_; }
    [[nodiscard]] bool propagating(std::size_t n) const { return keep_[n] != 0; }
    [[nodiscard]] double kz(std::size_t n) const { return kz_[n]; }

    /// Multiplies a spectrum in place by the transfer function for distance z.
    void apply_transfer(std::span<std::complex<double>> spectrum, double z) const {
        for (std::size_t n = 0; n < spectrum.size(); ++n) {
            spectrum[n] = keep_[n] ? spectrum[n] * std::polar(1.0, z * kz_[n]) : 0.0;
        }
    }

    void forward(std::span<std::complex<double>> data) { fft_.forward(data); }
    void inverse(std::span<std::complex<double>> data) { fft_.inverse(data); }

    /// In-place propagation by signed distance z (negative = backward). z == 0 is the identity.
    void propagate(std::span<std::complex<double>> field, double z) {
        if (field.size() != nx_ * ny_) throw ShapeError("field does not match propagator grid");
        if (z == 0.0) return;
        fft_.forward(field);
        apply_transfer(field, z);
        fft_.inverse(field);
    }

private:
    std::size_t nx_;
    std::size_t ny_;
    Fft2D fft_;
    std::vector<double> kz_;
    std::vector<unsigned char> keep_;
};

inline ComplexField2D angular_spectrum_propagate(const ComplexField2D& field, double z,
                                                 const OpticalConfig& cfg) {
    if (field.grid.nz != 1) throw ShapeError("angular_spectrum_propagate expects a 2D field");
    AngularSpectrum asp(field.grid, cfg);
    ComplexField2D out = field;
    asp.propagate(out.data, z);
    return out;
}

}  // namespace holodsn
