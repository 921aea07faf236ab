// Simulates one particle, records its hologram and backpropagates it; prints the
// on-axis amplitude per slice so the refocus depth can be read off.
//   refocus [depth_um]

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "holodsn/holoback/backprop.hpp"
#include "holodsn/wavesim/bpm.hpp"

using namespace holodsn;

int main(int argc, char** argv) {
    const double depth = argc > 1 ? std::atof(argv[1]) : 60.0;
    OpticalConfig cfg;
    const double dz = cfg.wavelength_medium() / 4.0;
    const GridSpec grid{256, 256, static_cast<std::size_t>(std::ceil((depth + 1.0) / dz)), 0.1725, 0.1725, dz};

    ParticleField field;
    field.dims = grid.extent();
    field.particles.push_back({128 * grid.dx, 128 * grid.dy, depth, 1.0, 0.26});

    const auto holo = record_hologram(bpm_exit_field(field, grid, cfg), cfg);
    const auto vol = backpropagate_volume(holo, {static_cast<std::size_t>(depth / 5.0) + 8, 5.0});

    std::size_t best = 0;
    double best_amp = 0.0;
    for (std::size_t k = 0; k < vol.grid.nz; ++k) {
        const double amp = std::abs(vol.at(128, 128, k));
        std::printf("%6.1f um  %.4f\n", (k + 1) * 5.0, amp);
        if (amp > best_amp) best_amp = amp, best = k;
    }
    std::printf("particle at %.1f um, amplitude peak at %.1f um\n", depth, (best + 1) * 5.0);
}
