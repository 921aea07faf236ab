#pragma once

#include <cstdint>
#include <vector>

#include "holodsn/nn/vnet.hpp"

namespace holodsn::nn {

enum class CountConvention {
    /// k·Cin·Cout weights + Cout biases per layer (what the network stores).
    Standard,
    /// (k + 1)·Cin·Cout per layer, the convention of the published layer tables.
    KernelPlusOne,
};

inline std::uint64_t count_layer(const LayerSpec& L, CountConvention c) {
    const std::uint64_t k = L.kernel_volume();
    const std::uint64_t ci = L.in_channels, co = L.out_channels;
    return c == CountConvention::Standard ? k * ci * co + co : (k + 1) * ci * co;
}

/// Counts from the layer list alone; no structural validation.
inline std::uint64_t count_params(const std::vector<LayerSpec>& layers, CountConvention c) {
    std::uint64_t total = 0;
    for (const auto& L : layers) total += count_layer(L, c);
    return total;
}

inline std::uint64_t count_params(const VNetConfig& cfg, CountConvention c) { return count_params(cfg.layers, c); }

}  // namespace holodsn::nn
