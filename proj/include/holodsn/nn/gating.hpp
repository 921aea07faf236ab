#pragma once

#include <string>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"
#include "holodsn/nn/autodiff.hpp"
#include "holodsn/nn/ops.hpp"

namespace holodsn::nn {

/// Gating network: stride subsample, two 3×3 conv + ReLU + 2×2 max-pool stages,
/// one fully connected layer and a softmax over the experts.
struct GtnConfig {
    std::size_t patch = 128;
    std::size_t stride = 4;
    std::size_t c1 = 32;
    std::size_t c2 = 64;
    std::size_t experts = 3;

    static GtnConfig full() { return {}; }
    /// Same layer widths on the 64² desk-scale patches.
    static GtnConfig desk() { return {64, 4, 32, 64, 3}; }

    void validate() const {
        if (stride == 0 || patch % stride != 0) throw ShapeError("GTN patch must be divisible by the stride");
        if ((patch / stride) % 4 != 0 || patch / stride < 4) {
            throw ShapeError("GTN subsampled patch must be divisible by 4 for two pooling stages");
        }
        if (c1 == 0 || c2 == 0) throw ShapeError("GTN channel counts must be positive");
        if (experts != 3) throw ShapeError("GTN must produce exactly 3 weights");
    }
    [[nodiscard]] std::size_t pooled() const { return patch / stride / 4; }
    [[nodiscard]] std::size_t fc_in() const { return pooled() * pooled() * c2; }

    friend bool operator==(const GtnConfig&, const GtnConfig&) = default;
};

template <typename T>
struct GtnParams {
    GtnConfig config;
    Var<T> conv1_w, conv1_b;  ///< [c1, 1, 1, 3, 3]
    Var<T> conv2_w, conv2_b;  ///< [c2, c1, 1, 3, 3]
    Var<T> fc_w, fc_b;        ///< [3, fc_in]
};

/// Tensor of a square hologram patch as [1, 1, y, x].
template <typename T>
Tensor<T> holo_tensor(const RealVolume& holo) {
    if (holo.grid.nz != 1) throw ShapeError("hologram patch must be a single plane");
    Tensor<T> t(Shape{1, 1, holo.grid.ny, holo.grid.nx});
    for (std::size_t n = 0; n < holo.size(); ++n) t.data[n] = static_cast<T>(holo.data[n]);
    return t;
}

template <typename T>
Var<T> gtn_forward(const GtnParams<T>& p, const Tensor<T>& holo) {
    const auto& c = p.config;
    c.validate();
    if (holo.shape != Shape{1, 1, c.patch, c.patch}) {
        throw ShapeError("GTN expects a " + std::to_string(c.patch) + "² patch, got " + shape_str(holo.shape));
    }
    auto x = Var<T>::leaf(subsample2d(holo, c.stride));
    auto h = maxpool2d(relu(conv3d(x, p.conv1_w, p.conv1_b)));
    h = maxpool2d(relu(conv3d(h, p.conv2_w, p.conv2_b)));
    return softmax(linear(h, p.fc_w, p.fc_b));
}

template <typename T>
Var<T> gtn_forward(const GtnParams<T>& p, const RealVolume& holo) {
    return gtn_forward(p, holo_tensor<T>(holo));
}

}  // namespace holodsn::nn
