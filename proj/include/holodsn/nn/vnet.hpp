#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/grid.hpp"
#include "holodsn/nn/autodiff.hpp"
#include "holodsn/nn/ops.hpp"

namespace holodsn::nn {

enum class LayerRole { Conv, Down, Up, Output };

inline const char* role_name(LayerRole r) {
    switch (r) {
        case LayerRole::Conv: return "conv";
        case LayerRole::Down: return "down";
        case LayerRole::Up: return "up";
        case LayerRole::Output: return "output";
    }
    return "?";
}

struct LayerSpec {
    std::array<std::size_t, 3> kernel{3, 3, 3};  ///< (x, y, z) extents
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    LayerRole role = LayerRole::Conv;

    [[nodiscard]] std::size_t kernel_volume() const { return kernel[0] * kernel[1] * kernel[2]; }
    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

inline constexpr std::size_t kEncoderLayers = 10;
inline constexpr std::size_t kDecoderLayers = 9;
inline constexpr std::size_t kScales = 5;

/// Per-layer description of the V-net: layers 1–10 form the encoder (two 3³
/// convs at full resolution, then four [2³ stride-2 down, 3³ conv] stages) and
/// layers 11–19 the decoder (four [2³ transposed up, 3³ conv] stages and a 1³
/// output conv).
struct VNetConfig {
    std::vector<LayerSpec> layers;

    static VNetConfig from_channels(const std::array<std::size_t, kScales>& ch) {
        VNetConfig c;
        auto add = [&](std::size_t k, std::size_t in, std::size_t out, LayerRole role) {
            c.layers.push_back({{k, k, k}, in, out, role});
        };
        add(3, 1, ch[0], LayerRole::Conv);
        add(3, ch[0], ch[0], LayerRole::Conv);
        for (std::size_t s = 1; s < kScales; ++s) {
            add(2, ch[s - 1], ch[s], LayerRole::Down);
            add(3, ch[s], ch[s], LayerRole::Conv);
        }
        for (std::size_t s = kScales - 1; s >= 1; --s) {
            add(2, ch[s], ch[s - 1], LayerRole::Up);
            add(3, ch[s - 1], ch[s - 1], LayerRole::Conv);
        }
        add(1, ch[0], 1, LayerRole::Output);
        return c;
    }

    /// Expert / generalist at full size: 16/32/64/128/256 channels.
    static VNetConfig full() { return from_channels({16, 32, 64, 128, 256}); }
    /// 3× generalist at full size: 28/56/112/224/448 channels.
    static VNetConfig full3x() { return from_channels({28, 56, 112, 224, 448}); }
    /// Reduced configuration used for tests and desk-scale runs.
    static VNetConfig desk() { return from_channels({2, 4, 8, 16, 32}); }
    static VNetConfig desk3x() { return from_channels({4, 7, 14, 28, 56}); }

    [[nodiscard]] std::array<std::size_t, kScales> channels() const {
        validate();
        return {layers[1].out_channels, layers[3].out_channels, layers[5].out_channels, layers[7].out_channels,
                layers[9].out_channels};
    }

    /// Checks the 19-layer role pattern, kernel sizes and the channel chain.
    void validate() const {
        if (layers.size() != kEncoderLayers + kDecoderLayers) {
            throw ShapeError("V-net config needs 19 layers, got " + std::to_string(layers.size()));
        }
        const LayerRole pattern[19] = {LayerRole::Conv, LayerRole::Conv, LayerRole::Down, LayerRole::Conv,
                                       LayerRole::Down, LayerRole::Conv, LayerRole::Down, LayerRole::Conv,
                                       LayerRole::Down, LayerRole::Conv, LayerRole::Up,   LayerRole::Conv,
                                       LayerRole::Up,   LayerRole::Conv, LayerRole::Up,   LayerRole::Conv,
                                       LayerRole::Up,   LayerRole::Conv, LayerRole::Output};
        std::size_t prev = 1;
        std::vector<std::size_t> enc_ch;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& L = layers[l];
            const std::string where = "layer " + std::to_string(l + 1);
            if (L.role != pattern[l]) throw ShapeError(where + ": expected role " + role_name(pattern[l]));
            const std::size_t k = L.role == LayerRole::Conv ? 3 : L.role == LayerRole::Output ? 1 : 2;
            if (L.kernel != std::array<std::size_t, 3>{k, k, k}) throw ShapeError(where + ": unexpected kernel size");
            if (L.in_channels != prev) {
                throw ShapeError(where + ": input channels " + std::to_string(L.in_channels) +
                                 " do not match previous output " + std::to_string(prev));
            }
            if (L.out_channels == 0) throw ShapeError(where + ": zero output channels");
            prev = L.out_channels;
            if (l == 1 || l == 3 || l == 5 || l == 7) enc_ch.push_back(L.out_channels);
            if (l == 10 || l == 12 || l == 14 || l == 16) {
                if (L.out_channels != enc_ch.back()) {
                    throw ShapeError(where + ": decoder channels must mirror the encoder skip channels");
                }
                enc_ch.pop_back();
            }
        }
        if (prev != 1) throw ShapeError("output layer must produce 1 channel");
    }

    friend bool operator==(const VNetConfig&, const VNetConfig&) = default;
};

/// Weight shape of one layer. Convs store [out, in, kz, ky, kx].
inline Shape weight_shape(const LayerSpec& L) {
    return {L.out_channels, L.in_channels, L.kernel[2], L.kernel[1], L.kernel[0]};
}

template <typename T>
struct LayerParams {
    Var<T> weight;
    Var<T> bias;
};

template <typename T>
struct ExpertParams {
    VNetConfig config;
    std::vector<LayerParams<T>> encoder;  ///< layers 1–10
    std::vector<LayerParams<T>> decoder;  ///< layers 11–19
};

/// Multi-scale encoder output: four skip maps and the bottleneck latent.
template <typename T>
struct FeatureSet {
    std::array<Var<T>, kScales> maps;
};

/// Converts a patch to a [1, z, y, x] tensor.
template <typename T>
Tensor<T> to_tensor(const RealVolume& v) {
    Tensor<T> t(Shape{1, v.grid.nz, v.grid.ny, v.grid.nx});
    for (std::size_t n = 0; n < v.size(); ++n) t.data[n] = static_cast<T>(v.data[n]);
    return t;
}

template <typename T>
Tensor<T> to_tensor(const BinaryVolume& v) {
    Tensor<T> t(Shape{1, v.grid.nz, v.grid.ny, v.grid.nx});
    for (std::size_t n = 0; n < v.size(); ++n) t.data[n] = static_cast<T>(v.data[n]);
    return t;
}

/// Smallest spatial extent the encoder accepts (every halving sees at least 2 voxels).
inline constexpr std::size_t kMinExtent = 16;

inline void check_patch_shape(const Shape& s) {
    if (s.size() != 4 || s[0] != 1) throw ShapeError("expert input must be [1, z, y, x], got " + shape_str(s));
    for (std::size_t a = 1; a < 4; ++a) {
        if (s[a] < kMinExtent) {
            throw ShapeError("expert input extent " + std::to_string(s[a]) + " below minimum " +
                             std::to_string(kMinExtent));
        }
    }
}

/// Spatial extents (z, y, x) at each of the five scales for a given input.
inline std::array<std::array<std::size_t, 3>, kScales> scale_dims(std::size_t nz, std::size_t ny, std::size_t nx) {
    std::array<std::array<std::size_t, 3>, kScales> out{};
    out[0] = {nz, ny, nx};
    for (std::size_t s = 1; s < kScales; ++s) {
        out[s] = {halved(out[s - 1][0]), halved(out[s - 1][1]), halved(out[s - 1][2])};
    }
    return out;
}

template <typename T>
FeatureSet<T> encode(const std::vector<LayerParams<T>>& enc, const Var<T>& input) {
    if (enc.size() != kEncoderLayers) throw ShapeError("encoder needs 10 layers");
    check_patch_shape(input.shape());
    FeatureSet<T> f;
    Var<T> h = relu(conv3d(input, enc[0].weight, enc[0].bias));
    h = relu(conv3d(h, enc[1].weight, enc[1].bias));
    f.maps[0] = h;
    for (std::size_t s = 1; s < kScales; ++s) {
        const auto& down = enc[2 * s];
        const auto& conv = enc[2 * s + 1];
        h = relu(conv3d_down(h, down.weight, down.bias));
        h = relu(conv3d(h, conv.weight, conv.bias));
        f.maps[s] = h;
    }
    return f;
}

/// Decodes a feature set; skips are fused by addition. Returns the output-layer
/// logits [1, z, y, x] (before the sigmoid).
template <typename T>
Var<T> decode_logits(const std::vector<LayerParams<T>>& dec, const FeatureSet<T>& f) {
    if (dec.size() != kDecoderLayers) throw ShapeError("decoder needs 9 layers");
    Var<T> h = f.maps[kScales - 1];
    for (std::size_t s = kScales - 1; s >= 1; --s) {
        const auto& up = dec[2 * (kScales - 1 - s)];
        const auto& conv = dec[2 * (kScales - 1 - s) + 1];
        const auto& skip = f.maps[s - 1].shape();
        h = relu(conv3d_up(h, up.weight, up.bias, {skip[1], skip[2], skip[3]}));
        h = add(h, f.maps[s - 1]);
        h = relu(conv3d(h, conv.weight, conv.bias));
    }
    const auto& out = dec[kDecoderLayers - 1];
    return conv3d(h, out.weight, out.bias);
}

/// Sigmoid probability map [1, z, y, x].
template <typename T>
Var<T> decode(const std::vector<LayerParams<T>>& dec, const FeatureSet<T>& f) {
    return sigmoid(decode_logits(dec, f));
}

template <typename T>
struct ExpertOutput {
    Var<T> prob;
    FeatureSet<T> features;
    Var<T> logits;
};

template <typename T>
ExpertOutput<T> expert_forward(const ExpertParams<T>& params, const Var<T>& input) {
    auto features = encode(params.encoder, input);
    auto logits = decode_logits(params.decoder, features);
    return {sigmoid(logits), features, logits};
}

template <typename T>
ExpertOutput<T> expert_forward(const ExpertParams<T>& params, const RealVolume& patch) {
    return expert_forward(params, Var<T>::leaf(to_tensor<T>(patch)));
}

}  // namespace holodsn::nn
