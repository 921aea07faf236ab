#pragma once

#include <array>
#include <optional>
#include <type_traits>
#include <vector>

#include "holodsn/nn/gating.hpp"
#include "holodsn/nn/synthesis.hpp"
#include "holodsn/nn/vnet.hpp"

namespace holodsn::nn {

inline constexpr std::size_t kExperts = 3;

template <typename T>
struct DsnParams {
    std::array<ExpertParams<T>, kExperts> experts;
    GtnParams<T> gtn;

    void validate() const {
        for (const auto& e : experts) {
            if (!(e.config == experts[0].config)) throw ShapeError("DSN experts must share one V-net config");
        }
        gtn.config.validate();
    }
};

template <typename T>
struct DsnOutput {
    Var<T> prob;
    Var<T> alpha;
    Var<T> logits;
};

/// Gated forward pass. `alpha_override` replaces the gating output (constant,
/// no gradient), which is how single-expert equivalence is checked.
template <typename T>
DsnOutput<T> dsn_forward(const DsnParams<T>& p, const Var<T>& patch, const Tensor<T>& holo,
                         const std::type_identity_t<std::optional<Tensor<T>>>& alpha_override = std::nullopt) {
    Var<T> alpha;
    if (alpha_override) {
        if (alpha_override->shape != Shape{kExperts}) throw ShapeError("alpha override must have 3 entries");
        check_simplex(*alpha_override);
        alpha = Var<T>::leaf(*alpha_override);
    } else {
        alpha = gtn_forward(p.gtn, holo);
    }
    std::vector<FeatureSet<T>> feats;
    std::vector<std::vector<LayerParams<T>>> decs;
    for (const auto& e : p.experts) {
        feats.push_back(encode(e.encoder, patch));
        decs.push_back(e.decoder);
    }
    auto fs = synthesize_features(feats, alpha);
    auto ds = synthesize_decoder(decs, alpha);
    auto logits = decode_logits(ds, fs);
    return {sigmoid(logits), alpha, logits};
}

template <typename T>
DsnOutput<T> dsn_forward(const DsnParams<T>& p, const RealVolume& patch, const RealVolume& holo,
                         const std::type_identity_t<std::optional<Tensor<T>>>& alpha_override = std::nullopt) {
    return dsn_forward(p, Var<T>::leaf(to_tensor<T>(patch)), holo_tensor<T>(holo), alpha_override);
}

}  // namespace holodsn::nn
