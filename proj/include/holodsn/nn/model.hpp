#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/rng.hpp"
#include "holodsn/nn/dsn.hpp"

namespace holodsn::nn {

enum class ModelKind { Expert, Generalist, Generalist3x, Dsn };
enum class Scale { Desk, Full };

inline std::string kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::Expert: return "expert";
        case ModelKind::Generalist: return "generalist";
        case ModelKind::Generalist3x: return "generalist3x";
        case ModelKind::Dsn: return "dsn";
    }
    return "?";
}

inline ModelKind parse_kind(const std::string& s) {
    if (s == "expert") return ModelKind::Expert;
    if (s == "generalist") return ModelKind::Generalist;
    if (s == "generalist3x") return ModelKind::Generalist3x;
    if (s == "dsn") return ModelKind::Dsn;
    throw ConfigError("unknown model kind '" + s + "'");
}

inline Scale parse_scale(const std::string& s) {
    if (s == "desk") return Scale::Desk;
    if (s == "full") return Scale::Full;
    throw ConfigError("unknown scale preset '" + s + "'");
}

struct ModelSpec {
    ModelKind kind = ModelKind::Expert;
    VNetConfig vnet = VNetConfig::desk();
    GtnConfig gtn = GtnConfig::desk();

    static ModelSpec preset(ModelKind kind, Scale scale) {
        ModelSpec s;
        s.kind = kind;
        const bool wide = kind == ModelKind::Generalist3x;
        if (scale == Scale::Full) {
            s.vnet = wide ? VNetConfig::full3x() : VNetConfig::full();
            s.gtn = GtnConfig::full();
        } else {
            s.vnet = wide ? VNetConfig::desk3x() : VNetConfig::desk();
            s.gtn = GtnConfig::desk();
        }
        return s;
    }
};

/// Xavier-uniform bound for a weight tensor: conv [out, in, k...] or linear [out, in].
inline double xavier_bound(const Shape& s) {
    if (s.size() < 2) throw ShapeError("xavier_bound needs a weight tensor");
    std::size_t receptive = 1;
    for (std::size_t a = 2; a < s.size(); ++a) receptive *= s[a];
    const double fan_in = static_cast<double>(s[1] * receptive);
    const double fan_out = static_cast<double>(s[0] * receptive);
    return std::sqrt(6.0 / (fan_in + fan_out));
}

template <typename T>
Var<T> xavier_tensor(const Shape& s, Rng& rng) {
    const double a = xavier_bound(s);
    Tensor<T> t(s);
    for (auto& v : t.data) v = static_cast<T>(rng.uniform(-a, a));
    return Var<T>::leaf(std::move(t), true);
}

template <typename T>
Var<T> zero_bias(std::size_t n) {
    return Var<T>::leaf(Tensor<T>(Shape{n}, T{0}), true);
}

template <typename T>
ExpertParams<T> init_expert(const VNetConfig& cfg, Rng& rng) {
    cfg.validate();
    ExpertParams<T> p;
    p.config = cfg;
    for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
        const auto& L = cfg.layers[l];
        LayerParams<T> lp{xavier_tensor<T>(weight_shape(L), rng), zero_bias<T>(L.out_channels)};
        (l < kEncoderLayers ? p.encoder : p.decoder).push_back(std::move(lp));
    }
    return p;
}

template <typename T>
GtnParams<T> init_gtn(const GtnConfig& cfg, Rng& rng) {
    cfg.validate();
    GtnParams<T> g;
    g.config = cfg;
    g.conv1_w = xavier_tensor<T>({cfg.c1, 1, 1, 3, 3}, rng);
    g.conv1_b = zero_bias<T>(cfg.c1);
    g.conv2_w = xavier_tensor<T>({cfg.c2, cfg.c1, 1, 3, 3}, rng);
    g.conv2_b = zero_bias<T>(cfg.c2);
    g.fc_w = xavier_tensor<T>({cfg.experts, cfg.fc_in()}, rng);
    g.fc_b = zero_bias<T>(cfg.experts);
    return g;
}

template <typename T>
struct ModelOutput {
    Var<T> prob;
    std::optional<Var<T>> alpha;  ///< DSN only
    Var<T> logits;
};

template <typename T>
struct Model {
    ModelSpec spec;
    ExpertParams<T> single;  ///< expert and generalist kinds
    DsnParams<T> dsn;        ///< DSN kind

    [[nodiscard]] bool is_dsn() const { return spec.kind == ModelKind::Dsn; }

    /// Every trainable tensor with a stable name; the order is fixed by the ModelSpec.
    [[nodiscard]] std::vector<std::pair<std::string, Var<T>>> named_parameters() const {
        std::vector<std::pair<std::string, Var<T>>> out;
        auto add_expert = [&](const std::string& prefix, const ExpertParams<T>& e) {
            for (std::size_t l = 0; l < e.encoder.size() + e.decoder.size(); ++l) {
                const auto& lp = l < kEncoderLayers ? e.encoder[l] : e.decoder[l - kEncoderLayers];
                const std::string name = prefix + "layer" + (l + 1 < 10 ? "0" : "") + std::to_string(l + 1);
                out.emplace_back(name + ".weight", lp.weight);
                out.emplace_back(name + ".bias", lp.bias);
            }
        };
        if (!is_dsn()) {
            add_expert("", single);
            return out;
        }
        for (std::size_t i = 0; i < kExperts; ++i) add_expert("expert" + std::to_string(i + 1) + ".", dsn.experts[i]);
        out.emplace_back("gtn.conv1.weight", dsn.gtn.conv1_w);
        out.emplace_back("gtn.conv1.bias", dsn.gtn.conv1_b);
        out.emplace_back("gtn.conv2.weight", dsn.gtn.conv2_w);
        out.emplace_back("gtn.conv2.bias", dsn.gtn.conv2_b);
        out.emplace_back("gtn.fc.weight", dsn.gtn.fc_w);
        out.emplace_back("gtn.fc.bias", dsn.gtn.fc_b);
        return out;
    }

    [[nodiscard]] std::vector<Var<T>> parameters() const {
        std::vector<Var<T>> out;
        for (auto& [_, v] : named_parameters()) out.push_back(v);
        return out;
    }

    ModelOutput<T> forward(const Var<T>& patch, const Tensor<T>& holo) const {
        if (!is_dsn()) {
            auto r = expert_forward(single, patch);
            return {r.prob, std::nullopt, r.logits};
        }
        auto r = dsn_forward(dsn, patch, holo);
        return {r.prob, r.alpha, r.logits};
    }
};

/// Xavier initialization of every tensor; same seed gives identical parameters.
template <typename T>
Model<T> init_model(const ModelSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    Model<T> m;
    m.spec = spec;
    if (spec.kind != ModelKind::Dsn) {
        m.single = init_expert<T>(spec.vnet, rng);
        return m;
    }
    for (auto& e : m.dsn.experts) e = init_expert<T>(spec.vnet, rng);
    m.dsn.gtn = init_gtn<T>(spec.gtn, rng);
    return m;
}

/// DSN whose experts come from pre-trained expert models; the GTN is Xavier-initialized.
template <typename T>
Model<T> init_dsn_from_experts(const ModelSpec& spec, const std::vector<ExpertParams<T>>& experts,
                               std::uint64_t seed) {
    if (spec.kind != ModelKind::Dsn) throw ConfigError("pretrained-experts init applies to the DSN only");
    if (experts.size() != kExperts) {
        throw ShapeError("pretrained-experts init needs 3 expert checkpoints, got " + std::to_string(experts.size()));
    }
    for (const auto& e : experts) {
        if (!(e.config == spec.vnet)) throw ShapeError("expert checkpoint config does not match the DSN config");
    }
    Rng rng(seed);
    Model<T> m;
    m.spec = spec;
    for (std::size_t i = 0; i < kExperts; ++i) m.dsn.experts[i] = experts[i];
    m.dsn.gtn = init_gtn<T>(spec.gtn, rng);
    return m;
}

}  // namespace holodsn::nn
