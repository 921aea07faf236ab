#pragma once

#include <cmath>
#include <vector>

#include "holodsn/nn/ops.hpp"
#include "holodsn/nn/vnet.hpp"

namespace holodsn::nn {

/// Checks αᵢ ≥ 0 and Σα = 1 within 1e-6.
template <typename T>
void check_simplex(const Tensor<T>& alpha) {
    double sum = 0.0;
    for (T a : alpha.data) {
        if (!(a >= T{0})) throw ShapeError("synthesis weights must be non-negative");
        sum += static_cast<double>(a);
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ShapeError("synthesis weights must sum to 1");
}

/// Per-scale F_s = Σ αᵢ F_i.
template <typename T>
FeatureSet<T> synthesize_features(const std::vector<FeatureSet<T>>& fs, const Var<T>& alpha) {
    if (fs.size() != alpha.value().size()) throw ShapeError("one feature set per synthesis weight required");
    FeatureSet<T> out;
    for (std::size_t s = 0; s < kScales; ++s) {
        std::vector<Var<T>> xs;
        for (const auto& f : fs) xs.push_back(f.maps[s]);
        out.maps[s] = weighted_sum(xs, alpha);
    }
    return out;
}

/// D_s = Σ αᵢ D_i over every weight and bias tensor.
template <typename T>
std::vector<LayerParams<T>> synthesize_decoder(const std::vector<std::vector<LayerParams<T>>>& ds,
                                               const Var<T>& alpha) {
    if (ds.size() != alpha.value().size()) throw ShapeError("one decoder per synthesis weight required");
    for (const auto& d : ds) {
        if (d.size() != ds.front().size()) throw ShapeError("decoder layer counts differ");
    }
    std::vector<LayerParams<T>> out(ds.front().size());
    for (std::size_t l = 0; l < out.size(); ++l) {
        std::vector<Var<T>> ws, bs;
        for (const auto& d : ds) {
            ws.push_back(d[l].weight);
            bs.push_back(d[l].bias);
        }
        out[l] = {weighted_sum(ws, alpha), weighted_sum(bs, alpha)};
    }
    return out;
}

}  // namespace holodsn::nn
