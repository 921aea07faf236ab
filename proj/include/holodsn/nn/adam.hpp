#pragma once

#include <cmath>
#include <vector>

#include "holodsn/nn/autodiff.hpp"

namespace holodsn::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
class Adam {
public:
    Adam(std::vector<Var<T>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) {
            m_.emplace_back(p.value().size(), 0.0);
            v_.emplace_back(p.value().size(), 0.0);
        }
    }

    /// One update from the accumulated gradients, scaled by `grad_scale`.
    void step(double grad_scale = 1.0) {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = params_[k];
            if (p.grad().data.empty()) continue;
            auto& w = p.mutable_value().data;
            const auto& g = p.grad().data;
            auto& m = m_[k];
            auto& v = v_[k];
            for (std::size_t n = 0; n < w.size(); ++n) {
                const double gn = grad_scale * static_cast<double>(g[n]);
                m[n] = cfg_.beta1 * m[n] + (1.0 - cfg_.beta1) * gn;
                v[n] = cfg_.beta2 * v[n] + (1.0 - cfg_.beta2) * gn * gn;
                w[n] -= static_cast<T>(cfg_.lr * (m[n] / c1) / (std::sqrt(v[n] / c2) + cfg_.eps));
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    [[nodiscard]] std::size_t steps() const { return t_; }

private:
    std::vector<Var<T>> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t t_ = 0;
};

}  // namespace holodsn::nn
