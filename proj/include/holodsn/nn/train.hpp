#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "holodsn/core/errors.hpp"
#include "holodsn/core/rng.hpp"
#include "holodsn/nn/adam.hpp"
#include "holodsn/nn/model.hpp"
#include "holodsn/pipeline/dataset.hpp"

namespace holodsn::nn {

enum class InitMode { Xavier, PretrainedExperts };

struct TrainConfig {
    double lr = 1e-4;
    std::size_t batch = 4;
    double gamma = 0.0;  ///< L2 coefficient on Σ‖W‖²
    std::size_t max_iters = 200;
    std::uint64_t seed = 1;
    InitMode init = InitMode::Xavier;
    std::size_t val_every = 0;  ///< 0: validate only at the end
    AdamConfig adam{};

    /// Learning rate, batch and decay used for each model kind at full scale.
    static TrainConfig preset(ModelKind kind) {
        TrainConfig c;
        switch (kind) {
            case ModelKind::Dsn: c.lr = 1e-5, c.batch = 1, c.gamma = 1e-6; break;
            case ModelKind::Expert: c.lr = 1e-4, c.batch = 4; break;
            case ModelKind::Generalist: c.lr = 1e-5, c.batch = 20; break;
            case ModelKind::Generalist3x: c.lr = 1e-4, c.batch = 1; break;
        }
        return c;
    }

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
        if (batch == 0) throw ConfigError("batch size must be positive");
        if (!(gamma >= 0.0)) throw ConfigError("L2 coefficient must be non-negative");
    }
};

struct LossRecord {
    std::size_t iteration = 0;
    double bce = 0.0;
    double l2 = 0.0;  ///< γ·Σ‖W‖²
    [[nodiscard]] double total() const { return bce + l2; }
};

struct TrainResult {
    std::vector<LossRecord> log;
    std::vector<std::pair<std::size_t, double>> validation;  ///< (iteration, mean BCE)
    std::size_t best_iteration = 0;
    double best_validation = std::numeric_limits<double>::quiet_NaN();
};

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& log) {
    std::ostringstream os;
    os.precision(10);
    os << "iteration,bce,l2,total\n";
    for (const auto& r : log) os << r.iteration << ',' << r.bce << ',' << r.l2 << ',' << r.total() << '\n';
    const auto text = os.str();
    write_bytes(path, std::vector<char>(text.begin(), text.end()));
}

template <typename T>
double squared_norm(const Model<T>& m) {
    double acc = 0.0;
    for (const auto& p : m.parameters()) {
        for (T v : p.value().data) acc += static_cast<double>(v) * static_cast<double>(v);
    }
    return acc;
}

template <typename T>
Var<T> sample_loss(const Model<T>& m, const TrainingPair& s) {
    auto patch = Var<T>::leaf(to_tensor<T>(s.input));
    const auto holo = m.is_dsn() ? holo_tensor<T>(s.hologram) : Tensor<T>{};
    auto out = m.forward(patch, holo);
    return bce_with_logits(out.logits, to_tensor<T>(s.label));
}

/// Mean BCE over a set without recording a graph.
template <typename T>
double evaluate_loss(const Model<T>& m, const std::vector<TrainingPair>& set) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    NoGradGuard guard;
    double acc = 0.0;
    for (const auto& s : set) acc += static_cast<double>(sample_loss(m, s).value().data[0]);
    return acc / static_cast<double>(set.size());
}

namespace detail {
template <typename T>
std::vector<Tensor<T>> snapshot(const Model<T>& m) {
    std::vector<Tensor<T>> out;
    for (const auto& p : m.parameters()) out.push_back(p.value());
    return out;
}

template <typename T>
void restore(Model<T>& m, const std::vector<Tensor<T>>& values) {
    auto params = m.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) params[k].mutable_value() = values[k];
}
}  // namespace detail

/// Adam on mean BCE + γ‖W‖². Batches are drawn by walking a per-epoch shuffle of
/// the training set; gradients of the batch members are accumulated before each
/// step. When a validation set is given, the parameters with the lowest
/// validation loss are kept.
template <typename T>
TrainResult train(Model<T>& m, const std::vector<TrainingPair>& train_set, const std::vector<TrainingPair>& val_set,
                  const TrainConfig& cfg, const std::function<void(const LossRecord&)>& on_iter = {}) {
    cfg.validate();
    if (train_set.empty()) throw MissingInputError("training set is empty");
    auto params = m.parameters();
    AdamConfig ac = cfg.adam;
    ac.lr = cfg.lr;
    Adam<T> opt(params, ac);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();

    TrainResult res;
    std::vector<Tensor<T>> best;
    auto validate_at = [&](std::size_t it) {
        if (val_set.empty()) return;
        const double v = evaluate_loss(m, val_set);
        if (!std::isfinite(v)) throw NumericalError("non-finite validation loss at iteration " + std::to_string(it));
        res.validation.emplace_back(it, v);
        if (best.empty() || v < res.best_validation) {
            res.best_validation = v;
            res.best_iteration = it;
            best = detail::snapshot(m);
        }
    };

    const T inv_batch = T{1} / static_cast<T>(cfg.batch);
    for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
        opt.zero_grad();
        double bce = 0.0;
        for (std::size_t b = 0; b < cfg.batch; ++b) {
            if (cursor == order.size()) {
                for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);
                cursor = 0;
            }
            const auto& s = train_set[order[cursor++]];
            auto loss = sample_loss(m, s);
            const double lv = static_cast<double>(loss.value().data[0]);
            if (!std::isfinite(lv)) {
                throw NumericalError("non-finite BCE at iteration " + std::to_string(it) + " (volume '" +
                                     s.volume_id + "', window " + std::to_string(s.window.x0) + "," +
                                     std::to_string(s.window.y0) + ")");
            }
            bce += lv;
            backward(loss, inv_batch);
        }
        LossRecord rec{it, bce / static_cast<double>(cfg.batch), 0.0};
        if (cfg.gamma > 0.0) {
            auto l2 = sum_squares(params);
            rec.l2 = cfg.gamma * static_cast<double>(l2.value().data[0]);
            backward(l2, static_cast<T>(cfg.gamma));
        }
        if (!std::isfinite(rec.total())) throw NumericalError("non-finite loss at iteration " + std::to_string(it));
        opt.step();
        res.log.push_back(rec);
        if (on_iter) on_iter(rec);
        if (cfg.val_every && it % cfg.val_every == 0) validate_at(it);
    }
    if (res.validation.empty() || res.validation.back().first != cfg.max_iters) validate_at(cfg.max_iters);
    if (!best.empty()) detail::restore(m, best);
    return res;
}

}  // namespace holodsn::nn
