#pragma once

// Minimal reverse-mode automatic differentiation over Tensor values.
//
// Every op returns a Var whose node keeps its parents and a backward closure that
// reads the node's gradient and accumulates into the parents. Nodes that do not
// depend on any trainable leaf record neither, so inference graphs free eagerly.

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "holodsn/nn/tensor.hpp"

namespace holodsn::nn {

template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  ///< empty until something flows into it
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    Tensor<T>& ensure_grad() {
        if (grad.data.empty()) grad = Tensor<T>(value.shape, T{0});
        return grad;
    }
};

namespace detail {
inline bool& grad_enabled_flag() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
    ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

    /// Leaf variable. Trainable leaves accumulate gradients.
    static Var leaf(Tensor<T> value, bool requires_grad = false) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }

    [[nodiscard]] bool defined() const noexcept { return static_cast<bool>(node_); }
    [[nodiscard]] const Tensor<T>& value() const { return node_->value; }
    [[nodiscard]] Tensor<T>& mutable_value() { return node_->value; }
    [[nodiscard]] const Tensor<T>& grad() const { return node_->grad; }
    [[nodiscard]] Tensor<T>& mutable_grad() { return node_->ensure_grad(); }
    [[nodiscard]] bool requires_grad() const { return node_->requires_grad; }
    [[nodiscard]] const Shape& shape() const { return node_->value.shape; }
    [[nodiscard]] std::shared_ptr<Node<T>> node() const { return node_; }

    void zero_grad() {
        if (!node_->grad.data.empty()) std::fill(node_->grad.data.begin(), node_->grad.data.end(), T{0});
    }

private:
    std::shared_ptr<Node<T>> node_;
};

/// Creates the output node of an op. `backward` is kept only when recording is on
/// and at least one input needs a gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    bool needs = false;
    if (detail::grad_enabled_flag()) {
        for (const auto& in : inputs) needs = needs || in.requires_grad();
    }
    if (needs) {
        n->requires_grad = true;
        for (auto& in : inputs) n->parents.push_back(in.node());
        n->backward = std::move(backward);
    }
    return Var<T>(std::move(n));
}

/// Back-propagates from a scalar root with seed gradient `seed`.
template <typename T>
void backward(const Var<T>& root, T seed = T{1}) {
    if (root.value().size() != 1) throw ShapeError("backward() needs a scalar root");
    if (!root.requires_grad()) return;
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node().get(), 0}};
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root.node()->ensure_grad().data[0] += seed;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward && !n->grad.data.empty()) n->backward(*n);
    }
}

}  // namespace holodsn::nn
