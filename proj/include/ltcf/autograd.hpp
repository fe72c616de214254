#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ltcf/tensor.hpp"

namespace ltcf {

/// One value in the dynamically recorded computation graph. A fresh graph is
/// built on every forward pass; backward() walks it once in reverse
/// topological order. Parameters are long-lived leaf nodes whose grad buffer
/// survives across passes so the optimizer can consume it.
template <typename T>
class NodeT {
public:
    TensorT<T> value;
    TensorT<T> grad;  // empty until first accumulation (empty == all zeros)
    bool requires_grad = false;
    std::string name;  // set for parameters; empty for intermediates

    std::vector<std::shared_ptr<NodeT>> parents;
    std::function<void(NodeT&)> backprop;  // pushes this->grad into parents

    void ensure_grad() {
        if (grad.numel() != value.numel()) {
            grad = TensorT<T>(value.shape);
        }
    }

    void zero_grad() {
        if (grad.numel() == value.numel()) {
            grad.fill(T(0));
        }
    }

    void accumulate(const TensorT<T>& g) {
        ensure_grad();
        for (size_t i = 0; i < g.numel(); ++i) grad.data[i] += g.data[i];
    }
};

template <typename T>
using ValueT = std::shared_ptr<NodeT<T>>;

using Value = ValueT<float>;

/// Leaf holding data that never needs gradients (inputs, frozen weights).
template <typename T>
inline ValueT<T> constant(TensorT<T> v) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(v);
    return n;
}

/// Leaf whose gradient is wanted (loss inputs under test, probe points).
template <typename T>
inline ValueT<T> input(TensorT<T> v, bool requires_grad = false) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(v);
    n->requires_grad = requires_grad;
    if (requires_grad) n->ensure_grad();
    return n;
}

/// Named trainable leaf. grad is allocated up front so unused parameters
/// read back an exact zero gradient.
template <typename T>
inline ValueT<T> parameter(std::string name, TensorT<T> v) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(v);
    n->requires_grad = true;
    n->name = std::move(name);
    n->ensure_grad();
    return n;
}

namespace detail {

/// Creates an op node. When no parent needs gradients the graph edges and the
/// backward closure are dropped, so inference does not retain activations.
template <typename T>
inline ValueT<T> make_op(TensorT<T> value, std::vector<ValueT<T>> parents,
                         std::function<void(NodeT<T>&)> backprop) {
    auto n = std::make_shared<NodeT<T>>();
    n->value = std::move(value);
    bool needs = false;
    for (const auto& p : parents) needs |= p->requires_grad;
    n->requires_grad = needs;
    if (needs) {
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

}  // namespace detail

/// Reverse-mode sweep from a scalar loss. Every reachable node with
/// requires_grad receives its accumulated partial derivative.
template <typename T>
inline void backward(const ValueT<T>& root) {
    if (!root) throw UsageError("backward: null node");
    if (root->value.numel() != 1) {
        throw UsageError("backward requires a scalar, got shape " + root->value.shape_str());
    }

    // iterative post-order DFS
    std::vector<NodeT<T>*> order;
    std::unordered_set<NodeT<T>*> seen;
    std::vector<std::pair<NodeT<T>*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            NodeT<T>* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && seen.insert(p).second) {
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad.data[0] += T(1);

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT<T>* n = *it;
        if (n->backprop && n->grad.numel() == n->value.numel()) {
            n->backprop(*n);
        }
    }
}

}  // namespace ltcf
