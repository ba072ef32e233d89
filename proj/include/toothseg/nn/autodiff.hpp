#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "toothseg/nn/tensor.hpp"

namespace toothseg::nn {

// Reverse-mode autodiff over TensorT<T>. Graphs are built define-by-run:
// every op allocates a node holding its output value, shared pointers to its
// parents, and a closure that scatters the node's gradient into the parents.
template <typename T>
struct Node {
    TensorT<T> value;
    TensorT<T> grad;  // allocated on first accumulation
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void accumulate(const TensorT<T>& g) {
        if (!has_grad) {
            grad = g;
            has_grad = true;
        } else {
            T* a = grad.data();
            const T* b = g.data();
            const std::int64_t n = grad.numel();
            for (std::int64_t i = 0; i < n; ++i) a[i] += b[i];
        }
    }

    // Grad accessor that always returns a zero-initialized tensor of the
    // right shape; used by backward closures that write in place.
    TensorT<T>& grad_buffer() {
        if (!has_grad) {
            grad = TensorT<T>(value.dims(), T(0));
            has_grad = true;
        }
        return grad;
    }
};

template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(TensorT<T> value, bool requires_grad = false) : n_(std::make_shared<Node<T>>()) {
        n_->value = std::move(value);
        n_->requires_grad = requires_grad;
    }

    bool defined() const { return n_ != nullptr; }
    const TensorT<T>& value() const { return n_->value; }
    TensorT<T>& value() { return n_->value; }
    const TensorT<T>& grad() const {
        if (!n_->has_grad) throw std::logic_error("gradient not computed");
        return n_->grad;
    }
    bool has_grad() const { return n_ && n_->has_grad; }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    void zero_grad() {
        n_->has_grad = false;
        n_->grad = TensorT<T>();
    }
    std::shared_ptr<Node<T>> node() const { return n_; }

    static Var from_node(std::shared_ptr<Node<T>> n) {
        Var v;
        v.n_ = std::move(n);
        return v;
    }

private:
    std::shared_ptr<Node<T>> n_;
};

template <typename T>
Var<T> make_op(TensorT<T> value, std::vector<std::shared_ptr<Node<T>>> parents,
               std::function<void(Node<T>&)> backward) {
    bool any = false;
    for (const auto& p : parents) any = any || p->requires_grad;
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = any;
    if (any) {
        n->parents = std::move(parents);
        n->backward = std::move(backward);
    }
    return Var<T>::from_node(std::move(n));
}

// Backpropagate from a scalar root. Parameters keep any previously
// accumulated gradient, so gradients add up across multiple calls until
// zero_grad is invoked.
template <typename T>
void backward(const Var<T>& root) {
    if (root.value().numel() != 1) throw std::invalid_argument("backward root must be scalar");
    if (!root.requires_grad()) return;

    // Iterative post-order DFS for topological order.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Node<T>* child = node->parents[next_child++].get();
            if (child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root.node()->accumulate(TensorT<T>(root.value().dims(), T(1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward && n->has_grad) n->backward(*n);
    }
}

}  // namespace toothseg::nn
