#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "motiongait/tensor.hpp"

namespace motiongait {

template <typename T>
struct Node;

/// Vector-Jacobian product of the producing op. Reads `self.grad` and
/// accumulates into the gradient buffers of `self.parents`.
template <typename T>
using BackwardRule = std::function<void(Node<T>& self)>;

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  BackwardRule<T> backward;
  const char* op = "leaf";

  /// Gradient buffer, zero-initialized on first use.
  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

/// Handle to a node in the differentiation graph. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  /// Graph leaf. Parameters are leaves with requires_grad set.
  static Var leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    return Var(std::move(n));
  }

  const Tensor<T>& value() const { return node_->value; }
  /// Mutable value access for optimizer updates on leaves.
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::int64_t dim(std::size_t axis) const { return node_->value.dim(axis); }
  void zero_grad() { node_->grad = Tensor<T>(); }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// While alive on this thread, ops record no graph edges.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Builds an op result. When no parent requires a gradient (or grad mode is
/// off) the rule is dropped and the result is a constant.
template <typename T>
Var<T> make_result(Tensor<T> value, std::vector<Var<T>> parents, BackwardRule<T> rule,
                   const char* op) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  if (grad_mode_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.shared());
    n->backward = std::move(rule);
  }
  return Var<T>(std::move(n));
}

/// Reverse-mode sweep from a scalar root. Gradients accumulate additively
/// into every reachable node, so two calls without reset double them.
template <typename T>
void backward(const Var<T>& root);

}  // namespace motiongait
