#include "motiongait/autograd.hpp"

#include <unordered_set>

namespace motiongait {

namespace {
thread_local bool t_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_mode_enabled() { return t_grad_enabled; }

template <typename T>
void backward(const Var<T>& root) {
  if (!root) throw ContractError("backward on an empty Var");
  if (root.value().numel() != 1) {
    throw ContractError("backward requires a scalar root, got shape " + shape_str(root.shape()));
  }
  Node<T>* top = root.node();
  if (!top->requires_grad) return;

  // Iterative post-order DFS; reversed it is a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{top, 0}};
  seen.insert(top);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  top->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (!node->backward || node->grad.empty()) continue;
    node->backward(*node);
    // Interior gradients are consumed; only leaves keep accumulating.
    node->grad = Tensor<T>();
  }
}

template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace motiongait
