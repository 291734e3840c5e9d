#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "motiongait/autograd.hpp"

namespace motiongait {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update on flat buffers, `step` counted from 1.
/// Uses the folded form lr_t = lr * sqrt(1 - b2^t) / (1 - b1^t) with
/// eps scaled by sqrt(1 - b2^t), which equals the textbook recurrence.
template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 const AdamConfig& config, std::int64_t step);

template <typename T>
class Adam {
 public:
  Adam(std::vector<Var<T>> params, AdamConfig config);

  /// Applies one update from the accumulated gradients. Parameters that
  /// received no gradient are treated as having a zero gradient.
  void step();
  void zero_grad();

  std::int64_t steps() const { return step_; }
  const AdamConfig& config() const { return config_; }
  const std::vector<Tensor<T>>& first_moments() const { return m_; }
  const std::vector<Tensor<T>>& second_moments() const { return v_; }

  /// Restores optimizer state (shapes must match the parameters).
  void restore(std::int64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v);

 private:
  std::vector<Var<T>> params_;
  AdamConfig config_;
  std::vector<Tensor<T>> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace motiongait
