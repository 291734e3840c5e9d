#include "motiongait/adam.hpp"

#include <cmath>

namespace motiongait {

template <typename T>
void adam_update(std::span<T> param, std::span<const T> grad, std::span<T> m, std::span<T> v,
                 const AdamConfig& config, std::int64_t step) {
  if (grad.size() != param.size() || m.size() != param.size() || v.size() != param.size()) {
    throw ContractError("adam_update: state buffers do not match parameter size");
  }
  if (step < 1) throw ContractError("adam_update: step counts from 1");
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  const T lr_t = static_cast<T>(config.lr * std::sqrt(c2) / c1);
  const T eps_t = static_cast<T>(config.eps * std::sqrt(c2));
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const std::size_t n = param.size();
  T* __restrict p = param.data();
  const T* __restrict g = grad.data();
  T* __restrict mm = m.data();
  T* __restrict vv = v.data();
  for (std::size_t i = 0; i < n; ++i) {
    mm[i] = b1 * mm[i] + (T(1) - b1) * g[i];
    vv[i] = b2 * vv[i] + (T(1) - b2) * g[i] * g[i];
    p[i] -= lr_t * mm[i] / (std::sqrt(vv[i]) + eps_t);
  }
}

template <typename T>
Adam<T>::Adam(std::vector<Var<T>> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.shape());
    v_.emplace_back(p.shape());
  }
}

template <typename T>
void Adam<T>::step() {
  ++step_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    const Tensor<T> zeros = p.has_grad() ? Tensor<T>() : Tensor<T>(p.shape());
    const Tensor<T>& g = p.has_grad() ? p.grad() : zeros;
    adam_update<T>(p.mutable_value().data(), g.data(), m_[i].data(), v_[i].data(), config_, step_);
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <typename T>
void Adam<T>::restore(std::int64_t steps, std::vector<Tensor<T>> m, std::vector<Tensor<T>> v) {
  if (m.size() != params_.size() || v.size() != params_.size()) {
    throw ContractError("Adam::restore: state count does not match parameters");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (m[i].shape() != params_[i].shape() || v[i].shape() != params_[i].shape()) {
      throw ContractError("Adam::restore: state shape mismatch for parameter " + std::to_string(i));
    }
  }
  step_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

template void adam_update(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                          const AdamConfig&, std::int64_t);
template void adam_update(std::span<double>, std::span<const double>, std::span<double>, std::span<double>,
                          const AdamConfig&, std::int64_t);
template class Adam<float>;
template class Adam<double>;

}  // namespace motiongait
