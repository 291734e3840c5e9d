#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "motiongait/tensor.hpp"

namespace motiongait {

/// Centered uniform fan-in initialization, U(-b, b) with b = sqrt(6 / fan_in).
template <typename T>
Tensor<T> he_uniform(Shape shape, std::int64_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> t(std::move(shape));
  for (T& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

}  // namespace motiongait
