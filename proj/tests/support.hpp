#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "motiongait/autograd.hpp"
#include "motiongait/tensor.hpp"

namespace mgtest {

using motiongait::Shape;
using motiongait::Tensor;
using motiongait::Var;

template <typename T = double>
Tensor<T> random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T = double>
Var<T> random_var(const Shape& shape, std::mt19937_64& rng, bool requires_grad = false) {
  return Var<T>::leaf(random_tensor<T>(shape, rng), requires_grad);
}

inline std::int64_t rand_int(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

/// Largest elementwise |a - b| / max(1, |b|).
template <typename T>
double max_rel_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    const double d = std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    worst = std::max(worst, d / std::max(1.0, std::abs(static_cast<double>(b[i]))));
  }
  return worst;
}

/// Direct six-loop cross-correlation, zero padding, arbitrary stride.
inline Tensor<double> naive_conv3d(const Tensor<double>& in, const Tensor<double>& k, const Tensor<double>* bias,
                                   std::array<std::int64_t, 3> stride, std::array<std::int64_t, 3> pad) {
  const auto ci = in.dim(0), s = in.dim(1), h = in.dim(2), w = in.dim(3);
  const auto co = k.dim(0), kt = k.dim(2), kh = k.dim(3), kw = k.dim(4);
  const auto so = (s + 2 * pad[0] - kt) / stride[0] + 1;
  const auto ho = (h + 2 * pad[1] - kh) / stride[1] + 1;
  const auto wo = (w + 2 * pad[2] - kw) / stride[2] + 1;
  Tensor<double> out(Shape{co, so, ho, wo});
  for (std::int64_t o = 0; o < co; ++o)
    for (std::int64_t t = 0; t < so; ++t)
      for (std::int64_t y = 0; y < ho; ++y)
        for (std::int64_t x = 0; x < wo; ++x) {
          double acc = bias ? (*bias)[o] : 0.0;
          for (std::int64_t c = 0; c < ci; ++c)
            for (std::int64_t a = 0; a < kt; ++a)
              for (std::int64_t b = 0; b < kh; ++b)
                for (std::int64_t d = 0; d < kw; ++d) {
                  const auto ti = t * stride[0] + a - pad[0];
                  const auto yi = y * stride[1] + b - pad[1];
                  const auto xi = x * stride[2] + d - pad[2];
                  if (ti < 0 || ti >= s || yi < 0 || yi >= h || xi < 0 || xi >= w) continue;
                  acc += in.at(c, ti, yi, xi) * k[(((o * ci + c) * kt + a) * kh + b) * kw + d];
                }
          out[((o * so + t) * ho + y) * wo + x] = acc;
        }
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("motiongait_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mgtest
