#pragma once

// Randomized comparisons of production kernels against direct loop
// evaluations, shared by the unit tests and the acceptance run.

#include <cmath>
#include <random>

#include "motiongait/network.hpp"
#include "motiongait/ops.hpp"
#include "support.hpp"

namespace mgtest {

struct OracleResult {
  int cases = 0;
  double worst = 0.0;
  void add(double err) {
    ++cases;
    worst = std::max(worst, err);
  }
};

inline OracleResult conv3d_oracle_suite(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  OracleResult r;
  while (r.cases < n) {
    const auto ci = rand_int(rng, 1, 3), co = rand_int(rng, 1, 3);
    const auto s = rand_int(rng, 1, 6), h = rand_int(rng, 1, 7), w = rand_int(rng, 1, 7);
    const std::array<std::int64_t, 3> k{rand_int(rng, 1, 3), rand_int(rng, 1, 3), rand_int(rng, 1, 3)};
    const std::array<std::int64_t, 3> st{rand_int(rng, 1, 2), rand_int(rng, 1, 2), rand_int(rng, 1, 2)};
    const std::array<std::int64_t, 3> pad{rand_int(rng, 0, 1), rand_int(rng, 0, 1), rand_int(rng, 0, 1)};
    if (s + 2 * pad[0] < k[0] || h + 2 * pad[1] < k[1] || w + 2 * pad[2] < k[2]) continue;
    const auto in = random_tensor({ci, s, h, w}, rng);
    const auto ker = random_tensor({co, ci, k[0], k[1], k[2]}, rng);
    const auto bias = random_tensor({co}, rng);
    const bool with_bias = rand_int(rng, 0, 1) == 1;
    const auto got = motiongait::conv3d(Var<double>::leaf(in), Var<double>::leaf(ker),
                                        with_bias ? Var<double>::leaf(bias) : Var<double>(), {st, pad});
    const auto want = naive_conv3d(in, ker, with_bias ? &bias : nullptr, st, pad);
    if (got.shape() != want.shape()) {
      r.add(1.0);
      continue;
    }
    r.add(max_rel_diff(got.value(), want));
  }
  return r;
}

inline OracleResult lta_oracle_suite(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  OracleResult r;
  for (int i = 0; i < n; ++i) {
    motiongait::NetworkConfig cfg;
    cfg.lta_kernel_t = rand_int(rng, 1, 4);
    cfg.lta_stride_t = rand_int(rng, 1, 4);
    const auto c = rand_int(rng, 1, 3), co = rand_int(rng, 1, 3);
    const auto s = rand_int(rng, cfg.lta_kernel_t, 12), h = rand_int(rng, 1, 5), w = rand_int(rng, 1, 5);
    const auto x = random_tensor({c, s, h, w}, rng);
    const auto k = random_tensor({co, c, cfg.lta_kernel_t, 1, 1}, rng);
    const auto b = random_tensor({co}, rng);
    const auto got = motiongait::lta(Var<double>::leaf(x), Var<double>::leaf(k), Var<double>::leaf(b), cfg);
    const auto want = naive_conv3d(x, k, &b, {cfg.lta_stride_t, 1, 1}, {0, 0, 0});
    if (got.shape() != want.shape() || got.dim(1) != (s - cfg.lta_kernel_t) / cfg.lta_stride_t + 1) {
      r.add(1.0);
      continue;
    }
    r.add(max_rel_diff(got.value(), want));
  }
  return r;
}

inline OracleResult reduction_oracle_suite(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  OracleResult r;
  for (int i = 0; i < n; ++i) {
    const Shape shape{rand_int(rng, 1, 4), rand_int(rng, 1, 5), rand_int(rng, 1, 4), rand_int(rng, 1, 4)};
    const auto x = random_tensor(shape, rng);
    const auto axis = static_cast<std::size_t>(rand_int(rng, 0, 3));
    std::int64_t outer = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
    for (std::size_t a = axis + 1; a < 4; ++a) inner *= shape[a];
    const auto len = shape[axis];
    const auto mean = motiongait::reduce_mean(Var<double>::leaf(x), axis).value();
    const auto mx = motiongait::reduce_max(Var<double>::leaf(x), axis).value();
    double err = 0.0;
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t q = 0; q < inner; ++q) {
        double acc = 0.0, best = -INFINITY;
        for (std::int64_t j = 0; j < len; ++j) {
          const double v = x[(o * len + j) * inner + q];
          acc += v;
          best = std::max(best, v);
        }
        err = std::max(err, std::abs(mean[o * inner + q] - acc / static_cast<double>(len)));
        err = std::max(err, std::abs(mx[o * inner + q] - best));
      }
    // Segment mean over a random contiguous tiling of the axis.
    motiongait::Segments seg;
    for (std::int64_t b = 0; b < len;) {
      const auto e = std::min(len, b + rand_int(rng, 1, 3));
      seg.emplace_back(b, e);
      b = e;
    }
    const auto sm = motiongait::segment_mean(Var<double>::leaf(x), axis, seg).value();
    const auto ns = static_cast<std::int64_t>(seg.size());
    for (std::int64_t o = 0; o < outer; ++o)
      for (std::int64_t k = 0; k < ns; ++k)
        for (std::int64_t q = 0; q < inner; ++q) {
          double acc = 0.0;
          for (auto j = seg[k].first; j < seg[k].second; ++j) acc += x[(o * len + j) * inner + q];
          err = std::max(err, std::abs(sm[(o * ns + k) * inner + q] - acc / static_cast<double>(seg[k].second - seg[k].first)));
        }
    r.add(err);
  }
  return r;
}

inline OracleResult gem_oracle_suite(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  OracleResult r;
  for (int i = 0; i < n; ++i) {
    const auto c = rand_int(rng, 1, 3), h = rand_int(rng, 1, 4), w = rand_int(rng, 1, 6);
    const auto x = random_tensor({c, h, w}, rng, -0.5, 2.0);
    const double p = std::uniform_real_distribution<double>(0.5, 8.0)(rng);
    const double eps = 1e-6;
    const auto got =
        motiongait::gem_pool(Var<double>::leaf(x), Var<double>::leaf(Tensor<double>::scalar(p)), eps).value();
    double err = 0.0;
    for (std::int64_t a = 0; a < c; ++a)
      for (std::int64_t b = 0; b < h; ++b) {
        double acc = 0.0;
        for (std::int64_t q = 0; q < w; ++q) acc += std::pow(std::max(x[(a * h + b) * w + q], 0.0) + eps, p);
        const double want = std::pow(acc / static_cast<double>(w), 1.0 / p);
        err = std::max(err, std::abs(got[a * h + b] - want) / std::max(1.0, std::abs(want)));
      }
    r.add(err);
  }
  return r;
}

}  // namespace mgtest
