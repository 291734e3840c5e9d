#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "motiongait/autograd.hpp"

namespace motiongait {

// Differentiable operation set. Binary ops never broadcast: operands must
// have identical shapes, and repetition is always explicit.

template <typename T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T> Var<T> abs(const Var<T>& a);
template <typename T> Var<T> sigmoid(const Var<T>& a);
template <typename T> Var<T> add_scalar(const Var<T>& a, T s);
template <typename T> Var<T> mul_scalar(const Var<T>& a, T s);

/// Sum of all elements, shape {1}.
template <typename T> Var<T> sum(const Var<T>& a);

/// Mean over one axis; the axis is dropped.
template <typename T> Var<T> reduce_mean(const Var<T>& x, std::size_t axis);
/// Max over one axis; the axis is dropped. Ties resolve to the lowest index.
template <typename T> Var<T> reduce_max(const Var<T>& x, std::size_t axis);

/// Contiguous [begin, end) ranges along an axis.
using Segments = std::vector<std::pair<std::int64_t, std::int64_t>>;

/// Mean of each segment along `axis`; that axis becomes segments.size() long.
template <typename T>
Var<T> segment_mean(const Var<T>& x, std::size_t axis, const Segments& segments);
/// Inverse layout of segment_mean: slice j is copied to every index of segment j.
template <typename T>
Var<T> segment_repeat(const Var<T>& x, std::size_t axis, const Segments& segments);

template <typename T>
std::vector<Var<T>> split(const Var<T>& x, std::size_t axis, const std::vector<std::int64_t>& sizes);
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts, std::size_t axis);

/// n equal horizontal bands of a (c, s, h, w) map, top to bottom.
template <typename T> std::vector<Var<T>> split_h(const Var<T>& x, std::int64_t n);
/// Stacks (c, s, h_k, w) maps along height in argument order.
template <typename T> Var<T> concat_h(const std::vector<Var<T>>& parts);

struct Conv3dOptions {
  std::array<std::int64_t, 3> stride{1, 1, 1};
  std::array<std::int64_t, 3> padding{1, 1, 1};
};

/// Cross-correlation of a (c_in, s, h, w) input with a (c_out, c_in, kt, kh, kw)
/// kernel. `bias` may be an empty Var.
template <typename T>
Var<T> conv3d(const Var<T>& input, const Var<T>& kernel, const Var<T>& bias,
              const Conv3dOptions& options = {});

/// Non-overlapping max pooling of a (c, s, h, w) map with window == stride.
template <typename T>
Var<T> max_pool3d(const Var<T>& input, std::array<std::int64_t, 3> window);

/// Generalized mean over the width of a (c, h, w) map:
/// out[c, h] = (mean_w (max(x, 0) + eps)^p)^(1/p). `p` is a learnable {1} tensor.
template <typename T>
Var<T> gem_pool(const Var<T>& input, const Var<T>& p, T eps = T(1e-6));

template <typename T> Var<T> reshape(const Var<T>& x, Shape shape);
template <typename T> Var<T> permute(const Var<T>& x, const std::vector<std::size_t>& order);
/// Stacks equally shaped tensors along a new leading axis.
template <typename T> Var<T> stack(const std::vector<Var<T>>& items);

/// Batched product (n, m, k) x (n, k, p) -> (n, m, p).
template <typename T> Var<T> bmm(const Var<T>& a, const Var<T>& b);
/// (m, k) x (k, p) -> (m, p).
template <typename T> Var<T> matmul(const Var<T>& a, const Var<T>& b);

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);
};

/// Per-feature normalization of a (batch, d) matrix. Training mode uses batch
/// statistics (biased variance) and updates the running estimates; inference
/// uses the running estimates only.
template <typename T>
Var<T> batchnorm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta,
                 BatchNormState<T>& state, bool training);

/// Mean over rows of -log softmax(logits)[label].
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<std::int64_t>& labels);

}  // namespace motiongait
