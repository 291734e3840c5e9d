#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "motiongait/ops.hpp"

namespace motiongait {

/// Contiguous clips of at most `clip_len` frames tiling [0, s). Only the last
/// clip can be short.
struct ClipPartition {
  std::int64_t clip_len = 0;
  Segments boundaries;

  std::size_t num_clips() const { return boundaries.size(); }
  /// 0-based clip index of 0-based frame i.
  std::size_t clip_of(std::int64_t frame) const {
    return static_cast<std::size_t>(frame / clip_len);
  }
};

/// ceil(s / L) clips; frame i (1-based) lands in clip ceil(i / L).
ClipPartition partition_clips(std::int64_t s, std::int64_t clip_len);

// Motion excitation over the time axis (axis 1) of a (c, s, h, w) feature map.

/// Per-clip temporal mean, (c, num_clips, h, w).
template <typename T>
Var<T> static_features(const Var<T>& x, const ClipPartition& partition);

/// |x_i - static_{clip(i)}| for every frame, (c, s, h, w), nonnegative.
template <typename T>
Var<T> motion_features(const Var<T>& x, const Var<T>& x_static, const ClipPartition& partition);

/// x + sigmoid(x * motion), elementwise.
template <typename T>
Var<T> excite(const Var<T>& x, const Var<T>& motion);

/// Full module: partition, static, motion, excite. Registers no parameters.
template <typename T>
Var<T> mem_forward(const Var<T>& x, std::int64_t clip_len);

/// Trainable tensors owned by the module (always zero).
constexpr std::size_t mem_parameter_count() { return 0; }

}  // namespace motiongait
