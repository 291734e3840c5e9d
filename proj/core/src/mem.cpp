#include "motiongait/mem.hpp"

#include <algorithm>
#include <string>

namespace motiongait {

ClipPartition partition_clips(std::int64_t s, std::int64_t clip_len) {
  if (s < 1) throw DomainError("partition_clips: sequence length must be >= 1, got " + std::to_string(s));
  if (clip_len < 1) throw ConfigError("partition_clips: clip length must be >= 1, got " + std::to_string(clip_len));
  ClipPartition p;
  p.clip_len = clip_len;
  for (std::int64_t b = 0; b < s; b += clip_len) p.boundaries.emplace_back(b, std::min(b + clip_len, s));
  return p;
}

namespace {

void require_feature_map(const Shape& shape, const char* op) {
  if (shape.size() != 4) {
    throw DimensionError(std::string(op) + ": expected (c, s, h, w), got " + shape_str(shape));
  }
}

}  // namespace

template <typename T>
Var<T> static_features(const Var<T>& x, const ClipPartition& partition) {
  require_feature_map(x.shape(), "static_features");
  return segment_mean(x, 1, partition.boundaries);
}

template <typename T>
Var<T> motion_features(const Var<T>& x, const Var<T>& x_static, const ClipPartition& partition) {
  require_feature_map(x.shape(), "motion_features");
  return abs(sub(x, segment_repeat(x_static, 1, partition.boundaries)));
}

template <typename T>
Var<T> excite(const Var<T>& x, const Var<T>& motion) {
  return add(x, sigmoid(mul(x, motion)));
}

template <typename T>
Var<T> mem_forward(const Var<T>& x, std::int64_t clip_len) {
  require_feature_map(x.shape(), "mem_forward");
  const ClipPartition partition = partition_clips(x.dim(1), clip_len);
  const Var<T> x_static = static_features(x, partition);
  return excite(x, motion_features(x, x_static, partition));
}

#define MOTIONGAIT_INSTANTIATE_MEM(T)                                                  \
  template Var<T> static_features(const Var<T>&, const ClipPartition&);                 \
  template Var<T> motion_features(const Var<T>&, const Var<T>&, const ClipPartition&);  \
  template Var<T> excite(const Var<T>&, const Var<T>&);                                 \
  template Var<T> mem_forward(const Var<T>&, std::int64_t);

MOTIONGAIT_INSTANTIATE_MEM(float)
MOTIONGAIT_INSTANTIATE_MEM(double)

}  // namespace motiongait
