#pragma once

#include <cstdint>
#include <vector>

#include "motiongait/network.hpp"

namespace motiongait {

/// Batch-all triplet loss. `embeddings` is (strips, batch, d) or (batch, d).
/// For each strip, every (anchor, positive, negative) triple contributes
/// max(0, d(a,p) - d(a,n) + margin) with Euclidean d; the strip loss is the
/// mean over triples with strictly positive loss (0 when none), and the
/// result is the mean over strips.
template <typename T>
Var<T> batch_all_triplet(const Var<T>& embeddings, const std::vector<std::int64_t>& labels, T margin);

template <typename T>
struct JointLoss {
  Var<T> total;
  T triplet = T(0);
  T cross_entropy = T(0);
};

/// Unweighted sum of the strip-mean triplet loss on pre-BN embeddings and the
/// strip-mean cross entropy on the per-strip classifier logits.
template <typename T>
JointLoss<T> joint_loss(const ForwardOutput<T>& out, const std::vector<std::int64_t>& labels, T margin);

}  // namespace motiongait
