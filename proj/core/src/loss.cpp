#include "motiongait/loss.hpp"

#include <cmath>
#include <set>
#include <string>

namespace motiongait {

namespace {

// Keeps the distance differentiable at coincident points.
template <typename T>
constexpr T kDistanceEps = T(1e-12);

struct ActiveTriple {
  std::int64_t strip, anchor, positive, negative;
};

}  // namespace

template <typename T>
Var<T> batch_all_triplet(const Var<T>& embeddings, const std::vector<std::int64_t>& labels, T margin) {
  const Shape& s = embeddings.shape();
  if (s.size() != 2 && s.size() != 3) {
    throw DimensionError("batch_all_triplet: expected (strips, batch, d) or (batch, d), got " + shape_str(s));
  }
  const std::int64_t strips = s.size() == 3 ? s[0] : 1;
  const std::int64_t nb = s.size() == 3 ? s[1] : s[0];
  const std::int64_t d = s.back();
  if (static_cast<std::int64_t>(labels.size()) != nb) {
    throw DimensionError("batch_all_triplet: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(nb));
  }
  if (std::set<std::int64_t>(labels.begin(), labels.end()).size() < 2) {
    throw ContractError("batch_all_triplet: batch needs at least two classes");
  }
  const T* e = embeddings.value().ptr();
  std::vector<T> dist(static_cast<std::size_t>(strips * nb * nb), T(0));
  for (std::int64_t k = 0; k < strips; ++k)
    for (std::int64_t i = 0; i < nb; ++i)
      for (std::int64_t j = 0; j < nb; ++j) {
        const T* a = e + (k * nb + i) * d;
        const T* b = e + (k * nb + j) * d;
        T acc = T(0);
        for (std::int64_t q = 0; q < d; ++q) acc += (a[q] - b[q]) * (a[q] - b[q]);
        dist[static_cast<std::size_t>((k * nb + i) * nb + j)] = std::sqrt(acc + kDistanceEps<T>);
      }
  auto D = [&](std::int64_t k, std::int64_t i, std::int64_t j) {
    return dist[static_cast<std::size_t>((k * nb + i) * nb + j)];
  };

  std::vector<ActiveTriple> active;
  std::vector<std::int64_t> active_per_strip(static_cast<std::size_t>(strips), 0);
  T total = T(0);
  for (std::int64_t k = 0; k < strips; ++k) {
    T strip_sum = T(0);
    for (std::int64_t a = 0; a < nb; ++a)
      for (std::int64_t p = 0; p < nb; ++p) {
        if (p == a || labels[a] != labels[p]) continue;
        for (std::int64_t n = 0; n < nb; ++n) {
          if (labels[n] == labels[a]) continue;
          const T l = D(k, a, p) - D(k, a, n) + margin;
          if (l > T(0)) {
            strip_sum += l;
            active.push_back({k, a, p, n});
            ++active_per_strip[static_cast<std::size_t>(k)];
          }
        }
      }
    const auto cnt = active_per_strip[static_cast<std::size_t>(k)];
    if (cnt > 0) total += strip_sum / static_cast<T>(cnt);
  }
  total /= static_cast<T>(strips);

  return make_result<T>(Tensor<T>::scalar(total), {embeddings},
                        [strips, nb, d, dist = std::move(dist), active = std::move(active),
                         active_per_strip = std::move(active_per_strip)](Node<T>& self) {
    const T* e = self.parents[0]->value.ptr();
    T* g = self.parents[0]->grad_buffer().ptr();
    const T go = self.grad[0];
    // dL/dD accumulated per pair, then pushed through the distance.
    std::vector<T> gd(dist.size(), T(0));
    for (const auto& t : active) {
      const T w = go / (static_cast<T>(strips) * static_cast<T>(active_per_strip[static_cast<std::size_t>(t.strip)]));
      gd[static_cast<std::size_t>((t.strip * nb + t.anchor) * nb + t.positive)] += w;
      gd[static_cast<std::size_t>((t.strip * nb + t.anchor) * nb + t.negative)] -= w;
    }
    for (std::int64_t k = 0; k < strips; ++k)
      for (std::int64_t i = 0; i < nb; ++i)
        for (std::int64_t j = 0; j < nb; ++j) {
          const auto idx = static_cast<std::size_t>((k * nb + i) * nb + j);
          if (gd[idx] == T(0)) continue;
          const T c = gd[idx] / dist[idx];
          const T* a = e + (k * nb + i) * d;
          const T* b = e + (k * nb + j) * d;
          T* ga = g + (k * nb + i) * d;
          T* gb = g + (k * nb + j) * d;
          for (std::int64_t q = 0; q < d; ++q) {
            const T diff = c * (a[q] - b[q]);
            ga[q] += diff;
            gb[q] -= diff;
          }
        }
  }, "batch_all_triplet");
}

template <typename T>
JointLoss<T> joint_loss(const ForwardOutput<T>& out, const std::vector<std::int64_t>& labels, T margin) {
  const Var<T> triplet = batch_all_triplet(out.embeddings, labels, margin);
  const Shape& ls = out.logits.shape();
  if (ls.size() != 3) throw DimensionError("joint_loss: logits must be (strips, batch, classes)");
  const std::int64_t strips = ls[0], nb = ls[1];
  if (static_cast<std::int64_t>(labels.size()) != nb) throw DimensionError("joint_loss: label count mismatch");
  std::vector<std::int64_t> tiled;
  tiled.reserve(static_cast<std::size_t>(strips * nb));
  for (std::int64_t k = 0; k < strips; ++k) tiled.insert(tiled.end(), labels.begin(), labels.end());
  const Var<T> ce = softmax_cross_entropy(reshape(out.logits, Shape{strips * nb, ls[2]}), tiled);
  JointLoss<T> j;
  j.triplet = triplet.value()[0];
  j.cross_entropy = ce.value()[0];
  j.total = add(triplet, ce);
  return j;
}

template Var<float> batch_all_triplet(const Var<float>&, const std::vector<std::int64_t>&, float);
template Var<double> batch_all_triplet(const Var<double>&, const std::vector<std::int64_t>&, double);
template JointLoss<float> joint_loss(const ForwardOutput<float>&, const std::vector<std::int64_t>&, float);
template JointLoss<double> joint_loss(const ForwardOutput<double>&, const std::vector<std::int64_t>&, double);

}  // namespace motiongait
