#include "motiongait/ffe.hpp"

#include "motiongait/init.hpp"
#include "motiongait/mem.hpp"

namespace motiongait {

std::string fusion_name(Fusion f) { return f == Fusion::Add ? "A" : "B"; }

template <typename T>
std::vector<std::pair<std::string, Var<T>>> FfeParams<T>::named_parameters() const {
  std::vector<std::pair<std::string, Var<T>>> out;
  out.emplace_back("global.weight", global_kernel);
  out.emplace_back("global.bias", global_bias);
  for (std::size_t k = 0; k < part_kernels.size(); ++k) {
    out.emplace_back("part" + std::to_string(k) + ".weight", part_kernels[k]);
    out.emplace_back("part" + std::to_string(k) + ".bias", part_biases[k]);
  }
  return out;
}

template <typename T>
FfeParams<T> init_ffe_params(std::int64_t c_in, std::int64_t c_out, std::int64_t num_parts,
                             Fusion fusion, std::mt19937_64& rng) {
  if (c_in < 1 || c_out < 1) throw ConfigError("FFE channel counts must be positive");
  if (num_parts < 1) throw ConfigError("ffe.num_parts must be >= 1");
  const Shape kshape{c_out, c_in, 3, 3, 3};
  const std::int64_t fan_in = c_in * 27;
  FfeParams<T> p;
  p.fusion = fusion;
  p.global_kernel = Var<T>::leaf(he_uniform<T>(kshape, fan_in, rng), true);
  p.global_bias = Var<T>::leaf(Tensor<T>(Shape{c_out}), true);
  for (std::int64_t k = 0; k < num_parts; ++k) {
    p.part_kernels.push_back(Var<T>::leaf(he_uniform<T>(kshape, fan_in, rng), true));
    p.part_biases.push_back(Var<T>::leaf(Tensor<T>(Shape{c_out}), true));
  }
  return p;
}

template <typename T>
Var<T> ffe_global(const Var<T>& x, const FfeParams<T>& params) {
  return conv3d(x, params.global_kernel, params.global_bias);
}

template <typename T>
Var<T> ffe_local(const Var<T>& x, const FfeParams<T>& params) {
  const auto parts = split_h(x, params.num_parts());
  std::vector<Var<T>> outs;
  outs.reserve(parts.size());
  for (std::size_t k = 0; k < parts.size(); ++k) {
    outs.push_back(conv3d(parts[k], params.part_kernels[k], params.part_biases[k]));
  }
  return concat_h(outs);
}

template <typename T>
Var<T> fuse(const Var<T>& global, const Var<T>& local, Fusion mode) {
  if (global.shape() != local.shape()) {
    throw DimensionError("fuse: global " + shape_str(global.shape()) + " vs local " +
                         shape_str(local.shape()));
  }
  if (mode == Fusion::Add) return add(global, local);
  return concat_h(std::vector<Var<T>>{global, local});
}

template <typename T>
Var<T> mge_forward(const Var<T>& x, const MgeOptions& options, const FfeParams<T>& params) {
  const Var<T> excited = options.use_mem ? mem_forward(x, options.clip_len) : x;
  const Var<T> global = ffe_global(excited, params);
  const Var<T> local = options.use_local ? ffe_local(excited, params) : global;
  return fuse(global, local, params.fusion);
}

#define MOTIONGAIT_INSTANTIATE_FFE(T)                                                        \
  template struct FfeParams<T>;                                                               \
  template FfeParams<T> init_ffe_params(std::int64_t, std::int64_t, std::int64_t, Fusion,     \
                                        std::mt19937_64&);                                    \
  template Var<T> ffe_global(const Var<T>&, const FfeParams<T>&);                             \
  template Var<T> ffe_local(const Var<T>&, const FfeParams<T>&);                              \
  template Var<T> fuse(const Var<T>&, const Var<T>&, Fusion);                                 \
  template Var<T> mge_forward(const Var<T>&, const MgeOptions&, const FfeParams<T>&);

MOTIONGAIT_INSTANTIATE_FFE(float)
MOTIONGAIT_INSTANTIATE_FFE(double)

}  // namespace motiongait
