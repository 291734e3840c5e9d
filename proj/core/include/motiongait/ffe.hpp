#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "motiongait/ops.hpp"

namespace motiongait {

/// How the global and local branches are merged. Add keeps the height,
/// ConcatH stacks global above local and doubles it.
enum class Fusion { Add, ConcatH };

std::string fusion_name(Fusion f);

/// Fine feature extractor weights: one global 3x3x3 conv plus one independent
/// 3x3x3 conv per horizontal part. Part kernels never share storage.
template <typename T>
struct FfeParams {
  Var<T> global_kernel;
  Var<T> global_bias;
  std::vector<Var<T>> part_kernels;
  std::vector<Var<T>> part_biases;
  Fusion fusion = Fusion::Add;

  std::int64_t num_parts() const { return static_cast<std::int64_t>(part_kernels.size()); }
  std::int64_t in_channels() const { return global_kernel.dim(1); }
  std::int64_t out_channels() const { return global_kernel.dim(0); }

  /// (suffix, tensor) pairs, e.g. ("global.weight", ...), ("part3.bias", ...).
  std::vector<std::pair<std::string, Var<T>>> named_parameters() const;
};

template <typename T>
FfeParams<T> init_ffe_params(std::int64_t c_in, std::int64_t c_out, std::int64_t num_parts,
                             Fusion fusion, std::mt19937_64& rng);

/// Same-padded stride-1 3x3x3 conv over the whole frame.
template <typename T>
Var<T> ffe_global(const Var<T>& x, const FfeParams<T>& params);

/// Splits height into num_parts bands, convolves band k with kernel k only
/// (each band zero-padded on its own), and restacks the bands.
template <typename T>
Var<T> ffe_local(const Var<T>& x, const FfeParams<T>& params);

template <typename T>
Var<T> fuse(const Var<T>& global, const Var<T>& local, Fusion mode);

struct MgeOptions {
  std::int64_t clip_len = 2;
  bool use_mem = true;
  /// When false the local branch is replaced by the global one in fusion.
  bool use_local = true;
};

/// MEM followed by FFE. Variant A (Add) keeps height, variant B (ConcatH) doubles it.
template <typename T>
Var<T> mge_forward(const Var<T>& x, const MgeOptions& options, const FfeParams<T>& params);

}  // namespace motiongait
