#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "motiongait/ffe.hpp"
#include "motiongait/ops.hpp"

namespace motiongait {

/// Architecture knobs. stage_channels[0] is the stem/LTA width and
/// stage_channels[i + 1] the output width of MGE block i.
struct NetworkConfig {
  std::vector<std::int64_t> stage_channels{8, 16, 32};
  std::int64_t num_mge_blocks = 2;
  std::int64_t clip_len = 2;
  std::int64_t num_parts = 8;
  std::int64_t embed_dim = 32;
  std::int64_t num_classes = 74;
  std::int64_t lta_kernel_t = 3;
  std::int64_t lta_stride_t = 3;
  double gem_p_init = 6.5;
  /// Spatial stride of the stem convolution (1 keeps the full 64x44 grid).
  std::int64_t stem_stride = 1;
  /// 1x2x2 max pool between the first and second MGE blocks.
  bool spatial_pool = true;
  bool use_mem = true;
  bool use_local = true;
  std::int64_t input_height = 64;
  std::int64_t input_width = 44;

  /// Throws ConfigError on any violated invariant (channel list length,
  /// part divisibility at every MGE input, positive extents).
  void validate() const;

  /// Height of each MGE block input, in block order.
  std::vector<std::int64_t> mge_input_heights() const;
  /// Horizontal strips in the final descriptor (the B block output height).
  std::int64_t num_strips() const;
  std::int64_t final_channels() const { return stage_channels.back(); }
  /// Length of the concatenated test-time descriptor.
  std::int64_t descriptor_dim() const { return num_strips() * embed_dim; }
};

/// Widths and depth for the two stock profiles.
NetworkConfig desk_profile();
NetworkConfig full_profile();

template <typename T>
struct NetworkParams {
  Var<T> stem_weight, stem_bias;
  Var<T> lta_weight, lta_bias;
  std::vector<FfeParams<T>> blocks;
  Var<T> gem_p;
  Var<T> fc_weight;   // (strips, c_final, d), one matrix per strip
  Var<T> bn_gamma, bn_beta;  // (strips * d)
  BatchNormState<T> bn_state;
  Var<T> classifier;  // (strips, d, num_classes)

  /// Trainable tensors with stable dotted names, in a fixed order.
  std::vector<std::pair<std::string, Var<T>>> named_parameters() const;
  /// Total trainable scalars.
  std::int64_t parameter_count() const;
};

/// Closed-form trainable scalar count for a config.
std::int64_t expected_parameter_count(const NetworkConfig& config);

template <typename T>
NetworkParams<T> init_params(const NetworkConfig& config, std::uint64_t seed);

enum class Mode { Train, Eval };

template <typename T>
struct ForwardOutput {
  Var<T> embeddings;  // pre-BN, (strips, batch, d)
  Var<T> normalized;  // post-BN, (strips, batch, d)
  Var<T> logits;      // (strips, batch, num_classes)
};

/// Stem, LTA and the MGE stack for one (1, s, h, w) sequence, pooled over
/// time and width to (c_final, strips).
template <typename T>
Var<T> sequence_features(const Tensor<T>& frames, const NetworkConfig& config,
                         const NetworkParams<T>& params);

/// Batch forward. Train mode normalizes with batch statistics and updates the
/// running estimates; Eval uses the running estimates.
template <typename T>
ForwardOutput<T> forward(const std::vector<Tensor<T>>& batch, const NetworkConfig& config,
                         NetworkParams<T>& params, Mode mode);

/// Local temporal aggregation: (kernel_t, 1, 1) conv, stride (stride_t, 1, 1), no padding.
template <typename T>
Var<T> lta(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const NetworkConfig& config);

/// Strip-major embeddings (strips, batch, d) -> per-sample descriptors, each
/// the concatenation of all strips.
template <typename T>
std::vector<std::vector<float>> descriptors(const Tensor<T>& embeddings);

}  // namespace motiongait
