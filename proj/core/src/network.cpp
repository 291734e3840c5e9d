#include "motiongait/network.hpp"

#include <string>

#include "motiongait/init.hpp"
#include "motiongait/mem.hpp"

namespace motiongait {

namespace {

std::int64_t stem_height(const NetworkConfig& c) { return (c.input_height + 2 - 3) / c.stem_stride + 1; }
std::int64_t stem_width(const NetworkConfig& c) { return (c.input_width + 2 - 3) / c.stem_stride + 1; }

bool pool_after(const NetworkConfig& c, std::int64_t block) {
  return c.spatial_pool && block == 0 && c.num_mge_blocks > 1;
}

}  // namespace

std::vector<std::int64_t> NetworkConfig::mge_input_heights() const {
  std::vector<std::int64_t> heights;
  std::int64_t h = stem_height(*this);
  for (std::int64_t b = 0; b < num_mge_blocks; ++b) {
    heights.push_back(h);
    if (pool_after(*this, b)) h /= 2;
  }
  return heights;
}

std::int64_t NetworkConfig::num_strips() const { return 2 * mge_input_heights().back(); }

void NetworkConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (num_mge_blocks < 1) fail("model.mge_blocks must be >= 1");
  if (static_cast<std::int64_t>(stage_channels.size()) != num_mge_blocks + 1) {
    fail("model.channels needs num_mge_blocks + 1 = " + std::to_string(num_mge_blocks + 1) +
         " entries, got " + std::to_string(stage_channels.size()));
  }
  for (const auto c : stage_channels) {
    if (c < 1) fail("model.channels entries must be positive");
  }
  if (clip_len < 1) fail("mem.clip_len must be >= 1");
  if (num_parts < 1) fail("ffe.num_parts must be >= 1");
  if (embed_dim < 1) fail("model.embed_dim must be >= 1");
  if (num_classes < 1) fail("model.num_classes must be >= 1");
  if (lta_kernel_t < 1 || lta_stride_t < 1) fail("lta.kernel_t and lta.stride_t must be >= 1");
  if (!(gem_p_init > 0.0)) fail("gem.p_init must be positive");
  if (stem_stride < 1) fail("model.stem_stride must be >= 1");
  if (input_height < 3 || input_width < 3) fail("input frames must be at least 3x3");
  std::int64_t w = stem_width(*this);
  const auto heights = mge_input_heights();
  for (std::size_t b = 0; b < heights.size(); ++b) {
    if (heights[b] < 1 || heights[b] % num_parts != 0) {
      fail("ffe.num_parts = " + std::to_string(num_parts) + " does not divide height " +
           std::to_string(heights[b]) + " at MGE block " + std::to_string(b));
    }
    if (pool_after(*this, static_cast<std::int64_t>(b))) {
      if (heights[b] < 2 || w < 2) fail("spatial pool needs height and width >= 2");
      w /= 2;
    }
  }
}

NetworkConfig desk_profile() {
  NetworkConfig c;
  c.stage_channels = {8, 16, 32};
  c.num_mge_blocks = 2;
  c.embed_dim = 32;
  c.stem_stride = 2;
  return c;
}

NetworkConfig full_profile() {
  NetworkConfig c;
  c.stage_channels = {32, 64, 128};
  c.num_mge_blocks = 2;
  c.embed_dim = 128;
  c.stem_stride = 1;
  return c;
}

template <typename T>
std::vector<std::pair<std::string, Var<T>>> NetworkParams<T>::named_parameters() const {
  std::vector<std::pair<std::string, Var<T>>> out;
  out.emplace_back("stem.weight", stem_weight);
  out.emplace_back("stem.bias", stem_bias);
  out.emplace_back("lta.weight", lta_weight);
  out.emplace_back("lta.bias", lta_bias);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (auto& [name, v] : blocks[b].named_parameters()) {
      out.emplace_back("mge" + std::to_string(b) + "." + name, v);
    }
  }
  out.emplace_back("gem.p", gem_p);
  out.emplace_back("head.fc", fc_weight);
  out.emplace_back("head.bn.gamma", bn_gamma);
  out.emplace_back("head.bn.beta", bn_beta);
  out.emplace_back("head.classifier", classifier);
  return out;
}

template <typename T>
std::int64_t NetworkParams<T>::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& [name, v] : named_parameters()) n += v.value().numel();
  return n;
}

std::int64_t expected_parameter_count(const NetworkConfig& c) {
  c.validate();
  const auto& ch = c.stage_channels;
  std::int64_t n = ch[0] * 1 * 27 + ch[0];                     // stem
  n += ch[0] * ch[0] * c.lta_kernel_t + ch[0];                 // lta
  for (std::int64_t b = 0; b < c.num_mge_blocks; ++b) {        // global + parts
    const std::int64_t per_conv = ch[b + 1] * ch[b] * 27 + ch[b + 1];
    n += (1 + c.num_parts) * per_conv;
  }
  n += 1;                                                      // gem p
  const std::int64_t strips = c.num_strips();
  n += strips * c.final_channels() * c.embed_dim;              // strip fc
  n += 2 * strips * c.embed_dim;                               // bn affine
  n += strips * c.embed_dim * c.num_classes;                   // classifier
  return n;
}

template <typename T>
NetworkParams<T> init_params(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const auto& ch = config.stage_channels;
  NetworkParams<T> p;
  p.stem_weight = Var<T>::leaf(he_uniform<T>(Shape{ch[0], 1, 3, 3, 3}, 27, rng), true);
  p.stem_bias = Var<T>::leaf(Tensor<T>(Shape{ch[0]}), true);
  p.lta_weight = Var<T>::leaf(
      he_uniform<T>(Shape{ch[0], ch[0], config.lta_kernel_t, 1, 1}, ch[0] * config.lta_kernel_t, rng), true);
  p.lta_bias = Var<T>::leaf(Tensor<T>(Shape{ch[0]}), true);
  for (std::int64_t b = 0; b < config.num_mge_blocks; ++b) {
    const Fusion f = (b + 1 == config.num_mge_blocks) ? Fusion::ConcatH : Fusion::Add;
    p.blocks.push_back(init_ffe_params<T>(ch[b], ch[b + 1], config.num_parts, f, rng));
  }
  p.gem_p = Var<T>::leaf(Tensor<T>::scalar(static_cast<T>(config.gem_p_init)), true);
  const std::int64_t strips = config.num_strips();
  const std::int64_t d = config.embed_dim;
  p.fc_weight = Var<T>::leaf(he_uniform<T>(Shape{strips, config.final_channels(), d}, config.final_channels(), rng), true);
  p.bn_gamma = Var<T>::leaf(Tensor<T>(Shape{strips * d}, T(1)), true);
  p.bn_beta = Var<T>::leaf(Tensor<T>(Shape{strips * d}), true);
  p.bn_state.running_mean = Tensor<T>(Shape{strips * d}, T(0));
  p.bn_state.running_var = Tensor<T>(Shape{strips * d}, T(1));
  p.classifier = Var<T>::leaf(he_uniform<T>(Shape{strips, d, config.num_classes}, d, rng), true);
  return p;
}

template <typename T>
Var<T> lta(const Var<T>& x, const Var<T>& weight, const Var<T>& bias, const NetworkConfig& config) {
  if (x.shape().size() != 4) throw DimensionError("lta: expected (c, s, h, w), got " + shape_str(x.shape()));
  if (x.dim(1) < config.lta_kernel_t) {
    throw DomainError("sequence too short: " + std::to_string(x.dim(1)) + " frames, temporal aggregation needs " +
                      std::to_string(config.lta_kernel_t));
  }
  Conv3dOptions o;
  o.stride = {config.lta_stride_t, 1, 1};
  o.padding = {0, 0, 0};
  return conv3d(x, weight, bias, o);
}

template <typename T>
Var<T> sequence_features(const Tensor<T>& frames, const NetworkConfig& config,
                         const NetworkParams<T>& params) {
  const Shape& s = frames.shape();
  if (s.size() != 4 || s[0] != 1 || s[2] != config.input_height || s[3] != config.input_width) {
    throw IngestionError("expected a (1, s, " + std::to_string(config.input_height) + ", " +
                         std::to_string(config.input_width) + ") sequence, got " + shape_str(s));
  }
  if (s[1] < config.lta_kernel_t) {
    throw DomainError("sequence too short: " + std::to_string(s[1]) + " frames, temporal aggregation needs " +
                      std::to_string(config.lta_kernel_t));
  }
  Conv3dOptions stem;
  stem.stride = {1, config.stem_stride, config.stem_stride};
  Var<T> h = conv3d(Var<T>::leaf(frames), params.stem_weight, params.stem_bias, stem);
  h = lta(h, params.lta_weight, params.lta_bias, config);
  MgeOptions opts;
  opts.clip_len = config.clip_len;
  opts.use_mem = config.use_mem;
  opts.use_local = config.use_local;
  for (std::int64_t b = 0; b < config.num_mge_blocks; ++b) {
    h = mge_forward(h, opts, params.blocks[static_cast<std::size_t>(b)]);
    if (pool_after(config, b)) h = max_pool3d(h, {1, 2, 2});
  }
  h = reduce_max(h, 1);          // temporal pooling -> (c, h, w)
  return gem_pool(h, params.gem_p);  // -> (c, strips)
}

template <typename T>
ForwardOutput<T> forward(const std::vector<Tensor<T>>& batch, const NetworkConfig& config,
                         NetworkParams<T>& params, Mode mode) {
  if (batch.empty()) throw ContractError("forward: empty batch");
  std::vector<Var<T>> feats;
  feats.reserve(batch.size());
  for (const auto& seq : batch) feats.push_back(sequence_features(seq, config, params));
  const auto nb = static_cast<std::int64_t>(batch.size());
  const std::int64_t strips = config.num_strips();
  const std::int64_t d = config.embed_dim;
  ForwardOutput<T> out;
  // (B, c, strips) -> (strips, B, c) -> per-strip FC -> (strips, B, d)
  out.embeddings = bmm(permute(stack(feats), {2, 0, 1}), params.fc_weight);
  Var<T> flat = reshape(permute(out.embeddings, {1, 0, 2}), Shape{nb, strips * d});
  flat = batchnorm(flat, params.bn_gamma, params.bn_beta, params.bn_state, mode == Mode::Train);
  out.normalized = permute(reshape(flat, Shape{nb, strips, d}), {1, 0, 2});
  out.logits = bmm(out.normalized, params.classifier);
  return out;
}

template <typename T>
std::vector<std::vector<float>> descriptors(const Tensor<T>& embeddings) {
  if (embeddings.rank() != 3) throw DimensionError("descriptors: expected (strips, batch, d)");
  const std::int64_t strips = embeddings.dim(0), nb = embeddings.dim(1), d = embeddings.dim(2);
  std::vector<std::vector<float>> out(static_cast<std::size_t>(nb));
  for (std::int64_t b = 0; b < nb; ++b) {
    auto& row = out[static_cast<std::size_t>(b)];
    row.reserve(static_cast<std::size_t>(strips * d));
    for (std::int64_t k = 0; k < strips; ++k)
      for (std::int64_t j = 0; j < d; ++j) row.push_back(static_cast<float>(embeddings[(k * nb + b) * d + j]));
  }
  return out;
}

#define MOTIONGAIT_INSTANTIATE_NET(T)                                                            \
  template struct NetworkParams<T>;                                                               \
  template NetworkParams<T> init_params(const NetworkConfig&, std::uint64_t);                     \
  template Var<T> lta(const Var<T>&, const Var<T>&, const Var<T>&, const NetworkConfig&);         \
  template Var<T> sequence_features(const Tensor<T>&, const NetworkConfig&, const NetworkParams<T>&); \
  template ForwardOutput<T> forward(const std::vector<Tensor<T>>&, const NetworkConfig&,          \
                                    NetworkParams<T>&, Mode);                                     \
  template std::vector<std::vector<float>> descriptors(const Tensor<T>&);

MOTIONGAIT_INSTANTIATE_NET(float)
MOTIONGAIT_INSTANTIATE_NET(double)

}  // namespace motiongait
