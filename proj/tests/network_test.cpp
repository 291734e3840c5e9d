#include <gtest/gtest.h>

#include "motiongait/error.hpp"
#include "motiongait/loss.hpp"
#include "motiongait/mem.hpp"
#include "motiongait/network.hpp"
#include "support.hpp"

using namespace motiongait;
using namespace mgtest;

namespace {

NetworkConfig trace_config() {
  NetworkConfig c;
  c.stage_channels = {4, 8, 16};
  c.num_mge_blocks = 2;
  c.num_parts = 4;
  c.embed_dim = 16;
  c.num_classes = 5;
  c.stem_stride = 1;
  return c;
}

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.stage_channels = {2, 2, 2};
  c.num_mge_blocks = 2;
  c.num_parts = 2;
  c.embed_dim = 3;
  c.num_classes = 3;
  c.stem_stride = 1;
  c.input_height = 8;
  c.input_width = 8;
  return c;
}

template <typename T>
std::vector<Tensor<T>> random_batch(const NetworkConfig& c, std::size_t n, std::int64_t s, std::mt19937_64& rng) {
  std::vector<Tensor<T>> b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(random_tensor<T>({1, s, c.input_height, c.input_width}, rng, 0.0, 1.0));
  return b;
}

}  // namespace

TEST(Network, ShapeTraceThroughEveryStage) {
  const auto c = trace_config();
  auto p = init_params<float>(c, 1);
  std::mt19937_64 rng(2);
  const auto frames = random_tensor<float>({1, 30, 64, 44}, rng, 0.0, 1.0);

  Conv3dOptions stem;
  auto h = conv3d(Var<float>::leaf(frames), p.stem_weight, p.stem_bias, stem);
  EXPECT_EQ(h.shape(), (Shape{4, 30, 64, 44}));
  h = lta(h, p.lta_weight, p.lta_bias, c);
  EXPECT_EQ(h.shape(), (Shape{4, 10, 64, 44}));
  MgeOptions opt;
  h = mge_forward(h, opt, p.blocks[0]);
  EXPECT_EQ(h.shape(), (Shape{8, 10, 64, 44}));
  h = max_pool3d(h, {1, 2, 2});
  EXPECT_EQ(h.shape(), (Shape{8, 10, 32, 22}));
  h = mge_forward(h, opt, p.blocks[1]);
  EXPECT_EQ(h.shape(), (Shape{16, 10, 64, 22}));
  h = reduce_max(h, 1);
  EXPECT_EQ(h.shape(), (Shape{16, 64, 22}));
  h = gem_pool(h, p.gem_p);
  EXPECT_EQ(h.shape(), (Shape{16, 64}));
  EXPECT_EQ(sequence_features(frames, c, p).shape(), (Shape{16, 64}));

  EXPECT_EQ(c.num_strips(), 64);
  const auto out = forward<float>({frames, frames}, c, p, Mode::Eval);
  EXPECT_EQ(out.embeddings.shape(), (Shape{64, 2, 16}));
  EXPECT_EQ(out.normalized.shape(), (Shape{64, 2, 16}));
  EXPECT_EQ(out.logits.shape(), (Shape{64, 2, 5}));
  EXPECT_EQ(descriptors(out.embeddings.value())[0].size(), 64u * 16u);
}

TEST(Network, DescriptorLengthIndependentOfSequenceLength) {
  auto c = tiny_config();
  auto p = init_params<float>(c, 3);
  std::mt19937_64 rng(4);
  for (std::int64_t s = 3; s <= 60; ++s) {
    const auto out = forward<float>(random_batch<float>(c, 1, s, rng), c, p, Mode::Eval);
    ASSERT_EQ(out.embeddings.shape(), (Shape{c.num_strips(), 1, 3})) << "s = " << s;
  }
}

TEST(Network, ParameterCountMatchesClosedForm) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    NetworkConfig c;
    const auto c0 = rand_int(rng, 1, 6);
    c.stage_channels = {c0, rand_int(rng, 1, 6), rand_int(rng, 1, 6)};
    c.num_parts = std::vector<std::int64_t>{1, 2, 4, 8}[static_cast<std::size_t>(rand_int(rng, 0, 3))];
    c.embed_dim = rand_int(rng, 1, 8);
    c.num_classes = rand_int(rng, 1, 10);
    c.lta_kernel_t = rand_int(rng, 1, 4);
    c.stem_stride = rand_int(rng, 1, 2);
    if (c.stem_stride == 2 && c.num_parts == 8) c.num_parts = 4;
    const auto p = init_params<float>(c, 1);
    EXPECT_EQ(p.parameter_count(), expected_parameter_count(c));
  }
}

TEST(Network, ParameterCountOfTinyConfigByHand) {
  // stem 2*27+2 = 56, lta 2*2*3+2 = 14, two blocks of three 3x3x3 convs
  // (2*2*27+2 = 110 each) = 660, gem 1, 8 strips: fc 8*2*3 = 48,
  // bn 2*8*3 = 48, classifier 8*3*3 = 72.
  const auto c = tiny_config();
  EXPECT_EQ(c.num_strips(), 8);
  EXPECT_EQ(init_params<double>(c, 0).parameter_count(), 899);
  EXPECT_EQ(expected_parameter_count(c), 899);
}

TEST(Network, InitAndForwardAreDeterministic) {
  const auto c = tiny_config();
  auto a = init_params<float>(c, 11);
  auto b = init_params<float>(c, 11);
  const auto pa = a.named_parameters(), pb = b.named_parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].first, pb[i].first);
    EXPECT_EQ(pa[i].second.value(), pb[i].second.value()) << pa[i].first;
  }
  EXPECT_NE(init_params<float>(c, 12).stem_weight.value(), a.stem_weight.value());
  std::mt19937_64 rng(6);
  const auto batch = random_batch<float>(c, 3, 9, rng);
  EXPECT_EQ(forward(batch, c, a, Mode::Train).logits.value(), forward(batch, c, b, Mode::Train).logits.value());
}

TEST(Network, EvalModeIsBatchInvariant) {
  const auto c = tiny_config();
  auto p = init_params<double>(c, 7);
  std::mt19937_64 rng(8);
  const auto batch = random_batch<double>(c, 5, 12, rng);
  forward(batch, c, p, Mode::Train);  // move the running statistics away from the defaults
  const auto all = forward(batch, c, p, Mode::Eval);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto single = forward<double>({batch[i]}, c, p, Mode::Eval);
    const auto da = descriptors(all.normalized.value())[i];
    const auto ds = descriptors(single.normalized.value())[0];
    for (std::size_t j = 0; j < da.size(); ++j) EXPECT_NEAR(da[j], ds[j], 1e-6);
  }
}

TEST(Network, TrainModeUsesBatchStatistics) {
  const auto c = tiny_config();
  auto p = init_params<double>(c, 7);
  std::mt19937_64 rng(9);
  const auto batch = random_batch<double>(c, 4, 6, rng);
  const auto before = p.bn_state.running_mean;
  forward(batch, c, p, Mode::Train);
  EXPECT_NE(p.bn_state.running_mean, before);
  const auto frozen = p.bn_state.running_mean;
  forward(batch, c, p, Mode::Eval);
  EXPECT_EQ(p.bn_state.running_mean, frozen);
}

TEST(Network, StripFullyConnectedWeightsAreIndependent) {
  const auto c = tiny_config();
  auto p = init_params<double>(c, 13);
  std::mt19937_64 rng(10);
  const auto out = forward(random_batch<double>(c, 2, 6, rng), c, p, Mode::Train);
  const std::int64_t strips = c.num_strips(), d = c.embed_dim, cf = c.final_channels();
  const std::int64_t k = 5;
  const auto strip_k = split(out.embeddings, 0, std::vector<std::int64_t>{k, 1, strips - k - 1})[1];
  backward(sum(mul(strip_k, strip_k)));
  const auto& g = p.fc_weight.grad();
  bool own_nonzero = false;
  for (std::int64_t s = 0; s < strips; ++s)
    for (std::int64_t i = 0; i < cf * d; ++i) {
      const double v = g[s * cf * d + i];
      if (s == k) own_nonzero = own_nonzero || v != 0.0;
      else EXPECT_EQ(v, 0.0) << "strip " << s;
    }
  EXPECT_TRUE(own_nonzero);
}

TEST(Network, TooShortSequenceIsADomainError) {
  const auto c = tiny_config();
  auto p = init_params<float>(c, 1);
  std::mt19937_64 rng(11);
  EXPECT_THROW(forward(random_batch<float>(c, 1, 2, rng), c, p, Mode::Eval), DomainError);
}

TEST(Network, WrongFrameSizeIsAnIngestionError) {
  const auto c = tiny_config();
  auto p = init_params<float>(c, 1);
  std::mt19937_64 rng(12);
  std::vector<Tensor<float>> batch{random_tensor<float>({1, 6, 8, 7}, rng)};
  EXPECT_THROW(forward(batch, c, p, Mode::Eval), IngestionError);
  EXPECT_THROW(forward(std::vector<Tensor<float>>{}, c, p, Mode::Eval), ContractError);
}

TEST(Network, AveragingTemporalKernelPreservesConstantSequences) {
  NetworkConfig c = tiny_config();
  const std::int64_t ch = 2;
  Tensor<double> w(Shape{ch, ch, 3, 1, 1});
  for (std::int64_t o = 0; o < ch; ++o)
    for (std::int64_t t = 0; t < 3; ++t) w[(o * ch + o) * 3 + t] = 1.0 / 3.0;
  Tensor<double> x(Shape{ch, 9, 2, 2});
  for (std::int64_t a = 0; a < ch; ++a)
    for (std::int64_t f = 0; f < 9; ++f)
      for (std::int64_t y = 0; y < 2; ++y)
        for (std::int64_t q = 0; q < 2; ++q) x.at(a, f, y, q) = 1.5 + a + 0.25 * y - q;
  const auto out = lta(Var<double>::leaf(x), Var<double>::leaf(w), Var<double>::leaf(Tensor<double>(Shape{ch})), c).value();
  ASSERT_EQ(out.shape(), (Shape{ch, 3, 2, 2}));
  for (std::int64_t a = 0; a < ch; ++a)
    for (std::int64_t f = 0; f < 3; ++f)
      for (std::int64_t y = 0; y < 2; ++y)
        for (std::int64_t q = 0; q < 2; ++q) EXPECT_NEAR(out.at(a, f, y, q), x.at(a, 0, y, q), 1e-12);
}

TEST(Network, AblationTogglesKeepShapes) {
  std::mt19937_64 rng(13);
  for (const bool mem : {true, false})
    for (const bool local : {true, false}) {
      auto c = tiny_config();
      c.use_mem = mem;
      c.use_local = local;
      auto p = init_params<float>(c, 2);
      EXPECT_EQ(p.parameter_count(), expected_parameter_count(c));
      const auto out = forward(random_batch<float>(c, 2, 7, rng), c, p, Mode::Eval);
      EXPECT_EQ(out.logits.shape(), (Shape{8, 2, 3}));
    }
}

TEST(Network, InvalidConfigsAreRejected) {
  auto c = tiny_config();
  c.num_parts = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_config();
  c.stage_channels = {2, 2};
  EXPECT_THROW(init_params<float>(c, 0), ConfigError);
  c = tiny_config();
  c.embed_dim = 0;
  EXPECT_THROW(expected_parameter_count(c), ConfigError);
}

TEST(Network, StockProfilesValidate) {
  EXPECT_NO_THROW(desk_profile().validate());
  EXPECT_NO_THROW(full_profile().validate());
  EXPECT_EQ(full_profile().num_strips(), 64);
  EXPECT_EQ(desk_profile().num_strips(), 32);
}
