#include <gtest/gtest.h>

#include "law_suites.hpp"
#include "motiongait/error.hpp"

using namespace motiongait;
using namespace mgtest;

TEST(Ffe, PartKernelsAreDistinctTensors) {
  std::mt19937_64 rng(1);
  const auto p = init_ffe_params<float>(2, 3, 4, Fusion::Add, rng);
  ASSERT_EQ(p.num_parts(), 4);
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      EXPECT_NE(p.part_kernels[a].node(), p.part_kernels[b].node());
      EXPECT_NE(p.part_kernels[a].value(), p.part_kernels[b].value());
    }
}

TEST(Ffe, LocalBranchIsPartLocal) { EXPECT_TRUE(ffe_locality_law().passed()); }
TEST(Ffe, VariantAKeepsHeightVariantBDoublesIt) { EXPECT_TRUE(ffe_height_law().passed()); }
TEST(Ffe, SinglePartEqualsGlobalConvolution) { EXPECT_TRUE(ffe_single_part_law().passed()); }

TEST(Ffe, EachBandIsPaddedOnItsOwn) {
  // Ones everywhere; a ones kernel over a 3x3x3 window counts in-bounds taps,
  // so band edges see the zero padding of their own band.
  auto x = Var<double>::leaf(Tensor<double>(Shape{1, 1, 4, 1}, 1.0));
  std::mt19937_64 rng(2);
  auto p = init_ffe_params<double>(1, 1, 2, Fusion::Add, rng);
  for (auto& k : p.part_kernels) k = Var<double>::leaf(Tensor<double>(Shape{1, 1, 3, 3, 3}, 1.0));
  const auto y = ffe_local(x, p).value();
  EXPECT_EQ(y.vec(), (std::vector<double>{2, 2, 2, 2}));
  p.global_kernel = Var<double>::leaf(Tensor<double>(Shape{1, 1, 3, 3, 3}, 1.0));
  EXPECT_EQ(ffe_global(x, p).value().vec(), (std::vector<double>{2, 3, 3, 2}));
}

TEST(Ffe, IndivisibleHeightIsAConfigError) {
  std::mt19937_64 rng(3);
  const auto p = init_ffe_params<double>(1, 1, 3, Fusion::Add, rng);
  EXPECT_THROW(ffe_local(Var<double>::leaf(Tensor<double>(Shape{1, 1, 4, 2})), p), ConfigError);
}

TEST(Ffe, ConcatFusionStacksGlobalAboveLocal) {
  auto g = Var<double>::leaf(Tensor<double>(Shape{1, 1, 1, 2}, 1.0));
  auto l = Var<double>::leaf(Tensor<double>(Shape{1, 1, 1, 2}, 2.0));
  EXPECT_EQ(fuse(g, l, Fusion::ConcatH).value().vec(), (std::vector<double>{1, 1, 2, 2}));
  EXPECT_EQ(fuse(g, l, Fusion::Add).value().vec(), (std::vector<double>{3, 3}));
}

TEST(Ffe, NoLocalToggleFusesGlobalWithItself) {
  std::mt19937_64 rng(4);
  const auto p = init_ffe_params<double>(1, 2, 2, Fusion::Add, rng);
  const auto x = random_var({1, 2, 4, 3}, rng);
  MgeOptions opt;
  opt.use_mem = false;
  opt.use_local = false;
  const auto y = mge_forward(x, opt, p).value();
  const auto g = ffe_global(x, p).value();
  for (std::int64_t i = 0; i < y.numel(); ++i) EXPECT_DOUBLE_EQ(y[i], 2.0 * g[i]);
}

TEST(Ffe, TrainingStepOnOnePartLeavesOtherPartKernelsUntouched) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::int64_t parts = 4;
    auto p = init_ffe_params<float>(2, 2, parts, Fusion::Add, rng);
    std::vector<Var<float>> params;
    for (auto& [name, v] : p.named_parameters()) params.push_back(v);
    std::vector<Tensor<float>> before;
    for (const auto& v : params) before.push_back(v.value());
    Adam<float> adam(params, AdamConfig{0.01});

    const auto k = rand_int(rng, 0, parts - 1);
    const auto x = random_var<float>({2, 3, 8, 3}, rng);
    const auto bands = split_h(ffe_local(x, p), parts);
    backward(sum(mul(bands[static_cast<std::size_t>(k)], bands[static_cast<std::size_t>(k)])));
    adam.step();

    for (std::int64_t j = 0; j < parts; ++j) {
      const bool same = p.part_kernels[j].value() == before[static_cast<std::size_t>(2 + 2 * j)];
      EXPECT_EQ(same, j != k) << "part " << j << " (trained part " << k << ")";
    }
    EXPECT_EQ(p.global_kernel.value(), before[0]);
  }
}
