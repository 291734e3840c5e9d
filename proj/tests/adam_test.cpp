#include <gtest/gtest.h>

#include <cmath>

#include "motiongait/adam.hpp"
#include "motiongait/error.hpp"
#include "motiongait/ops.hpp"
#include "support.hpp"

using namespace motiongait;
using namespace mgtest;

TEST(Adam, FirstStepMovesByLearningRateAgainstTheGradientSign) {
  std::vector<double> p{1.0, -2.0, 0.5}, g{3.0, -0.01, 100.0}, m(3), v(3);
  adam_update<double>(p, g, m, v, AdamConfig{0.1}, 1);
  EXPECT_NEAR(p[0], 1.0 - 0.1, 1e-7);
  EXPECT_NEAR(p[1], -2.0 + 0.1, 1e-5);
  EXPECT_NEAR(p[2], 0.5 - 0.1, 1e-7);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  std::vector<float> p{1.0f, 2.0f}, g{0.0f, 0.0f}, m(2), v(2);
  for (int t = 1; t <= 10; ++t) adam_update<float>(p, g, m, v, AdamConfig{}, t);
  EXPECT_EQ(p, (std::vector<float>{1.0f, 2.0f}));
}

TEST(Adam, MatchesTextbookRecurrence) {
  // Scalar textbook form with explicit bias-corrected moments.
  std::mt19937_64 rng(1);
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  std::vector<double> p{0.3, -1.2, 2.0, 0.0}, m(4), v(4);
  std::vector<double> rp = p, rm(4), rv(4);
  for (int t = 1; t <= 200; ++t) {
    std::vector<double> g(4);
    for (auto& x : g) x = std::uniform_real_distribution<double>(-2.0, 2.0)(rng);
    adam_update<double>(p, g, m, v, cfg, t);
    for (std::size_t i = 0; i < 4; ++i) {
      rm[i] = cfg.beta1 * rm[i] + (1 - cfg.beta1) * g[i];
      rv[i] = cfg.beta2 * rv[i] + (1 - cfg.beta2) * g[i] * g[i];
      const double mh = rm[i] / (1 - std::pow(cfg.beta1, t));
      const double vh = rv[i] / (1 - std::pow(cfg.beta2, t));
      rp[i] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
  }
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(p[i], rp[i], 1e-7);
}

TEST(Adam, MinimizesAQuadratic) {
  auto x = Var<double>::leaf(Tensor<double>(Shape{2}, std::vector<double>{3.0, -4.0}), true);
  Adam<double> opt({x}, AdamConfig{0.05});
  for (int i = 0; i < 2000; ++i) {
    opt.zero_grad();
    backward(sum(mul(x, x)));
    opt.step();
  }
  EXPECT_NEAR(x.value()[0], 0.0, 1e-2);
  EXPECT_NEAR(x.value()[1], 0.0, 1e-2);
  EXPECT_EQ(opt.steps(), 2000);
}

TEST(Adam, ParametersWithoutGradientsAreTreatedAsZero) {
  auto a = Var<double>::leaf(Tensor<double>(Shape{1}, 1.0), true);
  auto b = Var<double>::leaf(Tensor<double>(Shape{1}, 1.0), true);
  Adam<double> opt({a, b}, AdamConfig{0.1});
  backward(sum(mul(a, a)));
  opt.step();
  EXPECT_NEAR(a.value()[0], 0.9, 1e-7);
  EXPECT_EQ(b.value()[0], 1.0);
}

TEST(Adam, StateSizeMismatchIsAContractError) {
  std::vector<double> p(3), g(2), m(3), v(3);
  EXPECT_THROW(adam_update<double>(p, g, m, v, AdamConfig{}, 1), ContractError);
  std::vector<double> g3(3);
  EXPECT_THROW(adam_update<double>(p, g3, m, v, AdamConfig{}, 0), ContractError);
  auto x = Var<double>::leaf(Tensor<double>(Shape{2}), true);
  Adam<double> opt({x}, AdamConfig{});
  EXPECT_THROW(opt.restore(1, {Tensor<double>(Shape{3})}, {Tensor<double>(Shape{2})}), ContractError);
  EXPECT_THROW(opt.restore(1, {}, {}), ContractError);
}

TEST(Adam, RestoreResumesTheSameTrajectory) {
  auto run = [](int steps, Adam<double>* resume_from, Var<double> x) {
    Adam<double> opt({x}, AdamConfig{0.05});
    if (resume_from) opt.restore(resume_from->steps(), resume_from->first_moments(), resume_from->second_moments());
    for (int i = 0; i < steps; ++i) {
      opt.zero_grad();
      backward(sum(mul(mul(x, x), x)));
      opt.step();
    }
    return opt;
  };
  auto x1 = Var<double>::leaf(Tensor<double>(Shape{1}, 2.0), true);
  run(20, nullptr, x1);
  auto x2 = Var<double>::leaf(Tensor<double>(Shape{1}, 2.0), true);
  auto half = run(10, nullptr, x2);
  run(10, &half, x2);
  EXPECT_EQ(x1.value()[0], x2.value()[0]);
}
