#include <gtest/gtest.h>

#include <cmath>

#include "motiongait/error.hpp"
#include "motiongait/loss.hpp"
#include "protocol_oracles.hpp"
#include "support.hpp"

using namespace motiongait;
using namespace mgtest;

namespace {

double loss_of(const Tensor<double>& e, const std::vector<std::int64_t>& labels, double margin) {
  return batch_all_triplet(Var<double>::leaf(e), labels, margin).value()[0];
}

}  // namespace

TEST(Triplet, SeparatedOneDimensionalClassesGiveZero) {
  Tensor<double> e(Shape{4, 1}, std::vector<double>{0.0, 0.1, 5.0, 5.1});
  EXPECT_DOUBLE_EQ(loss_of(e, {0, 0, 1, 1}, 0.2), 0.0);
}

TEST(Triplet, OneDimensionalHandExample) {
  // a=0: d(0,1)=1, d(0,2)=1.5 -> 1 - 1.5 + 1 = 0.5
  // a=1: d(1,0)=1, d(1,2)=0.5 -> 1.5
  // a=2 has no positive.
  Tensor<double> e(Shape{3, 1}, std::vector<double>{0.0, 1.0, 1.5});
  EXPECT_NEAR(loss_of(e, {0, 0, 1}, 1.0), (0.5 + 1.5) / 2.0, 1e-9);
}

TEST(Triplet, CollapsedEmbeddingsGiveTheMargin) {
  for (const double m : {0.1, 0.2, 1.0}) EXPECT_NEAR(loss_of(Tensor<double>(Shape{3, 6, 4}, 0.7), pk_labels(3, 2), m), m, 1e-12);
}

TEST(Triplet, MatchesBruteForceForEverySmallBatch) {
  std::mt19937_64 rng(1);
  int cases = 0;
  for (std::int64_t P = 2; P <= 8; ++P)
    for (std::int64_t K = 1; P * K <= 16; ++K)
      for (int rep = 0; rep < 5; ++rep) {
        const auto labels = pk_labels(P, K);
        const auto e = random_tensor({rand_int(rng, 1, 3), P * K, rand_int(rng, 1, 4)}, rng);
        const double m = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        EXPECT_NEAR(loss_of(e, labels, m), brute_triplet(e, labels, m), 1e-6);
        ++cases;
      }
  EXPECT_GT(cases, 100);
}

TEST(Triplet, NeverNegative) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto e = random_tensor({2, 8, 3}, rng, -5.0, 5.0);
    EXPECT_GE(loss_of(e, pk_labels(4, 2), std::uniform_real_distribution<double>(0.0, 0.5)(rng)), 0.0);
  }
}

TEST(Triplet, ZeroMarginVanishesExactlyWhenNearestNeighboursAgree) {
  std::mt19937_64 rng(3);
  int zero_cases = 0;
  for (int i = 0; i < 500; ++i) {
    const auto labels = pk_labels(3, 3);
    Tensor<double> e = random_tensor({1, 9, 2}, rng);
    const double spread = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    for (std::int64_t b = 0; b < 9; ++b) at3(e, 0, b, 0) += spread * static_cast<double>(labels[static_cast<std::size_t>(b)]);
    // Every positive strictly closer than every negative, for every anchor.
    bool separated = true;
    for (std::int64_t a = 0; a < 9; ++a) {
      double far_pos = 0.0, near_neg = 1e300;
      for (std::int64_t j = 0; j < 9; ++j) {
        if (j == a) continue;
        const double d = std::hypot(at3(e, 0, a, 0) - at3(e, 0, j, 0), at3(e, 0, a, 1) - at3(e, 0, j, 1));
        if (labels[j] == labels[a]) far_pos = std::max(far_pos, d);
        else near_neg = std::min(near_neg, d);
      }
      separated = separated && far_pos < near_neg;
    }
    const double l = loss_of(e, labels, 0.0);
    EXPECT_EQ(l == 0.0, separated) << "loss " << l;
    zero_cases += separated ? 1 : 0;
  }
  EXPECT_GT(zero_cases, 20);
  EXPECT_LT(zero_cases, 480);
}

TEST(Triplet, PositiveScalingKeepsTheActiveSetAtZeroMargin) {
  std::mt19937_64 rng(5);
  const auto labels = pk_labels(4, 3);
  auto active_set = [&](const Tensor<double>& e) {
    std::vector<bool> act;
    for (std::int64_t a = 0; a < 12; ++a)
      for (std::int64_t p = 0; p < 12; ++p)
        for (std::int64_t n = 0; n < 12; ++n) {
          if (a == p || labels[a] != labels[p] || labels[n] == labels[a]) continue;
          double dp = 0.0, dn = 0.0;
          for (std::int64_t q = 0; q < e.dim(2); ++q) {
            dp += (at3(e, 0, a, q) - at3(e, 0, p, q)) * (at3(e, 0, a, q) - at3(e, 0, p, q));
            dn += (at3(e, 0, a, q) - at3(e, 0, n, q)) * (at3(e, 0, a, q) - at3(e, 0, n, q));
          }
          act.push_back(std::sqrt(dp) > std::sqrt(dn));
        }
    return act;
  };
  for (int i = 0; i < 100; ++i) {
    const auto e = random_tensor({1, 12, 3}, rng);
    const double c = std::exp(std::uniform_real_distribution<double>(-3.0, 3.0)(rng));
    Tensor<double> scaled = e;
    for (auto& x : scaled.data()) x *= c;
    EXPECT_EQ(active_set(scaled), active_set(e));
    const double base = loss_of(e, labels, 0.0);
    EXPECT_NEAR(loss_of(scaled, labels, 0.0), c * base, 1e-6 * std::max(1.0, c * base));
  }
}

TEST(Triplet, SingleClassBatchIsAContractError) {
  EXPECT_THROW(loss_of(Tensor<double>(Shape{4, 2}), {3, 3, 3, 3}, 0.2), ContractError);
}

TEST(Triplet, LabelCountMismatchIsADimensionError) {
  EXPECT_THROW(loss_of(Tensor<double>(Shape{4, 2}), {0, 1, 1}, 0.2), DimensionError);
}

TEST(JointLoss, UniformLogitsAndCollapsedEmbeddingsGiveLogClassesPlusMargin) {
  for (const std::int64_t classes : {3, 5, 74}) {
    ForwardOutput<double> out;
    out.embeddings = Var<double>::leaf(Tensor<double>(Shape{4, 6, 3}, 1.0));
    out.normalized = out.embeddings;
    out.logits = Var<double>::leaf(Tensor<double>(Shape{4, 6, classes}, 0.0));
    const auto j = joint_loss(out, pk_labels(3, 2), 0.2);
    EXPECT_NEAR(j.cross_entropy, std::log(static_cast<double>(classes)), 1e-12);
    EXPECT_NEAR(j.triplet, 0.2, 1e-12);
    EXPECT_NEAR(j.total.value()[0], std::log(static_cast<double>(classes)) + 0.2, 1e-12);
  }
}

TEST(JointLoss, ConfidentCorrectLogitsAndSeparatedEmbeddingsGiveNearZero) {
  ForwardOutput<double> out;
  Tensor<double> e(Shape{1, 4, 1}, std::vector<double>{0.0, 0.0, 10.0, 10.0});
  out.embeddings = Var<double>::leaf(e);
  Tensor<double> logits(Shape{1, 4, 2}, std::vector<double>{30, 0, 30, 0, 0, 30, 0, 30});
  out.logits = Var<double>::leaf(logits);
  const auto j = joint_loss(out, {0, 0, 1, 1}, 0.2);
  EXPECT_NEAR(j.total.value()[0], 0.0, 1e-12);
}

TEST(JointLoss, SumsTheTwoTerms) {
  std::mt19937_64 rng(4);
  ForwardOutput<double> out;
  out.embeddings = random_var({2, 6, 3}, rng);
  out.logits = random_var({2, 6, 4}, rng);
  const auto labels = pk_labels(3, 2);
  const auto j = joint_loss(out, labels, 0.3);
  EXPECT_NEAR(j.triplet, brute_triplet(out.embeddings.value(), labels, 0.3), 1e-9);
  // Cross entropy averaged over every (strip, sample) row.
  double ce = 0.0;
  for (std::int64_t k = 0; k < 2; ++k)
    for (std::int64_t b = 0; b < 6; ++b) {
      double z = 0.0;
      for (std::int64_t c = 0; c < 4; ++c) z += std::exp(at3(out.logits.value(), k, b, c));
      ce += std::log(z) - at3(out.logits.value(), k, b, labels[static_cast<std::size_t>(b)]);
    }
  EXPECT_NEAR(j.cross_entropy, ce / 12.0, 1e-9);
  EXPECT_DOUBLE_EQ(j.total.value()[0], j.triplet + j.cross_entropy);
}
