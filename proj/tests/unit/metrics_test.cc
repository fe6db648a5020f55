#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "si3/error.hpp"
#include "si3/metrics.hpp"

namespace {

std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int k) {
  std::uniform_int_distribution<int> pick(0, k - 1);
  std::vector<int> y(n);
  for (auto& x : y) x = pick(rng);
  return y;
}

TEST(Accuracy, PerfectAndPermuted) {
  const std::vector<int> truth = {0, 0, 1, 1, 2, 2, 3};
  EXPECT_DOUBLE_EQ(si3::accuracy(truth, truth), 1.0);
  std::vector<int> pred;
  for (int y : truth) pred.push_back((y + 2) % 4);
  EXPECT_DOUBLE_EQ(si3::accuracy(pred, truth), 1.0);
}

TEST(Accuracy, MatchesPermutationOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> kk(1, 4);
  std::uniform_int_distribution<std::size_t> nn(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = kk(rng);
    const auto n = nn(rng);
    const auto pred = random_labels(rng, n, k);
    const auto truth = random_labels(rng, n, k);
    EXPECT_DOUBLE_EQ(si3::accuracy(pred, truth), oracle::brute_force_accuracy(pred, truth, k));
  }
}

TEST(Accuracy, CollapsedPredictionUsesRectangularMatching) {
  const std::vector<int> truth = {0, 0, 1, 1, 2, 2, 3, 3};
  const std::vector<int> pred(8, 0);
  EXPECT_DOUBLE_EQ(si3::accuracy(pred, truth), 0.25);
  EXPECT_DOUBLE_EQ(si3::accuracy(truth, pred), 0.25);
}

TEST(Accuracy, LengthMismatchIsAnError) {
  EXPECT_THROW(si3::accuracy(std::vector<int>{0, 1}, std::vector<int>{0}), si3::ValidationError);
}

TEST(Nmi, IdenticalConstantAndIndependent) {
  const std::vector<int> truth = {0, 1, 2, 0, 1, 2, 2, 1};
  EXPECT_NEAR(si3::nmi(truth, truth), 1.0, 1e-12);
  EXPECT_EQ(si3::nmi(std::vector<int>(8, 0), truth), 0.0);
  std::mt19937_64 rng(2);
  const auto a = random_labels(rng, 20000, 4);
  const auto b = random_labels(rng, 20000, 4);
  EXPECT_LT(si3::nmi(a, b), 0.05);
}

TEST(Ari, IdenticalAndPermutationMean) {
  const std::vector<int> truth = {0, 1, 2, 0, 1, 2, 2, 1, 0, 0};
  EXPECT_DOUBLE_EQ(si3::ari(truth, truth), 1.0);
  std::mt19937_64 rng(3);
  auto y = random_labels(rng, 300, 4);
  double total = 0.0;
  for (int t = 0; t < 200; ++t) {
    auto p = y;
    std::shuffle(p.begin(), p.end(), rng);
    total += si3::ari(p, y);
  }
  EXPECT_LT(std::abs(total / 200.0), 0.02);
}

TEST(Ari, MatchesPairCountingOracle) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> nn(2, 10);
  std::uniform_int_distribution<int> kk(1, 4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = nn(rng);
    const auto pred = random_labels(rng, n, kk(rng));
    const auto truth = random_labels(rng, n, kk(rng));
    EXPECT_NEAR(si3::ari(pred, truth), oracle::pair_counting_ari(pred, truth), 1e-12);
  }
}

TEST(Metrics, InvariantUnderRelabelling) {
  std::mt19937_64 rng(5);
  const auto truth = random_labels(rng, 50, 3);
  const auto pred = random_labels(rng, 50, 3);
  std::vector<int> relabelled;
  for (int p : pred) relabelled.push_back((p + 1) % 3);
  const auto a = si3::evaluate(pred, truth);
  const auto b = si3::evaluate(relabelled, truth);
  EXPECT_NEAR(a.acc, b.acc, 1e-12);
  EXPECT_NEAR(a.nmi, b.nmi, 1e-12);
  EXPECT_NEAR(a.ari, b.ari, 1e-12);
}

TEST(Metrics, MajorityPredictorReachesChanceOnBalancedTruth) {
  std::vector<int> truth;
  for (int i = 0; i < 40; ++i) truth.push_back(i % 4);
  EXPECT_GE(si3::accuracy(std::vector<int>(40, 2), truth), 0.25);
}

TEST(Hungarian, SquareAssignment) {
  Eigen::Matrix3d cost;
  cost << 4, 1, 3,
          2, 0, 5,
          3, 2, 2;
  const auto a = si3::hungarian(cost);
  EXPECT_EQ(a, (std::vector<int>{1, 0, 2}));
}

}  // namespace
