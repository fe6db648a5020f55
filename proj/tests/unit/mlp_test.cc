#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "si3/error.hpp"
#include "si3/mlp.hpp"

namespace {

using si3::Activation;
using si3::Mlp;

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(r, c);
  for (auto& x : m.reshaped()) x = normal(rng);
  return m;
}

TEST(Mlp, ParameterCountIsSumOverLayers) {
  Mlp net({7, 5, 3, 4}, {});
  EXPECT_EQ(net.parameter_count(), (7 + 1) * 5 + (5 + 1) * 3 + (3 + 1) * 4);
}

TEST(Mlp, ZeroNetworkGivesZeroOutput) {
  Mlp net({3, 4, 2}, {});
  std::mt19937_64 rng(1);
  EXPECT_EQ(net.forward(random_matrix(5, 3, rng)), Eigen::MatrixXd::Zero(5, 2));
}

TEST(Mlp, IdentityLayerPassesInputThrough) {
  Mlp net({3, 3}, {});
  net.weights(0) = Eigen::Matrix3d::Identity();
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = random_matrix(4, 3, rng);
  EXPECT_EQ(net.forward(x), x);
}

TEST(Mlp, MatchesReferenceForward) {
  std::mt19937_64 rng(3);
  Mlp net({4, 3, 2}, {});
  net.init_uniform(rng);
  for (Eigen::Index b = 0; b < 3; ++b) net.bias(0)(b) = 0.1 * static_cast<double>(b);
  const Eigen::MatrixXd x = random_matrix(6, 4, rng);
  EXPECT_LT((net.forward(x) - oracle::reference_forward(net, x)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Mlp, MixedHeadsMatchReferenceForward) {
  std::mt19937_64 rng(4);
  Mlp net({3, 6, 6}, {{0, 2, Activation::Identity},
                      {2, 2, Activation::Softplus},
                      {4, 2, Activation::Logistic}});
  net.init_uniform(rng);
  const Eigen::MatrixXd x = random_matrix(5, 3, rng);
  EXPECT_LT((net.forward(x) - oracle::reference_forward(net, x)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Mlp, WrongInputWidthIsAnError) {
  Mlp net({3, 2}, {});
  EXPECT_THROW(net.forward(Eigen::MatrixXd::Zero(2, 4)), si3::ValidationError);
}

TEST(Mlp, HeadsMustTileTheOutput) {
  EXPECT_THROW(Mlp({3, 4}, {{0, 3, Activation::Identity}}), si3::ValidationError);
  EXPECT_THROW(Mlp({3, 4}, {{1, 3, Activation::Identity}}), si3::ValidationError);
}

TEST(Mlp, SoftplusHeadStaysAboveFloor) {
  Mlp net({1, 1}, {{0, 1, Activation::Softplus}});
  Eigen::MatrixXd x(5, 1);
  x << -1e6, -800.0, -40.0, 0.0, 1e6;
  net.weights(0)(0, 0) = 1.0;
  const Eigen::MatrixXd y = net.forward(x);
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    EXPECT_TRUE(std::isfinite(y(r, 0)));
    EXPECT_GE(y(r, 0), si3::kSigmaMin);
  }
}

TEST(MlpBackward, ZeroUpstreamGradientGivesZero) {
  std::mt19937_64 rng(5);
  Mlp net({3, 4, 2}, {});
  net.init_uniform(rng);
  si3::MlpCache cache;
  const Eigen::MatrixXd y = net.forward(random_matrix(3, 3, rng), &cache);
  Eigen::MatrixXd dx;
  const Eigen::VectorXd g = net.backward(cache, Eigen::MatrixXd::Zero(3, 2), &dx);
  EXPECT_EQ(g, Eigen::VectorXd::Zero(net.parameter_count()));
  EXPECT_EQ(dx, Eigen::MatrixXd::Zero(3, 3));
}

TEST(MlpBackward, LinearLeastSquaresClosedForm) {
  std::mt19937_64 rng(6);
  Mlp net({3, 2}, {});
  net.init_uniform(rng);
  const Eigen::MatrixXd x = random_matrix(8, 3, rng);
  const Eigen::MatrixXd target = random_matrix(8, 2, rng);
  si3::MlpCache cache;
  const Eigen::MatrixXd out = net.forward(x, &cache);
  const double n = 8.0;
  const Eigen::VectorXd g = net.backward(cache, 2.0 * (out - target) / n);
  const Eigen::MatrixXd expected = 2.0 * x.transpose() * (x * net.weights(0) - target) / n;
  const Eigen::Map<const Mlp::RowMatrix> dw(g.data(), 3, 2);
  EXPECT_LT((dw - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(MlpBackward, StaleCacheIsAnError) {
  Mlp net({3, 4, 2}, {});
  Mlp other({3, 5, 2}, {});
  si3::MlpCache cache;
  other.forward(Eigen::MatrixXd::Zero(2, 3), &cache);
  EXPECT_THROW(net.backward(cache, Eigen::MatrixXd::Zero(2, 2)), si3::ValidationError);
  net.forward(Eigen::MatrixXd::Zero(2, 3), &cache);
  EXPECT_THROW(net.backward(cache, Eigen::MatrixXd::Zero(3, 2)), si3::ValidationError);
}

class MlpGradient : public ::testing::TestWithParam<Activation> {};

TEST_P(MlpGradient, EveryParameterMatchesCentralDifferences) {
  std::mt19937_64 rng(7);
  Mlp net({4, 5, 3, 3}, {{0, 3, GetParam()}});
  net.init_uniform(rng);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index b = 0; b < net.bias(l).size(); ++b) net.bias(l)(b) = 0.2 + 0.05 * b;
  }
  const Eigen::MatrixXd x = random_matrix(6, 4, rng);
  const Eigen::MatrixXd w = random_matrix(6, 3, rng);
  Eigen::MatrixXd dx_numeric(6, 4);
  // Loss sum(w .* out^2 / 2) has upstream gradient w .* out.
  auto loss = [&](const Eigen::MatrixXd& input) {
    return 0.5 * (w.array() * net.forward(input).array().square()).sum();
  };
  si3::MlpCache cache;
  const Eigen::MatrixXd out = net.forward(x, &cache);
  Eigen::MatrixXd dx;
  const Eigen::VectorXd g = net.backward(cache, w.cwiseProduct(out), &dx);
  const Eigen::VectorXd numeric =
      oracle::central_difference(net.parameters(), [&] { return loss(x); });
  for (Eigen::Index p = 0; p < g.size(); ++p) {
    EXPECT_LE(oracle::relative_error(g(p), numeric(p), 1e-7), 1e-4) << "parameter " << p;
  }
  Eigen::MatrixXd xp = x;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::VectorXd cell = Eigen::VectorXd::Constant(1, x(r, c));
      const Eigen::VectorXd d = oracle::central_difference(cell, [&] {
        xp(r, c) = cell(0);
        return loss(xp);
      });
      xp(r, c) = x(r, c);
      EXPECT_LE(oracle::relative_error(dx(r, c), d(0), 1e-7), 1e-4);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Heads, MlpGradient,
                         ::testing::Values(Activation::Identity, Activation::Softplus,
                                           Activation::Logistic));

}  // namespace
