#pragma once

#include <span>

#include <Eigen/Dense>

namespace si3 {

// Variance floor applied inside every KL and likelihood evaluation.
inline constexpr double kVarianceFloor = 1e-8;

// Diagonal Gaussian N(mu, diag(var)).
struct GaussianPosterior {
  Eigen::VectorXd mu;
  Eigen::VectorXd var;

  Eigen::Index dim() const { return mu.size(); }
  Eigen::VectorXd stddev() const { return var.cwiseSqrt(); }
};

// Product of experts: summed precisions, precision-weighted mean.
GaussianPosterior poe_aggregate(std::span<const GaussianPosterior> experts);

// 2-Wasserstein distance between diagonal Gaussians.
double w2_distance(const GaussianPosterior& a, const GaussianPosterior& b);

// KL(a || b) for diagonal Gaussians.
double kl_divergence(const GaussianPosterior& a, const GaussianPosterior& b);

}  // namespace si3
