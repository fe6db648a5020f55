#include "si3/gaussian.hpp"

#include <cmath>

#include "si3/error.hpp"

namespace si3 {

GaussianPosterior poe_aggregate(std::span<const GaussianPosterior> experts) {
  if (experts.empty()) throw ValidationError("product of experts needs at least one expert");
  const Eigen::Index d = experts.front().dim();
  Eigen::ArrayXd precision = Eigen::ArrayXd::Zero(d);
  Eigen::ArrayXd weighted = Eigen::ArrayXd::Zero(d);
  for (const auto& e : experts) {
    if (e.dim() != d || e.var.size() != d) {
      throw ValidationError("product of experts: experts disagree on dimension");
    }
    const Eigen::ArrayXd p = e.var.array().max(kVarianceFloor).inverse();
    precision += p;
    weighted += e.mu.array() * p;
  }
  GaussianPosterior out;
  out.var = precision.inverse().matrix();
  out.mu = (weighted / precision).matrix();
  return out;
}

double w2_distance(const GaussianPosterior& a, const GaussianPosterior& b) {
  const double dmu = (a.mu - b.mu).squaredNorm();
  const double dsd = (a.var.cwiseSqrt() - b.var.cwiseSqrt()).squaredNorm();
  return std::sqrt(dmu + dsd);
}

double kl_divergence(const GaussianPosterior& a, const GaussianPosterior& b) {
  const Eigen::ArrayXd va = a.var.array().max(kVarianceFloor);
  const Eigen::ArrayXd vb = b.var.array().max(kVarianceFloor);
  const Eigen::ArrayXd diff = (a.mu - b.mu).array();
  return 0.5 * ((vb / va).log() + va / vb + diff.square() / vb - 1.0).sum();
}

}  // namespace si3
