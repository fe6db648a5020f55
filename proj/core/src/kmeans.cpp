#include "si3/kmeans.hpp"

#include <limits>
#include <random>

#include "si3/error.hpp"

namespace si3 {

namespace {

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd c(k, x.cols());
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  c.row(0) = x.row(first(rng));
  Eigen::VectorXd d2 = (x.rowwise() - c.row(0)).rowwise().squaredNorm();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int m = 1; m < k; ++m) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = unit(rng) * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= d2(pick);
        if (target < 0.0) break;
      }
    } else {
      pick = first(rng);
    }
    c.row(m) = x.row(pick);
    d2 = d2.cwiseMin((x.rowwise() - c.row(m)).rowwise().squaredNorm());
  }
  return c;
}

double assign(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, std::vector<int>& labels,
              Eigen::VectorXd& dist) {
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index m = 0; m < c.rows(); ++m) {
      const double d = (x.row(i) - c.row(m)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(m);
      }
    }
    labels[static_cast<std::size_t>(i)] = best;
    dist(i) = best_d;
    inertia += best_d;
  }
  return inertia;
}

KMeansResult lloyd(const Eigen::MatrixXd& x, Eigen::MatrixXd c, int max_iter) {
  const Eigen::Index n = x.rows();
  const auto k = c.rows();
  KMeansResult r;
  r.labels.assign(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd dist(n);
  for (int it = 0; it < max_iter; ++it) {
    assign(x, c, r.labels, dist);
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(r.labels[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts(r.labels[static_cast<std::size_t>(i)]);
    }
    for (Eigen::Index m = 0; m < k; ++m) {
      if (counts(m) > 0) {
        next.row(m) /= counts(m);
        continue;
      }
      Eigen::Index far = 0;
      dist.maxCoeff(&far);
      next.row(m) = x.row(far);
      dist(far) = 0.0;
    }
    const bool converged = (next - c).squaredNorm() == 0.0;
    c = std::move(next);
    if (converged) break;
  }
  r.inertia = assign(x, c, r.labels, dist);
  r.centroids = std::move(c);
  return r;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts,
                    int max_iter) {
  if (k <= 0) throw ValidationError("k-means needs K > 0");
  if (k > points.rows()) {
    throw ValidationError("cluster count " + std::to_string(k) + " exceeds sample count " +
                          std::to_string(points.rows()));
  }
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto run = lloyd(points, seed_plus_plus(points, k, rng), max_iter);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

MixturePrior init_prior(const Eigen::MatrixXd& latents, int k, std::uint64_t seed) {
  const auto km = kmeans(latents, k, seed);
  const Eigen::Index d = latents.cols();
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(k, d);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    const int c = km.labels[static_cast<std::size_t>(i)];
    var.row(c) += (latents.row(i) - km.centroids.row(c)).cwiseAbs2();
    counts(c) += 1.0;
  }
  for (int c = 0; c < k; ++c) {
    if (counts(c) > 0.0) var.row(c) /= counts(c);
  }
  var = var.cwiseMax(kVarianceFloor);
  Eigen::VectorXd pi = counts / static_cast<double>(latents.rows());
  pi = pi.cwiseMax(1.0 / (10.0 * k));
  pi /= pi.sum();
  return MixturePrior::from_moments(pi, km.centroids, var);
}

}  // namespace si3
