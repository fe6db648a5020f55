#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "si3/dmgmm.hpp"

namespace si3 {

struct KMeansResult {
  Eigen::MatrixXd centroids;  // K x d
  std::vector<int> labels;
  double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds; the best of `restarts` runs by
// inertia is kept. A cluster that empties is reseeded with the point farthest
// from its current centroid.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts = 10,
                    int max_iter = 100);

// Mixture prior seeded from k-means on the rows of `latents`: centroids as
// means, within-cluster variances (floored) and cluster fractions floored at
// 1/(10K) then renormalized.
MixturePrior init_prior(const Eigen::MatrixXd& latents, int k, std::uint64_t seed);

}  // namespace si3
