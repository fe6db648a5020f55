#pragma once

#include <cstdint>
#include <vector>

#include "si3/dataset.hpp"

namespace si3 {

// Gaussian-mixture toy data: a K-cluster mixture in a low-dimensional source
// space seen through one random linear map plus isotropic noise per view.
struct SyntheticSpec {
  Eigen::Index num_samples = 600;
  int num_clusters = 4;
  Eigen::Index source_dim = 4;
  double separation = 3.0;      // scale of the cluster centres
  double cluster_spread = 1.0;  // within-cluster standard deviation
  std::vector<Eigen::Index> view_dims = {20, 15, 10};
  std::vector<double> view_noise = {0.5, 0.5, 0.5};
  std::uint64_t seed = 0;
};

// Complete (all-observed) dataset with balanced labels.
MultiViewDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace si3
