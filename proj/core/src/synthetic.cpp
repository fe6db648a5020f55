#include "si3/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "si3/error.hpp"

namespace si3 {

MultiViewDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.num_samples < spec.num_clusters || spec.num_clusters <= 0) {
    throw ValidationError("synthetic data needs 0 < K <= N");
  }
  if (spec.view_dims.empty() || spec.view_dims.size() != spec.view_noise.size()) {
    throw ValidationError("synthetic data needs one noise level per view");
  }
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = spec.num_samples;
  const Eigen::Index ds = spec.source_dim;

  Eigen::MatrixXd centres(spec.num_clusters, ds);
  for (Eigen::Index c = 0; c < centres.rows(); ++c) {
    for (Eigen::Index d = 0; d < ds; ++d) centres(c, d) = spec.separation * normal(rng);
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % spec.num_clusters);
  std::shuffle(labels.begin(), labels.end(), rng);

  Eigen::MatrixXd source(n, ds);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < ds; ++d) {
      source(i, d) = centres(labels[static_cast<std::size_t>(i)], d) + spec.cluster_spread * normal(rng);
    }
  }

  MultiViewDataset data;
  data.num_clusters = spec.num_clusters;
  data.labels = labels;
  data.mask = Mask::Ones(n, static_cast<Eigen::Index>(spec.view_dims.size()));
  const double scale = 1.0 / std::sqrt(static_cast<double>(ds));
  for (std::size_t v = 0; v < spec.view_dims.size(); ++v) {
    Eigen::MatrixXd map(ds, spec.view_dims[v]);
    for (Eigen::Index r = 0; r < map.rows(); ++r) {
      for (Eigen::Index c = 0; c < map.cols(); ++c) map(r, c) = scale * normal(rng);
    }
    Eigen::MatrixXd x = source * map;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) += spec.view_noise[v] * normal(rng);
    }
    data.views.push_back(std::move(x));
  }
  return data;
}

}  // namespace si3
