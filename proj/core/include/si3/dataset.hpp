#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace si3 {

// N x V observation indicator; entry (i, v) is 1 when view v of sample i is
// observed.
using Mask = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

struct MultiViewDataset {
  std::vector<Eigen::MatrixXd> views;  // view v is N x d_v
  Mask mask;
  std::optional<std::vector<int>> labels;
  int num_clusters = 0;

  Eigen::Index num_samples() const { return mask.rows(); }
  int num_views() const { return static_cast<int>(views.size()); }
  Eigen::Index dim(int v) const { return views[static_cast<std::size_t>(v)].cols(); }

  bool observed(Eigen::Index i, int v) const { return mask(i, v) != 0; }
  std::vector<int> observed_views(Eigen::Index i) const;
  std::vector<Eigen::Index> observed_samples(int v) const;

  // Fraction of zero entries in the mask.
  double missing_rate() const;
  Eigen::Index missing_count() const;

  // Throws ValidationError when any structural invariant is violated.
  void validate() const;
};

struct MissingSpec {
  std::vector<double> per_view_missing_prob;  // empty: uniform at target_rate
  double target_rate = 0.0;
  std::uint64_t seed = 0;
};

MultiViewDataset load_dataset(const std::vector<std::filesystem::path>& view_paths,
                              const std::optional<std::filesystem::path>& mask_path,
                              const std::optional<std::filesystem::path>& labels_path,
                              int num_clusters = 0);

void save_dataset(const MultiViewDataset& data, const std::filesystem::path& dir,
                  const std::string& stem);

// Per-column min-max scaling using observed rows only. Constant columns map to
// zero; unobserved rows use the same statistics.
MultiViewDataset normalize(const MultiViewDataset& data);

// Unbalanced random view removal. Each entry is dropped independently with its
// view's probability, rows left without any view get the least-missing view
// restored, and a final repair pass moves the realized missing count onto
// round(target_rate * N * V). Deterministic in (n, v, spec).
Mask generate_mask(Eigen::Index n, int v, const MissingSpec& spec);

}  // namespace si3
