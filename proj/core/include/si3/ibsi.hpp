#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "si3/dataset.hpp"

// Training-free informativeness scoring of missing positions and the
// threshold-based choice of which positions to impute.
namespace si3::ibsi {

inline constexpr double kMinCorrelation = 1e-3;
inline constexpr double kCcaRidge = 1e-4;

// Samples usable as evidence for the missing position (sample, view): they
// observe `view` and share at least one observed view with `sample`.
struct SupportSet {
  Eigen::Index sample = 0;
  int view = 0;
  std::vector<Eigen::Index> members;
  // |members| x V; row r marks the views of members[r] that contribute.
  Mask valid;
};

SupportSet build_support_set(const MultiViewDataset& data, Eigen::Index sample, int view);

// (1 - ||x_i - x_j|| / D_max)^2 over the samples observed in one view, with
// D_max the largest observed pairwise distance in that view. Up to
// kDenseLimit observed samples the matrix is materialized; beyond that pairs
// are evaluated on demand and D_max is found blockwise.
class ViewSimilarity {
 public:
  static constexpr Eigen::Index kDenseLimit = 5000;

  ViewSimilarity(const MultiViewDataset& data, int view);

  int view() const { return view_; }
  double max_distance() const { return max_distance_; }
  bool materialized() const { return dense_.size() > 0; }
  const std::vector<Eigen::Index>& samples() const { return samples_; }

  // Both samples must be observed in this view.
  double operator()(Eigen::Index i, Eigen::Index j) const;

 private:
  double from_distance(double d) const;
  double distance(Eigen::Index i, Eigen::Index j) const;

  const Eigen::MatrixXd* features_;
  int view_;
  double max_distance_ = 0.0;
  std::vector<Eigen::Index> samples_;
  std::vector<Eigen::Index> position_;  // sample -> row in dense_, or -1
  Eigen::MatrixXd dense_;
};

ViewSimilarity pairwise_similarity(const MultiViewDataset& data, int view);
std::vector<ViewSimilarity> all_similarities(const MultiViewDataset& data);

// V x V view correlations with unit diagonal.
struct CorrMatrix {
  Eigen::MatrixXd values;

  double operator()(int u, int v) const { return values(u, v); }
  int num_views() const { return static_cast<int>(values.rows()); }
};

// latents[v] is N x d_z; only rows observed in view v are read. Pairs with
// fewer than d_z + 2 co-observed samples fall back to kMinCorrelation.
CorrMatrix view_correlation(std::span<const Eigen::MatrixXd> latents,
                            const MultiViewDataset& data);

// Correlation-weighted average of the similarities over the views observed
// by both samples; stands in for the similarity in the missing view.
double missing_view_similarity(Eigen::Index i, Eigen::Index j, int view,
                               std::span<const ViewSimilarity> sims, const CorrMatrix& corr,
                               const MultiViewDataset& data);

struct InfoEntry {
  Eigen::Index sample = 0;
  int view = 0;
  double score = 0.0;
  bool selected = false;
};

struct InfoTable {
  std::vector<InfoEntry> entries;  // one per missing position, (sample, view) order
  double threshold = 0.0;
  double selection_ratio = 0.0;

  const InfoEntry* find(Eigen::Index sample, int view) const;
  bool selected(Eigen::Index sample, int view) const;
  std::size_t selected_count() const;
};

// Info(i, v) for every missing position: intra-view evidence from the
// approximated similarity in the missing view plus correlation-weighted
// cross-view evidence, summed over the support set.
InfoTable info_score(const MultiViewDataset& data, std::span<const ViewSimilarity> sims,
                     const CorrMatrix& corr, unsigned threads = 1);
InfoTable info_score(const MultiViewDataset& data, const CorrMatrix& corr, unsigned threads = 1);

// Selects the top ceil(ratio * m) positions by score (ties: lower sample, then
// lower view). The threshold is the score of the best unselected position, or
// -inf when everything is selected.
InfoTable select_positions(InfoTable table, double ratio);

}  // namespace si3::ibsi
