#include "si3/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "si3/csv.hpp"
#include "si3/error.hpp"

namespace si3 {

std::vector<int> MultiViewDataset::observed_views(Eigen::Index i) const {
  std::vector<int> out;
  for (int v = 0; v < num_views(); ++v) {
    if (observed(i, v)) out.push_back(v);
  }
  return out;
}

std::vector<Eigen::Index> MultiViewDataset::observed_samples(int v) const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < num_samples(); ++i) {
    if (observed(i, v)) out.push_back(i);
  }
  return out;
}

Eigen::Index MultiViewDataset::missing_count() const {
  return mask.size() - mask.sum();
}

double MultiViewDataset::missing_rate() const {
  if (mask.size() == 0) return 0.0;
  return static_cast<double>(missing_count()) / static_cast<double>(mask.size());
}

void MultiViewDataset::validate() const {
  if (views.empty()) throw ValidationError("dataset has no views");
  const Eigen::Index n = views.front().rows();
  for (const auto& view : views) {
    if (view.rows() != n) {
      std::ostringstream msg;
      msg << "row count mismatch: " << view.rows() << " vs " << n;
      throw ValidationError(msg.str());
    }
  }
  if (mask.rows() != n || mask.cols() != num_views()) {
    std::ostringstream msg;
    msg << "mask shape " << mask.rows() << "x" << mask.cols() << " does not match "
        << n << " samples x " << num_views() << " views";
    throw ValidationError(msg.str());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    int seen = 0;
    for (int v = 0; v < num_views(); ++v) {
      const int m = mask(i, v);
      if (m != 0 && m != 1) {
        std::ostringstream msg;
        msg << "mask value outside {0,1} at (" << i << "," << v << "): " << m;
        throw ValidationError(msg.str());
      }
      seen += m;
    }
    if (seen == 0) {
      std::ostringstream msg;
      msg << "sample " << i << " has no observed view";
      throw ValidationError(msg.str());
    }
  }
  if (labels) {
    if (static_cast<Eigen::Index>(labels->size()) != n) {
      throw ValidationError("row count mismatch: labels have " +
                            std::to_string(labels->size()) + " rows, views have " +
                            std::to_string(n));
    }
    for (std::size_t i = 0; i < labels->size(); ++i) {
      const int y = (*labels)[i];
      if (y < 0 || y >= num_clusters) {
        std::ostringstream msg;
        msg << "label " << y << " of sample " << i << " outside [0," << num_clusters << ")";
        throw ValidationError(msg.str());
      }
    }
  }
}

MultiViewDataset load_dataset(const std::vector<std::filesystem::path>& view_paths,
                              const std::optional<std::filesystem::path>& mask_path,
                              const std::optional<std::filesystem::path>& labels_path,
                              int num_clusters) {
  if (view_paths.empty()) throw ValidationError("no view files given");
  MultiViewDataset data;
  for (const auto& p : view_paths) data.views.push_back(csv::read_matrix(p));

  const Eigen::Index n = data.views.front().rows();
  for (std::size_t v = 1; v < data.views.size(); ++v) {
    if (data.views[v].rows() != n) {
      std::ostringstream msg;
      msg << "row count mismatch: " << view_paths[v].string() << " has "
          << data.views[v].rows() << " rows, " << view_paths[0].string() << " has " << n;
      throw ValidationError(msg.str());
    }
  }

  if (mask_path) {
    const Eigen::MatrixXd m = csv::read_matrix(*mask_path);
    if (m.rows() != n) {
      throw ValidationError("row count mismatch: mask has " + std::to_string(m.rows()) +
                            " rows, views have " + std::to_string(n));
    }
    if (m.cols() != data.num_views()) {
      throw ValidationError("mask has " + std::to_string(m.cols()) + " columns for " +
                            std::to_string(data.num_views()) + " views");
    }
    data.mask.resize(n, data.num_views());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int v = 0; v < data.num_views(); ++v) {
        const double x = m(i, v);
        if (x != 0.0 && x != 1.0) {
          std::ostringstream msg;
          msg << "mask value outside {0,1} at (" << i << "," << v << "): " << x;
          throw ValidationError(msg.str());
        }
        data.mask(i, v) = static_cast<int>(x);
      }
    }
  } else {
    data.mask = Mask::Ones(n, data.num_views());
  }

  if (labels_path) {
    const Eigen::MatrixXd y = csv::read_matrix(*labels_path);
    if (y.size() != n || (y.cols() != 1 && y.rows() != 1)) {
      throw ValidationError("row count mismatch: labels have " + std::to_string(y.size()) +
                            " entries, views have " + std::to_string(n));
    }
    std::vector<int> labels(static_cast<std::size_t>(n));
    int max_label = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double raw = y(i);
      if (raw != std::floor(raw)) {
        throw ValidationError("non-integer label at row " + std::to_string(i));
      }
      labels[static_cast<std::size_t>(i)] = static_cast<int>(raw);
      max_label = std::max(max_label, static_cast<int>(raw));
    }
    data.labels = std::move(labels);
    if (num_clusters <= 0) num_clusters = max_label + 1;
  }
  data.num_clusters = num_clusters;
  data.validate();
  return data;
}

void save_dataset(const MultiViewDataset& data, const std::filesystem::path& dir,
                  const std::string& stem) {
  std::filesystem::create_directories(dir);
  for (int v = 0; v < data.num_views(); ++v) {
    csv::write_matrix(dir / (stem + "_view" + std::to_string(v) + ".csv"),
                      data.views[static_cast<std::size_t>(v)]);
  }
  csv::write_matrix(dir / (stem + "_mask.csv"), data.mask.cast<double>());
  if (data.labels) {
    Eigen::MatrixXd y(static_cast<Eigen::Index>(data.labels->size()), 1);
    for (std::size_t i = 0; i < data.labels->size(); ++i) {
      y(static_cast<Eigen::Index>(i), 0) = (*data.labels)[i];
    }
    csv::write_matrix(dir / (stem + "_labels.csv"), y);
  }
}

MultiViewDataset normalize(const MultiViewDataset& data) {
  MultiViewDataset out = data;
  for (int v = 0; v < data.num_views(); ++v) {
    auto& x = out.views[static_cast<std::size_t>(v)];
    const auto rows = data.observed_samples(v);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (auto i : rows) {
        lo = std::min(lo, x(i, c));
        hi = std::max(hi, x(i, c));
      }
      const double range = hi - lo;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (rows.empty() || !(range > 0.0)) {
          x(i, c) = 0.0;
        } else {
          x(i, c) = (x(i, c) - lo) / range;
        }
      }
    }
  }
  return out;
}

Mask generate_mask(Eigen::Index n, int num_views, const MissingSpec& spec) {
  const double eta = spec.target_rate;
  if (num_views <= 0 || n <= 0) throw ValidationError("mask needs N > 0 and V > 0");
  if (eta < 0.0 || eta >= 1.0) throw ValidationError("missing rate must lie in [0,1)");
  const double ceiling = 1.0 - 1.0 / static_cast<double>(num_views);
  if (eta > 0.0 && eta >= ceiling) {
    std::ostringstream msg;
    msg << "missing rate " << eta << " infeasible for " << num_views
        << " views: must be below 1 - 1/V = " << ceiling;
    throw ValidationError(msg.str());
  }

  Mask mask = Mask::Ones(n, num_views);
  if (eta == 0.0) return mask;

  std::vector<double> probs = spec.per_view_missing_prob;
  if (probs.empty()) probs.assign(static_cast<std::size_t>(num_views), eta);
  if (static_cast<int>(probs.size()) != num_views) {
    throw ValidationError("expected " + std::to_string(num_views) +
                          " per-view missing probabilities, got " +
                          std::to_string(probs.size()));
  }
  for (double p : probs) {
    if (p < 0.0 || p >= 1.0) throw ValidationError("missing probabilities must lie in [0,1)");
  }
  const double mean = std::accumulate(probs.begin(), probs.end(), 0.0) / num_views;
  if (std::abs(mean - eta) > 1e-9) {
    if (mean == 0.0) {
      std::fill(probs.begin(), probs.end(), eta);
    } else {
      for (double& p : probs) p = std::min(p * eta / mean, 0.99);
    }
  }

  // The view restored for empty rows is the least-missing one. Raising its
  // drop probability by 1 / (1 - prod(others)) keeps its realized marginal at
  // the requested value after restoration.
  const int restore_view = static_cast<int>(
      std::min_element(probs.begin(), probs.end()) - probs.begin());
  std::vector<double> sample_probs = probs;
  double others = 1.0;
  for (int v = 0; v < num_views; ++v) {
    if (v != restore_view) others *= probs[static_cast<std::size_t>(v)];
  }
  if (num_views > 1) {
    sample_probs[static_cast<std::size_t>(restore_view)] =
        std::min(probs[static_cast<std::size_t>(restore_view)] / (1.0 - others), 0.99);
  }

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int v = 0; v < num_views; ++v) {
      if (unif(rng) < sample_probs[static_cast<std::size_t>(v)]) mask(i, v) = 0;
    }
    if (mask.row(i).sum() == 0) mask(i, restore_view) = 1;
  }

  // Move the realized count onto the target.
  const auto target_zeros = static_cast<Eigen::Index>(
      std::llround(eta * static_cast<double>(n) * num_views));
  Eigen::Index zeros = mask.size() - mask.sum();
  if (zeros > target_zeros) {
    std::vector<std::pair<Eigen::Index, int>> cells;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int v = 0; v < num_views; ++v) {
        if (!mask(i, v)) cells.emplace_back(i, v);
      }
    }
    std::shuffle(cells.begin(), cells.end(), rng);
    for (const auto& [i, v] : cells) {
      if (zeros == target_zeros) break;
      mask(i, v) = 1;
      --zeros;
    }
  } else if (zeros < target_zeros) {
    std::vector<std::pair<Eigen::Index, int>> cells;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int v = 0; v < num_views; ++v) {
        if (mask(i, v)) cells.emplace_back(i, v);
      }
    }
    std::shuffle(cells.begin(), cells.end(), rng);
    for (const auto& [i, v] : cells) {
      if (zeros == target_zeros) break;
      if (mask.row(i).sum() < 2) continue;
      mask(i, v) = 0;
      ++zeros;
    }
  }
  return mask;
}

}  // namespace si3
