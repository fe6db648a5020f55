#include "si3/plugin.hpp"

#include <algorithm>
#include <limits>

#include "si3/error.hpp"

namespace si3 {

PluginImputation plugin_impute(const MultiViewDataset& data, const ibsi::InfoTable& table, int k) {
  if (k <= 0) throw ValidationError("neighbour count must be positive");
  PluginImputation out{data, Mask::Zero(data.num_samples(), data.num_views())};
  for (const auto& e : table.entries) {
    if (!e.selected) continue;
    const Eigen::Index i = e.sample;
    const int v = e.view;
    if (data.observed(i, v)) throw ValidationError("selected position is observed");
    const auto mine = data.observed_views(i);

    std::vector<std::pair<double, Eigen::Index>> near;
    std::vector<Eigen::Index> observers;
    for (Eigen::Index j = 0; j < data.num_samples(); ++j) {
      if (j == i || !data.observed(j, v)) continue;
      observers.push_back(j);
      double total = 0.0;
      int shared = 0;
      for (int u : mine) {
        if (!data.observed(j, u)) continue;
        total += (data.views[static_cast<std::size_t>(u)].row(i) -
                  data.views[static_cast<std::size_t>(u)].row(j)).norm();
        ++shared;
      }
      if (shared > 0) near.emplace_back(total / shared, j);
    }
    if (observers.empty()) {
      throw ValidationError("cannot impute sample " + std::to_string(i) + " view " +
                            std::to_string(v) + ": no sample observes the view");
    }
    std::vector<Eigen::Index> chosen;
    if (near.empty()) {
      chosen = observers;
    } else {
      const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), near.size());
      std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(take), near.end());
      for (std::size_t r = 0; r < take; ++r) chosen.push_back(near[r].second);
    }
    const auto& x = data.views[static_cast<std::size_t>(v)];
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(x.cols());
    for (auto j : chosen) mean += x.row(j);
    mean /= static_cast<double>(chosen.size());
    out.data.views[static_cast<std::size_t>(v)].row(i) = mean;
    out.data.mask(i, v) = 1;
    out.imputed(i, v) = 1;
  }
  return out;
}

}  // namespace si3
