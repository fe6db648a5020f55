#include "si3/ibsi.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "si3/cca.hpp"
#include "si3/error.hpp"
#include "si3/parallel.hpp"

namespace si3::ibsi {

SupportSet build_support_set(const MultiViewDataset& data, Eigen::Index sample, int view) {
  if (data.observed(sample, view)) {
    std::ostringstream msg;
    msg << "position (" << sample << "," << view << ") is observed, not missing";
    throw ValidationError(msg.str());
  }
  const int nv = data.num_views();
  SupportSet s;
  s.sample = sample;
  s.view = view;
  std::vector<std::vector<int>> rows;
  for (Eigen::Index j = 0; j < data.num_samples(); ++j) {
    if (!data.observed(j, view)) continue;
    std::vector<int> valid(static_cast<std::size_t>(nv), 0);
    bool overlap = false;
    for (int u = 0; u < nv; ++u) {
      if (u != view && data.observed(sample, u) && data.observed(j, u)) {
        valid[static_cast<std::size_t>(u)] = 1;
        overlap = true;
      }
    }
    if (!overlap) continue;
    valid[static_cast<std::size_t>(view)] = 1;
    s.members.push_back(j);
    rows.push_back(std::move(valid));
  }
  s.valid.resize(static_cast<Eigen::Index>(rows.size()), nv);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int u = 0; u < nv; ++u) {
      s.valid(static_cast<Eigen::Index>(r), u) = rows[r][static_cast<std::size_t>(u)];
    }
  }
  return s;
}

ViewSimilarity::ViewSimilarity(const MultiViewDataset& data, int view)
    : features_(&data.views.at(static_cast<std::size_t>(view))),
      view_(view),
      samples_(data.observed_samples(view)),
      position_(static_cast<std::size_t>(data.num_samples()), -1) {
  const auto n = static_cast<Eigen::Index>(samples_.size());
  if (n < 2) {
    throw ValidationError("view " + std::to_string(view) +
                          " needs at least two observed samples for similarities");
  }
  for (Eigen::Index r = 0; r < n; ++r) position_[static_cast<std::size_t>(samples_[r])] = r;

  if (n <= kDenseLimit) {
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      for (Eigen::Index b = a + 1; b < n; ++b) {
        const double d = distance(samples_[a], samples_[b]);
        dist(a, b) = d;
        dist(b, a) = d;
        max_distance_ = std::max(max_distance_, d);
      }
    }
    dense_ = dist.unaryExpr([this](double d) { return from_distance(d); });
  } else {
    constexpr Eigen::Index kBlock = 512;
    for (Eigen::Index a0 = 0; a0 < n; a0 += kBlock) {
      for (Eigen::Index b0 = a0; b0 < n; b0 += kBlock) {
        for (Eigen::Index a = a0; a < std::min(n, a0 + kBlock); ++a) {
          for (Eigen::Index b = std::max(b0, a + 1); b < std::min(n, b0 + kBlock); ++b) {
            max_distance_ = std::max(max_distance_, distance(samples_[a], samples_[b]));
          }
        }
      }
    }
  }
}

double ViewSimilarity::distance(Eigen::Index i, Eigen::Index j) const {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < features_->cols(); ++c) {
    const double diff = (*features_)(i, c) - (*features_)(j, c);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

double ViewSimilarity::from_distance(double d) const {
  if (max_distance_ <= 0.0) return 1.0;
  const double s = 1.0 - d / max_distance_;
  return s * s;
}

double ViewSimilarity::operator()(Eigen::Index i, Eigen::Index j) const {
  const Eigen::Index a = position_[static_cast<std::size_t>(i)];
  const Eigen::Index b = position_[static_cast<std::size_t>(j)];
  if (a < 0 || b < 0) {
    std::ostringstream msg;
    msg << "similarity requested for unobserved sample in view " << view_ << ": (" << i << ","
        << j << ")";
    throw ValidationError(msg.str());
  }
  if (materialized()) return dense_(a, b);
  return from_distance(distance(i, j));
}

ViewSimilarity pairwise_similarity(const MultiViewDataset& data, int view) {
  return ViewSimilarity(data, view);
}

std::vector<ViewSimilarity> all_similarities(const MultiViewDataset& data) {
  std::vector<ViewSimilarity> sims;
  sims.reserve(static_cast<std::size_t>(data.num_views()));
  for (int v = 0; v < data.num_views(); ++v) sims.emplace_back(data, v);
  return sims;
}

CorrMatrix view_correlation(std::span<const Eigen::MatrixXd> latents,
                            const MultiViewDataset& data) {
  const int nv = data.num_views();
  if (static_cast<int>(latents.size()) != nv) {
    throw ValidationError("view_correlation: one latent matrix per view required");
  }
  for (int v = 0; v < nv; ++v) {
    if (data.mask.col(v).sum() == 0) {
      throw ValidationError("view " + std::to_string(v) + " has no observed samples");
    }
    if (latents[static_cast<std::size_t>(v)].rows() != data.num_samples()) {
      throw ValidationError("view_correlation: latent matrices must have N rows");
    }
  }
  CorrMatrix corr;
  corr.values = Eigen::MatrixXd::Identity(nv, nv);
  for (int u = 0; u < nv; ++u) {
    for (int v = u + 1; v < nv; ++v) {
      const auto& hu = latents[static_cast<std::size_t>(u)];
      const auto& hv = latents[static_cast<std::size_t>(v)];
      std::vector<Eigen::Index> rows;
      for (Eigen::Index i = 0; i < data.num_samples(); ++i) {
        if (data.observed(i, u) && data.observed(i, v)) rows.push_back(i);
      }
      const Eigen::Index dz = std::max(hu.cols(), hv.cols());
      double c = kMinCorrelation;
      if (static_cast<Eigen::Index>(rows.size()) >= dz + 2) {
        Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), hu.cols());
        Eigen::MatrixXd b(static_cast<Eigen::Index>(rows.size()), hv.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
          a.row(static_cast<Eigen::Index>(r)) = hu.row(rows[r]);
          b.row(static_cast<Eigen::Index>(r)) = hv.row(rows[r]);
        }
        c = std::clamp(canonical_correlation(a, b, kCcaRidge), kMinCorrelation, 1.0);
      }
      corr.values(u, v) = c;
      corr.values(v, u) = c;
    }
  }
  return corr;
}

double missing_view_similarity(Eigen::Index i, Eigen::Index j, int view,
                               std::span<const ViewSimilarity> sims, const CorrMatrix& corr,
                               const MultiViewDataset& data) {
  double num = 0.0;
  double den = 0.0;
  for (int u = 0; u < data.num_views(); ++u) {
    if (u == view || !data.observed(i, u) || !data.observed(j, u)) continue;
    const double c = corr(u, view);
    num += sims[static_cast<std::size_t>(u)](i, j) * c;
    den += c;
  }
  if (den == 0.0) {
    std::ostringstream msg;
    msg << "samples " << i << " and " << j << " share no observed view";
    throw ValidationError(msg.str());
  }
  return num / den;
}

const InfoEntry* InfoTable::find(Eigen::Index sample, int view) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{sample, view},
                             [](const InfoEntry& e, const std::pair<Eigen::Index, int>& key) {
                               return std::pair{e.sample, e.view} < key;
                             });
  if (it == entries.end() || it->sample != sample || it->view != view) return nullptr;
  return &*it;
}

bool InfoTable::selected(Eigen::Index sample, int view) const {
  const auto* e = find(sample, view);
  return e && e->selected;
}

std::size_t InfoTable::selected_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries.begin(), entries.end(), [](const InfoEntry& e) { return e.selected; }));
}

InfoTable info_score(const MultiViewDataset& data, std::span<const ViewSimilarity> sims,
                     const CorrMatrix& corr, unsigned threads) {
  const int nv = data.num_views();
  InfoTable table;
  for (Eigen::Index i = 0; i < data.num_samples(); ++i) {
    for (int v = 0; v < nv; ++v) {
      if (!data.observed(i, v)) table.entries.push_back({i, v, 0.0, false});
    }
  }

  parallel_for(table.entries.size(), threads, [&](std::size_t e) {
    const Eigen::Index i = table.entries[e].sample;
    const int v = table.entries[e].view;
    double total = 0.0;
    for (Eigen::Index j = 0; j < data.num_samples(); ++j) {
      if (!data.observed(j, v)) continue;
      bool overlap = false;
      for (int u = 0; u < nv && !overlap; ++u) {
        overlap = data.observed(i, u) && data.observed(j, u);
      }
      if (!overlap) continue;
      for (int u = 0; u < nv; ++u) {
        if (u == v) {
          total += missing_view_similarity(i, j, v, sims, corr, data) * corr(v, v);
        } else if (data.observed(i, u) && data.observed(j, u)) {
          total += sims[static_cast<std::size_t>(u)](i, j) * corr(u, v);
        }
      }
    }
    table.entries[e].score = total;
  });
  return table;
}

InfoTable info_score(const MultiViewDataset& data, const CorrMatrix& corr, unsigned threads) {
  const auto sims = all_similarities(data);
  return info_score(data, sims, corr, threads);
}

InfoTable select_positions(InfoTable table, double ratio) {
  if (ratio < 0.0 || ratio > 1.0) throw ValidationError("selection ratio must lie in [0,1]");
  const std::size_t m = table.entries.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = table.entries[a];
    const auto& eb = table.entries[b];
    if (ea.score != eb.score) return ea.score > eb.score;
    if (ea.sample != eb.sample) return ea.sample < eb.sample;
    return ea.view < eb.view;
  });
  // The small offset keeps products such as 0.3 * 10 from rounding up.
  const auto count = std::min<std::size_t>(
      m, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(m) - 1e-9)));
  for (auto& e : table.entries) e.selected = false;
  for (std::size_t r = 0; r < count; ++r) table.entries[order[r]].selected = true;
  table.selection_ratio = ratio;
  table.threshold = count < m ? table.entries[order[count]].score
                              : -std::numeric_limits<double>::infinity();
  return table;
}

}  // namespace si3::ibsi
