#include "si3/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "si3/error.hpp"

namespace si3 {

namespace {

void check_labels(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw ValidationError("label vectors differ in length: " + std::to_string(pred.size()) +
                          " vs " + std::to_string(truth.size()));
  }
  if (pred.empty()) throw ValidationError("label vectors are empty");
  const auto negative = [](int x) { return x < 0; };
  if (std::any_of(pred.begin(), pred.end(), negative) ||
      std::any_of(truth.begin(), truth.end(), negative)) {
    throw ValidationError("labels must be non-negative");
  }
}

double choose2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

Eigen::MatrixXd contingency(std::span<const int> pred, std::span<const int> truth) {
  check_labels(pred, truth);
  const int kp = *std::max_element(pred.begin(), pred.end()) + 1;
  const int kt = *std::max_element(truth.begin(), truth.end()) + 1;
  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(kp, kt);
  for (std::size_t i = 0; i < pred.size(); ++i) table(pred[i], truth[i]) += 1.0;
  return table;
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const auto rows = static_cast<int>(cost.rows());
  const auto cols = static_cast<int>(cost.cols());
  const int n = std::max(rows, cols);
  // Square padding with zero cost; potentials-based O(n^3) assignment.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  a.topLeftCorner(rows, cols) = cost;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(rows), -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j] >= 1 && p[j] <= rows && j <= cols) assignment[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  }
  return assignment;
}

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  const Eigen::MatrixXd table = contingency(pred, truth);
  const auto match = hungarian(-table);
  double hits = 0.0;
  for (std::size_t r = 0; r < match.size(); ++r) {
    if (match[r] >= 0) hits += table(static_cast<Eigen::Index>(r), match[r]);
  }
  return hits / static_cast<double>(pred.size());
}

double nmi(std::span<const int> pred, std::span<const int> truth) {
  const Eigen::MatrixXd table = contingency(pred, truth);
  const double n = static_cast<double>(pred.size());
  const Eigen::VectorXd rows = table.rowwise().sum();
  const Eigen::VectorXd cols = table.colwise().sum().transpose();
  auto entropy = [n](const Eigen::VectorXd& counts) {
    double h = 0.0;
    for (Eigen::Index k = 0; k < counts.size(); ++k) {
      if (counts(k) > 0.0) h -= counts(k) / n * std::log(counts(k) / n);
    }
    return h;
  };
  const double hp = entropy(rows);
  const double ht = entropy(cols);
  if (hp <= 0.0 || ht <= 0.0) return 0.0;
  double mi = 0.0;
  for (Eigen::Index a = 0; a < table.rows(); ++a) {
    for (Eigen::Index b = 0; b < table.cols(); ++b) {
      const double c = table(a, b);
      if (c > 0.0) mi += c / n * std::log(c * n / (rows(a) * cols(b)));
    }
  }
  return std::clamp(mi / (0.5 * (hp + ht)), 0.0, 1.0);
}

double ari(std::span<const int> pred, std::span<const int> truth) {
  const Eigen::MatrixXd table = contingency(pred, truth);
  const double n = static_cast<double>(pred.size());
  double sum_cells = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (Eigen::Index a = 0; a < table.rows(); ++a) {
    for (Eigen::Index b = 0; b < table.cols(); ++b) sum_cells += choose2(table(a, b));
  }
  const Eigen::VectorXd rows = table.rowwise().sum();
  const Eigen::VectorXd cols = table.colwise().sum().transpose();
  for (Eigen::Index a = 0; a < rows.size(); ++a) sum_rows += choose2(rows(a));
  for (Eigen::Index b = 0; b < cols.size(); ++b) sum_cols += choose2(cols(b));
  const double total = choose2(n);
  const double expected = total > 0.0 ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;
  return (sum_cells - expected) / (max_index - expected);
}

ClusterMetrics evaluate(std::span<const int> pred, std::span<const int> truth) {
  return {accuracy(pred, truth), nmi(pred, truth), ari(pred, truth)};
}

}  // namespace si3
