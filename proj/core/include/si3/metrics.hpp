#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace si3 {

struct ClusterMetrics {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

// Rows index predicted labels, columns true labels.
Eigen::MatrixXd contingency(std::span<const int> pred, std::span<const int> truth);

// Minimum-cost perfect matching on a rectangular cost matrix (rows <= cols
// or the transpose). Returns, for each row, the assigned column or -1.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

// Best one-to-one relabelling agreement.
double accuracy(std::span<const int> pred, std::span<const int> truth);
// Mutual information over the arithmetic mean of the entropies; 0 when both
// entropies vanish or either does.
double nmi(std::span<const int> pred, std::span<const int> truth);
double ari(std::span<const int> pred, std::span<const int> truth);

ClusterMetrics evaluate(std::span<const int> pred, std::span<const int> truth);

}  // namespace si3
