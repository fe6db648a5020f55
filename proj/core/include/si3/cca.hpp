#pragma once

#include <Eigen/Dense>

namespace si3 {

// First canonical correlation between the columns of `a` and `b` (rows are
// paired observations). Both blocks are mean-centred, their covariances get
// `ridge * I` added, and the top singular value of the whitened
// cross-covariance is found by power iteration.
double canonical_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                             double ridge = 1e-4);

// Symmetric inverse square root of a positive definite matrix.
Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& spd);

// Largest singular value of `m` by power iteration on m^T m.
double top_singular_value(const Eigen::MatrixXd& m, int max_iterations = 5000,
                          double tolerance = 1e-14);

}  // namespace si3
