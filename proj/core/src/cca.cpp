#include "si3/cca.hpp"

#include <cmath>

#include "si3/error.hpp"

namespace si3 {

Eigen::MatrixXd inverse_sqrt(const Eigen::MatrixXd& spd) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(spd);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed", "cca");
  const Eigen::VectorXd inv = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

double top_singular_value(const Eigen::MatrixXd& m, int max_iterations, double tolerance) {
  if (m.size() == 0) return 0.0;
  const Eigen::MatrixXd gram = m.transpose() * m;
  Eigen::VectorXd x(gram.cols());
  for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = 1.0 + 0.1 * static_cast<double>(k);
  x.normalize();
  double lambda = x.dot(gram * x);
  for (int it = 0; it < max_iterations; ++it) {
    Eigen::VectorXd y = gram * x;
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
    const double next = x.dot(gram * x);
    const bool converged = std::abs(next - lambda) <= tolerance * std::max(1.0, std::abs(next));
    lambda = next;
    if (converged) break;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

double canonical_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double ridge) {
  if (a.rows() != b.rows()) throw ValidationError("CCA blocks need paired rows");
  if (a.rows() < 2) throw ValidationError("CCA needs at least two paired rows");
  const double denom = static_cast<double>(a.rows() - 1);
  const Eigen::MatrixXd ac = a.rowwise() - a.colwise().mean();
  const Eigen::MatrixXd bc = b.rowwise() - b.colwise().mean();
  Eigen::MatrixXd caa = ac.transpose() * ac / denom;
  Eigen::MatrixXd cbb = bc.transpose() * bc / denom;
  caa.diagonal().array() += ridge;
  cbb.diagonal().array() += ridge;
  const Eigen::MatrixXd cab = ac.transpose() * bc / denom;
  const Eigen::MatrixXd t = inverse_sqrt(caa) * cab * inverse_sqrt(cbb);
  return top_singular_value(t);
}

}  // namespace si3
