#include "si3/adam.hpp"

#include <cmath>

#include "si3/error.hpp"

namespace si3 {

AdamState::AdamState(Eigen::Index size, AdamOptions options)
    : options_(options), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

void AdamState::step(Eigen::Ref<Eigen::VectorXd> params,
                     const Eigen::Ref<const Eigen::VectorXd>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ValidationError("Adam state, parameters and gradients must have equal sizes");
  }
  ++steps_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  m_ = b1 * m_ + (1.0 - b1) * grads;
  v_ = b2 * v_ + (1.0 - b2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = options_.learning_rate;
  const double eps = options_.epsilon;
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

}  // namespace si3
