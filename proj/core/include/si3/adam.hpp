#pragma once

#include <Eigen/Dense>

namespace si3 {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected adaptive-moment optimizer state for one parameter vector.
class AdamState {
 public:
  AdamState() = default;
  AdamState(Eigen::Index size, AdamOptions options);

  void step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::Ref<const Eigen::VectorXd>& grads);

  long steps() const { return steps_; }
  AdamOptions& options() { return options_; }
  const AdamOptions& options() const { return options_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  AdamOptions options_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  long steps_ = 0;
};

}  // namespace si3
