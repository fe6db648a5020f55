#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace si3 {

// Lower bound on every standard-deviation head.
inline constexpr double kSigmaMin = 1e-4;

enum class Activation { Identity, Softplus, Logistic };

// A contiguous block of output columns with its own output nonlinearity.
// Softplus heads emit softplus(a) + sigma_min, logistic heads emit 1/(1+e^-a).
struct OutputHead {
  Eigen::Index offset = 0;
  Eigen::Index width = 0;
  Activation kind = Activation::Identity;
};

struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;       // input to each layer
  std::vector<Eigen::MatrixXd> preactivation;  // X W + b of each layer
  Eigen::MatrixXd output;
};

// Fully connected ReLU network operating on row-major batches (one sample
// per row). Parameters live in one flat vector: for each layer the d_in x d_out
// weight matrix in row-major order followed by the d_out bias.
class Mlp {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Mlp() = default;
  Mlp(std::vector<Eigen::Index> layer_dims, std::vector<OutputHead> heads,
      double sigma_min = kSigmaMin);

  // Uniform(+-sqrt(6/(d_in+d_out))) weights, zero biases.
  void init_uniform(std::mt19937_64& rng);

  const std::vector<Eigen::Index>& layer_dims() const { return dims_; }
  const std::vector<OutputHead>& heads() const { return heads_; }
  double sigma_min() const { return sigma_min_; }
  std::size_t num_layers() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  Eigen::Index input_dim() const { return dims_.front(); }
  Eigen::Index output_dim() const { return dims_.back(); }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  Eigen::Map<RowMatrix> weights(std::size_t layer);
  Eigen::Map<const RowMatrix> weights(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpCache* cache = nullptr) const;

  // Gradient of a scalar loss with respect to the flat parameters, given the
  // loss gradient with respect to the forward output. d_input, when given,
  // receives the gradient with respect to the forward input.
  Eigen::VectorXd backward(const MlpCache& cache, const Eigen::MatrixXd& d_output,
                           Eigen::MatrixXd* d_input = nullptr) const;

 private:
  std::vector<Eigen::Index> dims_;
  std::vector<OutputHead> heads_;
  double sigma_min_ = kSigmaMin;
  std::vector<Eigen::Index> offsets_;  // start of each layer's block
  Eigen::VectorXd params_;
};

double softplus(double a);
double logistic(double a);
// Inverse of softplus on (0, inf).
double softplus_inverse(double y);

}  // namespace si3
