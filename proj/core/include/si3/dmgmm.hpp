#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "si3/dataset.hpp"
#include "si3/gaussian.hpp"
#include "si3/ibsi.hpp"
#include "si3/mlp.hpp"

// Deep multi-view Gaussian mixture model: per-view encoders and decoders,
// product-of-experts fusion, distribution-level imputation of missing views
// and the variational training objective.
namespace si3 {

enum class Likelihood { Gaussian, Bernoulli };

// Categorical weights pi = softmax(logits) and diagonal Gaussian components
// with var = softplus(raw) + kVarianceFloor. All parameters live in one flat
// vector: [logits (K) | means (K x d, row-major) | raw variances (K x d)].
class MixturePrior {
 public:
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  MixturePrior() = default;
  MixturePrior(int num_components, Eigen::Index dim);

  static MixturePrior from_moments(const Eigen::VectorXd& weights, const Eigen::MatrixXd& means,
                                   const Eigen::MatrixXd& variances);

  int num_components() const { return k_; }
  Eigen::Index dim() const { return d_; }

  Eigen::VectorXd weights() const;
  Eigen::VectorXd log_weights() const;
  Eigen::MatrixXd variances() const;

  Eigen::Map<Eigen::VectorXd> logits() { return {params_.data(), k_}; }
  Eigen::Map<const Eigen::VectorXd> logits() const { return {params_.data(), k_}; }
  Eigen::Map<RowMatrix> means() { return {params_.data() + k_, k_, d_}; }
  Eigen::Map<const RowMatrix> means() const { return {params_.data() + k_, k_, d_}; }
  Eigen::Map<RowMatrix> raw_variances() { return {params_.data() + k_ + k_ * d_, k_, d_}; }
  Eigen::Map<const RowMatrix> raw_variances() const {
    return {params_.data() + k_ + k_ * d_, k_, d_};
  }

  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

 private:
  int k_ = 0;
  Eigen::Index d_ = 0;
  Eigen::VectorXd params_;
};

struct ModelOptions {
  Eigen::Index latent_dim = 10;
  std::vector<Eigen::Index> hidden = {256, 64};
  std::vector<Likelihood> likelihoods;  // per view; empty means all Gaussian
};

struct DmgmmModel {
  std::vector<Mlp> encoders;  // d_v -> hidden -> [mu | sigma]
  std::vector<Mlp> decoders;  // d_z -> reversed hidden -> view likelihood parameters
  std::vector<Likelihood> likelihoods;
  MixturePrior prior;
  Eigen::Index latent_dim = 0;

  int num_views() const { return static_cast<int>(encoders.size()); }
};

DmgmmModel make_model(std::span<const Eigen::Index> view_dims, int num_clusters,
                      const ModelOptions& options, std::mt19937_64& rng);

struct ModelGradients {
  std::vector<Eigen::VectorXd> encoders;
  std::vector<Eigen::VectorXd> decoders;
  Eigen::VectorXd prior;

  static ModelGradients zeros_like(const DmgmmModel& model);
};

// Per-view posteriors for a set of rows, one row per sample.
struct PosteriorMatrix {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd var;

  GaussianPosterior row(Eigen::Index i) const { return {mu.row(i).transpose(), var.row(i).transpose()}; }
};

// Posterior parameters for one view's rows; var = (softplus head)^2.
std::vector<GaussianPosterior> encode_view(const DmgmmModel& model, int view,
                                           const Eigen::MatrixXd& rows);

// All observed view posteriors of a dataset. Entry v is N x d_z; rows of
// samples not observing v are left at zero mean and unit variance.
struct DatasetPosteriors {
  std::vector<PosteriorMatrix> views;
  PosteriorMatrix aggregated;  // product of experts over observed views
};

DatasetPosteriors encode_dataset(const DmgmmModel& model, const MultiViewDataset& data);

struct Imputation {
  int view = 0;
  GaussianPosterior posterior;
};

// imputations[i] lists the imputed view posteriors of sample i.
using SampleImputations = std::vector<std::vector<Imputation>>;

// Distribution-level imputation of view `view` for `sample`: the k samples
// observing the view that are closest under the 2-Wasserstein distance of the
// aggregated posteriors, weighted by softmax(-W2). The variance adds the
// weighted spread of the neighbour means to their weighted variances.
GaussianPosterior impute_distribution(const MultiViewDataset& data,
                                      const DatasetPosteriors& posteriors, Eigen::Index sample,
                                      int view, int k);

// Imputes every selected position of `table` from the pre-imputation
// aggregates in `posteriors`.
SampleImputations impute_selected(const MultiViewDataset& data, const ibsi::InfoTable& table,
                                  const DatasetPosteriors& posteriors, int k,
                                  unsigned threads = 1);

// Observed experts of one sample followed by its imputed ones, fused.
GaussianPosterior fuse_with_imputation(const MultiViewDataset& data, const ibsi::InfoTable& table,
                                       Eigen::Index sample, const DatasetPosteriors& posteriors,
                                       int k);

// Posterior cluster probabilities gamma_k ~ pi_k N(z | mu_k, var_k).
Eigen::VectorXd responsibilities(const MixturePrior& prior, const Eigen::VectorXd& z);

double categorical_kl(const Eigen::VectorXd& q, const Eigen::VectorXd& p);

// Mean over the sample's observed views of KL(aggregate || view posterior).
double coherence_loss(const GaussianPosterior& aggregated,
                      std::span<const GaussianPosterior> view_posteriors);

inline double total_loss(double elbo_loss, double coherence, double alpha) {
  return elbo_loss + alpha * coherence;
}

// Batch-averaged loss terms. `elbo` is the negative ELBO
// (reconstruction + latent_kl + cluster_kl).
struct LossTerms {
  double reconstruction = 0.0;
  double latent_kl = 0.0;
  double cluster_kl = 0.0;
  double coherence = 0.0;
  double elbo = 0.0;
  double total = 0.0;
};

// Negative ELBO plus alpha times the coherence penalty over `batch`, with
// latent draws z = mu + sigma * noise.row(b). Imputed posteriors are
// constants. When `grads` is non-null it receives the exact gradient of
// `total` with respect to every model parameter. Throws NumericalError
// naming the offending term when a term is not finite.
LossTerms evaluate_loss(const DmgmmModel& model, const MultiViewDataset& data,
                        std::span<const Eigen::Index> batch,
                        const SampleImputations& imputations, const Eigen::MatrixXd& noise,
                        double alpha, ModelGradients* grads);

// Negative ELBO over `batch` with a fresh standard normal draw per sample.
LossTerms elbo_loss(const DmgmmModel& model, const MultiViewDataset& data,
                    std::span<const Eigen::Index> batch, const SampleImputations& imputations,
                    std::mt19937_64& rng, ModelGradients* grads);

// Aggregated posteriors after imputing the selected positions.
PosteriorMatrix fused_posteriors(const MultiViewDataset& data, const DatasetPosteriors& observed,
                                 const SampleImputations& imputations);

// argmax_k gamma_k at z = posterior mean, ties to the lowest k.
std::vector<int> assign_clusters(const MixturePrior& prior, const PosteriorMatrix& fused);

}  // namespace si3
