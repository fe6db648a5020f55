#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "si3/dataset.hpp"
#include "si3/dmgmm.hpp"
#include "si3/ibsi.hpp"
#include "si3/metrics.hpp"

namespace si3 {

struct TrainConfig {
  int pretrain_epochs = 200;
  int train_epochs = 300;
  int batch_size = 100;  // 0: full batch
  double pretrain_lr = 1e-3;
  double train_lr = 1e-3;
  double alpha = 5.0;
  double selection_ratio = 0.5;
  int neighbors = 10;
  Eigen::Index latent_dim = 10;
  std::vector<Eigen::Index> hidden = {256, 64};
  std::vector<Likelihood> likelihoods;  // empty: all Gaussian
  std::uint64_t seed = 0;
  // false skips scoring and imputation entirely.
  bool imputation = true;
  int max_restarts = 3;
  // Re-runs the k-means prior seeding on the current aggregates after this
  // many training epochs; 0 keeps the pretrain-time seeding only.
  int prior_reseed_epoch = 50;
  // After every epoch, set the prior to its loss-minimizing moments given
  // the current posteriors and responsibilities instead of taking Adam steps.
  bool closed_form_prior = false;
  int eval_every = 0;  // epochs between metric evaluations when labels exist; 0: final only
  unsigned threads = 1;

  // Throws ValidationError when a field is out of range.
  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  LossTerms terms;
  double learning_rate = 0.0;
  std::optional<ClusterMetrics> metrics;
};

struct FitResult {
  DmgmmModel model;
  ibsi::InfoTable table;
  std::vector<int> assignments;
  std::vector<double> pretrain_losses;
  std::vector<EpochLog> log;
  std::optional<ClusterMetrics> metrics;
  int restarts = 0;  // divergence recoveries used
};

// Called after every completed epoch with the log entry and the current model.
using EpochCallback = std::function<void(const EpochLog&, const DmgmmModel&)>;

// Loss-minimizing prior for fixed posteriors: responsibilities at z = mu
// under `prior`, then weighted moments (variance adds the posterior variance
// to the spread of the means). Weights use the same floor as init_prior; a
// component with no mass keeps its parameters.
MixturePrior prior_moments(const MixturePrior& prior, const PosteriorMatrix& fused);

// Builds the encoders, decoders and a placeholder prior from the config.
DmgmmModel initial_model(const MultiViewDataset& data, const TrainConfig& config);

// Reconstruction-only warm-up of the encoder mean heads and decoder mean
// outputs on observed cells. Returns one N x d_z latent-mean matrix per view
// (rows of unobserved samples are zero). `losses` receives the per-epoch
// reconstruction loss, starting with the loss before the first step.
std::vector<Eigen::MatrixXd> pretrain(DmgmmModel& model, const MultiViewDataset& data,
                                      const TrainConfig& config,
                                      std::vector<double>* losses = nullptr);

// View correlations from the pretrained latents, then Info scores for every
// missing position with the top `selection_ratio` share selected.
ibsi::InfoTable score_positions(const MultiViewDataset& data,
                                std::span<const Eigen::MatrixXd> latents,
                                const TrainConfig& config);

// Pretrain, score once, seed the prior, train, then assign each sample to its
// most probable cluster.
FitResult fit(const MultiViewDataset& data, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

}  // namespace si3
