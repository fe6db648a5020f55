#include "si3/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "si3/adam.hpp"
#include "si3/error.hpp"
#include "si3/kmeans.hpp"

namespace si3 {

namespace {

// Independent generator per purpose so that optional stages never shift the
// random streams of the others.
enum class Stream : std::uint64_t { Init = 1, Prior = 2, Train = 3 };

std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

struct Optimizers {
  std::vector<AdamState> encoders;
  std::vector<AdamState> decoders;
  AdamState prior;

  Optimizers(const DmgmmModel& model, double lr) {
    AdamOptions opts;
    opts.learning_rate = lr;
    for (const auto& e : model.encoders) encoders.emplace_back(e.parameter_count(), opts);
    for (const auto& d : model.decoders) decoders.emplace_back(d.parameter_count(), opts);
    prior = AdamState(model.prior.parameters().size(), opts);
  }

  void scale_learning_rate(double factor) {
    for (auto& s : encoders) s.options().learning_rate *= factor;
    for (auto& s : decoders) s.options().learning_rate *= factor;
    prior.options().learning_rate *= factor;
  }
};

bool all_finite(const ModelGradients& g) {
  const auto finite = [](const Eigen::VectorXd& v) { return v.allFinite(); };
  return std::all_of(g.encoders.begin(), g.encoders.end(), finite) &&
         std::all_of(g.decoders.begin(), g.decoders.end(), finite) && g.prior.allFinite();
}

std::vector<Eigen::Index> gather_rows(const MultiViewDataset& data, int v) {
  return data.observed_samples(v);
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  return out;
}

std::vector<int> current_assignments(const DmgmmModel& model, const MultiViewDataset& data,
                                     const ibsi::InfoTable& table, const TrainConfig& config) {
  const auto posts = encode_dataset(model, data);
  if (!config.imputation || table.selected_count() == 0) {
    return assign_clusters(model.prior, posts.aggregated);
  }
  const auto imps = impute_selected(data, table, posts, config.neighbors, config.threads);
  return assign_clusters(model.prior, fused_posteriors(data, posts, imps));
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError(msg); };
  if (pretrain_epochs < 0) fail("pretrain_epochs must be >= 0");
  if (train_epochs <= 0) fail("train_epochs must be > 0");
  if (batch_size < 0) fail("batch_size must be >= 0");
  if (!(pretrain_lr > 0.0) || !(train_lr > 0.0)) fail("learning rates must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha must be >= 0");
  if (!(selection_ratio >= 0.0 && selection_ratio <= 1.0)) fail("selection_ratio must lie in [0, 1]");
  if (neighbors <= 0) fail("neighbors must be positive");
  if (latent_dim <= 0) fail("latent_dim must be positive");
  if (std::any_of(hidden.begin(), hidden.end(), [](Eigen::Index h) { return h <= 0; })) {
    fail("hidden layer widths must be positive");
  }
  if (max_restarts < 0) fail("max_restarts must be >= 0");
  if (eval_every < 0) fail("eval_every must be >= 0");
  if (prior_reseed_epoch < 0) fail("prior_reseed_epoch must be >= 0");
}

MixturePrior prior_moments(const MixturePrior& prior, const PosteriorMatrix& fused) {
  const int k = prior.num_components();
  const Eigen::Index n = fused.mu.rows();
  Eigen::MatrixXd gamma(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    gamma.row(i) = responsibilities(prior, fused.mu.row(i).transpose()).transpose();
  }
  const Eigen::VectorXd mass = gamma.colwise().sum().transpose();
  Eigen::MatrixXd means = prior.means();
  Eigen::MatrixXd vars = prior.variances();
  for (int c = 0; c < k; ++c) {
    if (!(mass(c) > 1e-12)) continue;
    means.row(c) = (gamma.col(c).transpose() * fused.mu) / mass(c);
    const Eigen::MatrixXd centred = fused.mu.rowwise() - means.row(c);
    vars.row(c) = (gamma.col(c).transpose() * (fused.var + centred.cwiseAbs2())) / mass(c);
  }
  vars = vars.cwiseMax(kVarianceFloor);
  Eigen::VectorXd pi = mass / static_cast<double>(n);
  pi = pi.cwiseMax(1.0 / (10.0 * k));
  pi /= pi.sum();
  if (!means.allFinite() || !vars.allFinite()) throw NumericalError("non-finite prior moments", "prior");
  return MixturePrior::from_moments(pi, means, vars);
}

DmgmmModel initial_model(const MultiViewDataset& data, const TrainConfig& config) {
  if (data.num_clusters <= 0) throw ValidationError("dataset has no cluster count");
  std::vector<Eigen::Index> dims;
  for (int v = 0; v < data.num_views(); ++v) dims.push_back(data.dim(v));
  ModelOptions opts;
  opts.latent_dim = config.latent_dim;
  opts.hidden = config.hidden;
  opts.likelihoods = config.likelihoods;
  auto rng = stream_rng(config.seed, Stream::Init);
  return make_model(dims, data.num_clusters, opts, rng);
}

std::vector<Eigen::MatrixXd> pretrain(DmgmmModel& model, const MultiViewDataset& data,
                                      const TrainConfig& config, std::vector<double>* losses) {
  const int nv = data.num_views();
  const Eigen::Index dz = model.latent_dim;
  const double scale = 1.0 / static_cast<double>(data.num_samples());
  AdamOptions opts;
  opts.learning_rate = config.pretrain_lr;
  std::vector<AdamState> enc_opt, dec_opt;
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(nv));
  std::vector<Eigen::MatrixXd> inputs(static_cast<std::size_t>(nv));
  for (int v = 0; v < nv; ++v) {
    const auto sv = static_cast<std::size_t>(v);
    enc_opt.emplace_back(model.encoders[sv].parameter_count(), opts);
    dec_opt.emplace_back(model.decoders[sv].parameter_count(), opts);
    rows[sv] = gather_rows(data, v);
    inputs[sv] = take_rows(data.views[sv], rows[sv]);
  }

  // One pass: loss at the current parameters and, if `step`, one update.
  auto pass = [&](bool step) {
    double loss = 0.0;
    for (int v = 0; v < nv; ++v) {
      const auto sv = static_cast<std::size_t>(v);
      if (rows[sv].empty()) continue;
      const Eigen::MatrixXd& x = inputs[sv];
      const Eigen::Index dv = x.cols();
      MlpCache enc_cache, dec_cache;
      const Eigen::MatrixXd enc = model.encoders[sv].forward(x, &enc_cache);
      const Eigen::MatrixXd mu = enc.leftCols(dz);
      const Eigen::MatrixXd dec = model.decoders[sv].forward(mu, &dec_cache);
      const Eigen::MatrixXd diff = dec.leftCols(dv) - x;
      loss += diff.squaredNorm() * scale;
      if (!step) continue;
      Eigen::MatrixXd d_dec = Eigen::MatrixXd::Zero(dec.rows(), dec.cols());
      d_dec.leftCols(dv) = 2.0 * scale * diff;
      Eigen::MatrixXd d_mu;
      const Eigen::VectorXd g_dec = model.decoders[sv].backward(dec_cache, d_dec, &d_mu);
      Eigen::MatrixXd d_enc = Eigen::MatrixXd::Zero(enc.rows(), enc.cols());
      d_enc.leftCols(dz) = d_mu;
      const Eigen::VectorXd g_enc = model.encoders[sv].backward(enc_cache, d_enc);
      dec_opt[sv].step(model.decoders[sv].parameters(), g_dec);
      enc_opt[sv].step(model.encoders[sv].parameters(), g_enc);
    }
    return loss;
  };

  for (int epoch = 0; epoch <= config.pretrain_epochs; ++epoch) {
    const double loss = pass(epoch < config.pretrain_epochs);
    if (!std::isfinite(loss)) {
      throw NumericalError("pretraining diverged at epoch " + std::to_string(epoch),
                           "reconstruction");
    }
    if (losses) losses->push_back(loss);
  }

  std::vector<Eigen::MatrixXd> latents;
  for (int v = 0; v < nv; ++v) {
    const auto sv = static_cast<std::size_t>(v);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(data.num_samples(), dz);
    if (!rows[sv].empty()) {
      const Eigen::MatrixXd enc = model.encoders[sv].forward(inputs[sv]);
      for (std::size_t r = 0; r < rows[sv].size(); ++r) {
        h.row(rows[sv][r]) = enc.row(static_cast<Eigen::Index>(r)).head(dz);
      }
    }
    latents.push_back(std::move(h));
  }
  return latents;
}

ibsi::InfoTable score_positions(const MultiViewDataset& data,
                                std::span<const Eigen::MatrixXd> latents,
                                const TrainConfig& config) {
  const auto corr = ibsi::view_correlation(latents, data);
  return ibsi::select_positions(ibsi::info_score(data, corr, config.threads),
                                config.selection_ratio);
}

FitResult fit(const MultiViewDataset& data, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  data.validate();
  if (data.num_clusters > data.num_samples()) {
    throw ValidationError("cluster count exceeds sample count");
  }
  if (!config.likelihoods.empty() &&
      config.likelihoods.size() != static_cast<std::size_t>(data.num_views())) {
    throw ValidationError("one likelihood per view required");
  }

  FitResult result;
  result.model = initial_model(data, config);
  DmgmmModel& model = result.model;
  const auto latents = pretrain(model, data, config, &result.pretrain_losses);

  if (config.imputation && data.missing_count() > 0) {
    result.table = score_positions(data, latents, config);
  } else {
    result.table.selection_ratio = config.selection_ratio;
  }
  const bool impute = config.imputation && result.table.selected_count() > 0;

  {
    const auto posts = encode_dataset(model, data);
    auto prior_rng = stream_rng(config.seed, Stream::Prior);
    model.prior = init_prior(posts.aggregated.mu, data.num_clusters, prior_rng());
  }

  auto rng = stream_rng(config.seed, Stream::Train);
  std::normal_distribution<double> normal(0.0, 1.0);
  Optimizers opt(model, config.train_lr);
  const Eigen::Index n = data.num_samples();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch =
      config.batch_size == 0 ? n : std::min<Eigen::Index>(config.batch_size, n);

  DmgmmModel snapshot_model = model;
  Optimizers snapshot_opt = opt;
  for (int epoch = 1; epoch <= config.train_epochs; ++epoch) {
    snapshot_model = model;
    snapshot_opt = opt;
    EpochLog entry;
    entry.epoch = epoch;
    entry.learning_rate = opt.prior.options().learning_rate;
    if (epoch == config.prior_reseed_epoch + 1 && config.prior_reseed_epoch > 0) {
      const auto posts = encode_dataset(model, data);
      auto prior_rng = stream_rng(config.seed, Stream::Prior);
      prior_rng.discard(1);
      model.prior = init_prior(posts.aggregated.mu, data.num_clusters, prior_rng());
      opt.prior = AdamState(model.prior.parameters().size(), opt.prior.options());
      snapshot_model = model;
      snapshot_opt = opt;
    }
    try {
      SampleImputations imps;
      if (impute) {
        imps = impute_selected(data, result.table, encode_dataset(model, data), config.neighbors,
                               config.threads);
      }
      if (batch < n) std::shuffle(order.begin(), order.end(), rng);
      for (Eigen::Index start = 0; start < n; start += batch) {
        const Eigen::Index len = std::min(batch, n - start);
        std::span<const Eigen::Index> idx(order.data() + start, static_cast<std::size_t>(len));
        Eigen::MatrixXd noise(len, model.latent_dim);
        for (Eigen::Index r = 0; r < len; ++r) {
          for (Eigen::Index c = 0; c < noise.cols(); ++c) noise(r, c) = normal(rng);
        }
        ModelGradients grads;
        const LossTerms t = evaluate_loss(model, data, idx, imps, noise, config.alpha, &grads);
        if (!all_finite(grads)) throw NumericalError("non-finite gradient", "gradient");
        for (int v = 0; v < model.num_views(); ++v) {
          const auto sv = static_cast<std::size_t>(v);
          opt.encoders[sv].step(model.encoders[sv].parameters(), grads.encoders[sv]);
          opt.decoders[sv].step(model.decoders[sv].parameters(), grads.decoders[sv]);
        }
        if (!config.closed_form_prior) opt.prior.step(model.prior.parameters(), grads.prior);
        const double w = static_cast<double>(len) / static_cast<double>(n);
        entry.terms.reconstruction += w * t.reconstruction;
        entry.terms.latent_kl += w * t.latent_kl;
        entry.terms.cluster_kl += w * t.cluster_kl;
        entry.terms.coherence += w * t.coherence;
        entry.terms.elbo += w * t.elbo;
        entry.terms.total += w * t.total;
      }
      if (config.closed_form_prior) {
        model.prior = prior_moments(model.prior, fused_posteriors(data, encode_dataset(model, data), imps));
      }
    } catch (const NumericalError& err) {
      if (result.restarts >= config.max_restarts) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) + ": " +
                                 err.what(),
                             err.term());
      }
      model = snapshot_model;
      opt = snapshot_opt;
      opt.scale_learning_rate(0.5);
      ++result.restarts;
      --epoch;
      continue;
    }
    if (data.labels && config.eval_every > 0 && epoch % config.eval_every == 0) {
      entry.metrics = evaluate(current_assignments(model, data, result.table, config), *data.labels);
    }
    if (on_epoch) on_epoch(entry, model);
    result.log.push_back(entry);
  }

  result.assignments = current_assignments(model, data, result.table, config);
  if (data.labels) result.metrics = evaluate(result.assignments, *data.labels);
  return result;
}

}  // namespace si3
