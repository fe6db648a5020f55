#include "si3/dmgmm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "si3/error.hpp"
#include "si3/parallel.hpp"

namespace si3 {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
constexpr double kProbabilityClamp = 1e-12;

void check_finite(double value, const char* term) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-finite " << term << " term in loss: " << value;
    throw NumericalError(msg.str(), term);
  }
}

std::vector<OutputHead> gaussian_heads(Eigen::Index width) {
  return {{0, width, Activation::Identity}, {width, width, Activation::Softplus}};
}

}  // namespace

// ---------------------------------------------------------------------------
// MixturePrior

MixturePrior::MixturePrior(int num_components, Eigen::Index dim)
    : k_(num_components), d_(dim), params_(Eigen::VectorXd::Zero(k_ + 2 * k_ * d_)) {
  if (k_ <= 0 || d_ <= 0) throw ValidationError("mixture prior needs K > 0 and d > 0");
  raw_variances().setConstant(softplus_inverse(1.0 - kVarianceFloor));
}

MixturePrior MixturePrior::from_moments(const Eigen::VectorXd& weights,
                                        const Eigen::MatrixXd& means,
                                        const Eigen::MatrixXd& variances) {
  const auto k = static_cast<int>(weights.size());
  if (means.rows() != k || variances.rows() != k || means.cols() != variances.cols()) {
    throw ValidationError("mixture moments disagree on shape");
  }
  MixturePrior prior(k, means.cols());
  for (int c = 0; c < k; ++c) {
    if (!(weights(c) > 0.0)) throw ValidationError("mixture weights must be positive");
    prior.logits()(c) = std::log(weights(c));
    for (Eigen::Index d = 0; d < means.cols(); ++d) {
      prior.means()(c, d) = means(c, d);
      const double excess = std::max(variances(c, d) - kVarianceFloor, 1e-300);
      prior.raw_variances()(c, d) = softplus_inverse(excess);
    }
  }
  return prior;
}

Eigen::VectorXd MixturePrior::log_weights() const {
  const auto l = logits();
  const double m = l.maxCoeff();
  const double lse = m + std::log((l.array() - m).exp().sum());
  return (l.array() - lse).matrix();
}

Eigen::VectorXd MixturePrior::weights() const { return log_weights().array().exp().matrix(); }

Eigen::MatrixXd MixturePrior::variances() const {
  return raw_variances().unaryExpr([](double r) { return softplus(r) + kVarianceFloor; });
}

// ---------------------------------------------------------------------------
// Model construction

DmgmmModel make_model(std::span<const Eigen::Index> view_dims, int num_clusters,
                      const ModelOptions& options, std::mt19937_64& rng) {
  if (view_dims.empty()) throw ValidationError("model needs at least one view");
  if (options.latent_dim <= 0) throw ValidationError("latent dimension must be positive");
  if (!options.likelihoods.empty() && options.likelihoods.size() != view_dims.size()) {
    throw ValidationError("one likelihood per view required");
  }
  DmgmmModel model;
  model.latent_dim = options.latent_dim;
  const Eigen::Index dz = options.latent_dim;
  for (std::size_t v = 0; v < view_dims.size(); ++v) {
    const Likelihood lik =
        options.likelihoods.empty() ? Likelihood::Gaussian : options.likelihoods[v];
    model.likelihoods.push_back(lik);

    std::vector<Eigen::Index> enc_dims{view_dims[v]};
    enc_dims.insert(enc_dims.end(), options.hidden.begin(), options.hidden.end());
    enc_dims.push_back(2 * dz);
    Mlp encoder(enc_dims, gaussian_heads(dz));
    encoder.init_uniform(rng);

    std::vector<Eigen::Index> dec_dims{dz};
    dec_dims.insert(dec_dims.end(), options.hidden.rbegin(), options.hidden.rend());
    std::vector<OutputHead> heads;
    if (lik == Likelihood::Gaussian) {
      dec_dims.push_back(2 * view_dims[v]);
      heads = gaussian_heads(view_dims[v]);
    } else {
      dec_dims.push_back(view_dims[v]);
      heads = {{0, view_dims[v], Activation::Logistic}};
    }
    Mlp decoder(dec_dims, heads);
    decoder.init_uniform(rng);

    model.encoders.push_back(std::move(encoder));
    model.decoders.push_back(std::move(decoder));
  }
  model.prior = MixturePrior(num_clusters, dz);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int c = 0; c < num_clusters; ++c) {
    for (Eigen::Index d = 0; d < dz; ++d) model.prior.means()(c, d) = normal(rng);
  }
  return model;
}

ModelGradients ModelGradients::zeros_like(const DmgmmModel& model) {
  ModelGradients g;
  for (const auto& e : model.encoders) g.encoders.push_back(Eigen::VectorXd::Zero(e.parameter_count()));
  for (const auto& d : model.decoders) g.decoders.push_back(Eigen::VectorXd::Zero(d.parameter_count()));
  g.prior = Eigen::VectorXd::Zero(model.prior.parameters().size());
  return g;
}

// ---------------------------------------------------------------------------
// Encoding and fusion

std::vector<GaussianPosterior> encode_view(const DmgmmModel& model, int view,
                                           const Eigen::MatrixXd& rows) {
  const Eigen::Index dz = model.latent_dim;
  const Eigen::MatrixXd out = model.encoders.at(static_cast<std::size_t>(view)).forward(rows);
  std::vector<GaussianPosterior> posts;
  posts.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    posts.push_back({out.row(r).head(dz).transpose(),
                     out.row(r).tail(dz).transpose().cwiseAbs2()});
  }
  return posts;
}

DatasetPosteriors encode_dataset(const DmgmmModel& model, const MultiViewDataset& data) {
  const Eigen::Index n = data.num_samples();
  const Eigen::Index dz = model.latent_dim;
  DatasetPosteriors out;
  Eigen::ArrayXXd precision = Eigen::ArrayXXd::Zero(n, dz);
  Eigen::ArrayXXd weighted = Eigen::ArrayXXd::Zero(n, dz);
  for (int v = 0; v < data.num_views(); ++v) {
    PosteriorMatrix pm{Eigen::MatrixXd::Zero(n, dz), Eigen::MatrixXd::Ones(n, dz)};
    const auto rows = data.observed_samples(v);
    if (!rows.empty()) {
      const auto& x = data.views[static_cast<std::size_t>(v)];
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(rows.size()), x.cols());
      for (std::size_t r = 0; r < rows.size(); ++r) batch.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
      const Eigen::MatrixXd enc = model.encoders[static_cast<std::size_t>(v)].forward(batch);
      for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto i = rows[r];
        const auto rr = static_cast<Eigen::Index>(r);
        pm.mu.row(i) = enc.row(rr).head(dz);
        pm.var.row(i) = enc.row(rr).tail(dz).cwiseAbs2();
      }
    }
    out.views.push_back(std::move(pm));
  }
  // Views are folded in ascending order, matching poe_aggregate.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int v = 0; v < data.num_views(); ++v) {
      if (!data.observed(i, v)) continue;
      const auto& pm = out.views[static_cast<std::size_t>(v)];
      const Eigen::ArrayXd p = pm.var.row(i).transpose().array().max(kVarianceFloor).inverse();
      precision.row(i) += p.transpose();
      weighted.row(i) += (pm.mu.row(i).transpose().array() * p).transpose();
    }
  }
  out.aggregated.var = precision.inverse().matrix();
  out.aggregated.mu = (weighted / precision).matrix();
  return out;
}

namespace {

// Imputes `view` for `sample` given squared-free W2 distances from `sample`
// to every other sample.
GaussianPosterior impute_from_distances(const MultiViewDataset& data,
                                        const DatasetPosteriors& posteriors,
                                        const Eigen::VectorXd& distance, Eigen::Index sample,
                                        int view, int k) {
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index j = 0; j < data.num_samples(); ++j) {
    if (j != sample && data.observed(j, view)) candidates.push_back(j);
  }
  if (candidates.empty()) {
    throw ValidationError("cannot impute view " + std::to_string(view) +
                          ": no sample observes it");
  }
  if (k <= 0) throw ValidationError("neighbour count must be positive");
  const auto take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take),
                    candidates.end(), [&](Eigen::Index a, Eigen::Index b) {
                      if (distance(a) != distance(b)) return distance(a) < distance(b);
                      return a < b;
                    });
  candidates.resize(take);

  Eigen::VectorXd w(static_cast<Eigen::Index>(take));
  for (std::size_t r = 0; r < take; ++r) w(static_cast<Eigen::Index>(r)) = -distance(candidates[r]);
  w = (w.array() - w.maxCoeff()).exp().matrix();
  w /= w.sum();

  const auto& pm = posteriors.views[static_cast<std::size_t>(view)];
  const Eigen::Index dz = pm.mu.cols();
  GaussianPosterior out{Eigen::VectorXd::Zero(dz), Eigen::VectorXd::Zero(dz)};
  for (std::size_t r = 0; r < take; ++r) {
    out.mu += w(static_cast<Eigen::Index>(r)) * pm.mu.row(candidates[r]).transpose();
  }
  for (std::size_t r = 0; r < take; ++r) {
    const Eigen::VectorXd dev = pm.mu.row(candidates[r]).transpose() - out.mu;
    out.var += w(static_cast<Eigen::Index>(r)) *
               (pm.var.row(candidates[r]).transpose() + dev.cwiseAbs2());
  }
  return out;
}

Eigen::VectorXd w2_to_all(const PosteriorMatrix& agg, const Eigen::MatrixXd& sd, Eigen::Index i) {
  const Eigen::Index n = agg.mu.rows();
  Eigen::VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j) = std::sqrt((agg.mu.row(i) - agg.mu.row(j)).squaredNorm() +
                       (sd.row(i) - sd.row(j)).squaredNorm());
  }
  return out;
}

}  // namespace

GaussianPosterior impute_distribution(const MultiViewDataset& data,
                                      const DatasetPosteriors& posteriors, Eigen::Index sample,
                                      int view, int k) {
  const Eigen::MatrixXd sd = posteriors.aggregated.var.cwiseSqrt();
  return impute_from_distances(data, posteriors, w2_to_all(posteriors.aggregated, sd, sample),
                               sample, view, k);
}

SampleImputations impute_selected(const MultiViewDataset& data, const ibsi::InfoTable& table,
                                  const DatasetPosteriors& posteriors, int k, unsigned threads) {
  const Eigen::Index n = data.num_samples();
  SampleImputations out(static_cast<std::size_t>(n));
  std::vector<std::vector<int>> wanted(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> samples;
  for (const auto& e : table.entries) {
    if (!e.selected) continue;
    auto& w = wanted[static_cast<std::size_t>(e.sample)];
    if (w.empty()) samples.push_back(e.sample);
    w.push_back(e.view);
  }
  if (samples.empty()) return out;
  const Eigen::MatrixXd sd = posteriors.aggregated.var.cwiseSqrt();
  parallel_for(samples.size(), threads, [&](std::size_t s) {
    const Eigen::Index i = samples[s];
    const Eigen::VectorXd dist = w2_to_all(posteriors.aggregated, sd, i);
    for (int v : wanted[static_cast<std::size_t>(i)]) {
      out[static_cast<std::size_t>(i)].push_back(
          {v, impute_from_distances(data, posteriors, dist, i, v, k)});
    }
  });
  return out;
}

GaussianPosterior fuse_with_imputation(const MultiViewDataset& data, const ibsi::InfoTable& table,
                                       Eigen::Index sample, const DatasetPosteriors& posteriors,
                                       int k) {
  std::vector<GaussianPosterior> experts;
  for (int v : data.observed_views(sample)) {
    experts.push_back(posteriors.views[static_cast<std::size_t>(v)].row(sample));
  }
  for (int v = 0; v < data.num_views(); ++v) {
    if (!data.observed(sample, v) && table.selected(sample, v)) {
      experts.push_back(impute_distribution(data, posteriors, sample, v, k));
    }
  }
  return poe_aggregate(experts);
}

PosteriorMatrix fused_posteriors(const MultiViewDataset& data, const DatasetPosteriors& observed,
                                 const SampleImputations& imputations) {
  PosteriorMatrix out = observed.aggregated;
  for (Eigen::Index i = 0; i < data.num_samples(); ++i) {
    const auto& imps = imputations.empty() ? std::vector<Imputation>{}
                                           : imputations[static_cast<std::size_t>(i)];
    if (imps.empty()) continue;
    std::vector<GaussianPosterior> experts;
    for (int v : data.observed_views(i)) {
      experts.push_back(observed.views[static_cast<std::size_t>(v)].row(i));
    }
    for (const auto& imp : imps) experts.push_back(imp.posterior);
    const auto fused = poe_aggregate(experts);
    out.mu.row(i) = fused.mu.transpose();
    out.var.row(i) = fused.var.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cluster posterior

namespace {

Eigen::VectorXd component_log_density(const MixturePrior& prior, const Eigen::VectorXd& z,
                                      const Eigen::MatrixXd& var, const Eigen::VectorXd& log_pi) {
  const int k = prior.num_components();
  Eigen::VectorXd ell(k);
  const auto means = prior.means();
  for (int c = 0; c < k; ++c) {
    double s = 0.0;
    for (Eigen::Index d = 0; d < z.size(); ++d) {
      const double diff = z(d) - means(c, d);
      s += kLog2Pi + std::log(var(c, d)) + diff * diff / var(c, d);
    }
    ell(c) = log_pi(c) - 0.5 * s;
  }
  return ell;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& ell) {
  const Eigen::VectorXd e = (ell.array() - ell.maxCoeff()).exp().matrix();
  return e / e.sum();
}

}  // namespace

Eigen::VectorXd responsibilities(const MixturePrior& prior, const Eigen::VectorXd& z) {
  if (z.size() != prior.dim()) throw ValidationError("latent sample has the wrong dimension");
  return softmax(component_log_density(prior, z, prior.variances(), prior.log_weights()));
}

double categorical_kl(const Eigen::VectorXd& q, const Eigen::VectorXd& p) {
  double kl = 0.0;
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    if (q(k) > 0.0) kl += q(k) * (std::log(q(k)) - std::log(p(k)));
  }
  return kl;
}

double coherence_loss(const GaussianPosterior& aggregated,
                      std::span<const GaussianPosterior> view_posteriors) {
  if (view_posteriors.empty()) throw ValidationError("coherence needs at least one view");
  double total = 0.0;
  for (const auto& vp : view_posteriors) total += kl_divergence(aggregated, vp);
  return total / static_cast<double>(view_posteriors.size());
}

std::vector<int> assign_clusters(const MixturePrior& prior, const PosteriorMatrix& fused) {
  const Eigen::MatrixXd var = prior.variances();
  const Eigen::VectorXd log_pi = prior.log_weights();
  std::vector<int> out(static_cast<std::size_t>(fused.mu.rows()));
  for (Eigen::Index i = 0; i < fused.mu.rows(); ++i) {
    const Eigen::VectorXd ell =
        component_log_density(prior, fused.mu.row(i).transpose(), var, log_pi);
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < ell.size(); ++c) {
      if (ell(c) > ell(best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss and gradient

LossTerms evaluate_loss(const DmgmmModel& model, const MultiViewDataset& data,
                        std::span<const Eigen::Index> batch,
                        const SampleImputations& imputations, const Eigen::MatrixXd& noise,
                        double alpha, ModelGradients* grads) {
  const auto nb = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index dz = model.latent_dim;
  const int nv = data.num_views();
  const int nk = model.prior.num_components();
  if (nb == 0) throw ValidationError("empty batch");
  if (noise.rows() != nb || noise.cols() != dz) {
    throw ValidationError("noise must be batch x latent_dim");
  }
  if (model.num_views() != nv) throw ValidationError("model and dataset disagree on views");
  const double scale = 1.0 / static_cast<double>(nb);
  const bool want_grad = grads != nullptr;
  if (want_grad) *grads = ModelGradients::zeros_like(model);

  // Encode each view over the batch rows observing it.
  std::vector<std::vector<Eigen::Index>> rows_of(static_cast<std::size_t>(nv));
  Eigen::MatrixXi row_slot = Eigen::MatrixXi::Constant(nb, nv, -1);
  for (Eigen::Index b = 0; b < nb; ++b) {
    for (int v = 0; v < nv; ++v) {
      if (data.observed(batch[static_cast<std::size_t>(b)], v)) {
        row_slot(b, v) = static_cast<int>(rows_of[static_cast<std::size_t>(v)].size());
        rows_of[static_cast<std::size_t>(v)].push_back(b);
      }
    }
  }
  std::vector<MlpCache> enc_cache(static_cast<std::size_t>(nv));
  std::vector<Eigen::MatrixXd> enc_out(static_cast<std::size_t>(nv));
  for (int v = 0; v < nv; ++v) {
    const auto& rows = rows_of[static_cast<std::size_t>(v)];
    if (rows.empty()) continue;
    const auto& x = data.views[static_cast<std::size_t>(v)];
    Eigen::MatrixXd xb(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      xb.row(static_cast<Eigen::Index>(r)) = x.row(batch[static_cast<std::size_t>(rows[r])]);
    }
    enc_out[static_cast<std::size_t>(v)] =
        model.encoders[static_cast<std::size_t>(v)].forward(xb, &enc_cache[static_cast<std::size_t>(v)]);
  }
  auto view_mu = [&](Eigen::Index b, int v) {
    return enc_out[static_cast<std::size_t>(v)].row(row_slot(b, v)).head(dz);
  };
  auto view_sd = [&](Eigen::Index b, int v) {
    return enc_out[static_cast<std::size_t>(v)].row(row_slot(b, v)).tail(dz);
  };

  // Product of experts over observed then imputed posteriors.
  Eigen::MatrixXd agg_mu(nb, dz), agg_var(nb, dz), z(nb, dz);
  for (Eigen::Index b = 0; b < nb; ++b) {
    const auto i = batch[static_cast<std::size_t>(b)];
    Eigen::ArrayXd precision = Eigen::ArrayXd::Zero(dz);
    Eigen::ArrayXd weighted = Eigen::ArrayXd::Zero(dz);
    for (int v = 0; v < nv; ++v) {
      if (row_slot(b, v) < 0) continue;
      const Eigen::ArrayXd p =
          view_sd(b, v).transpose().array().square().max(kVarianceFloor).inverse();
      precision += p;
      weighted += view_mu(b, v).transpose().array() * p;
    }
    if (!imputations.empty()) {
      for (const auto& imp : imputations[static_cast<std::size_t>(i)]) {
        const Eigen::ArrayXd p = imp.posterior.var.array().max(kVarianceFloor).inverse();
        precision += p;
        weighted += imp.posterior.mu.array() * p;
      }
    }
    agg_var.row(b) = precision.inverse().matrix().transpose();
    agg_mu.row(b) = (weighted / precision).matrix().transpose();
    z.row(b) = agg_mu.row(b) + agg_var.row(b).cwiseSqrt().cwiseProduct(noise.row(b));
  }

  LossTerms terms;
  Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(nb, dz);
  Eigen::MatrixXd d_mu = Eigen::MatrixXd::Zero(nb, dz);
  Eigen::MatrixXd d_var = Eigen::MatrixXd::Zero(nb, dz);
  std::vector<Eigen::MatrixXd> d_enc(static_cast<std::size_t>(nv));
  for (int v = 0; v < nv; ++v) {
    d_enc[static_cast<std::size_t>(v)] =
        Eigen::MatrixXd::Zero(enc_out[static_cast<std::size_t>(v)].rows(), 2 * dz);
  }

  // Reconstruction of observed views.
  for (int v = 0; v < nv; ++v) {
    const auto& rows = rows_of[static_cast<std::size_t>(v)];
    if (rows.empty()) continue;
    const auto& x = data.views[static_cast<std::size_t>(v)];
    const auto& dec = model.decoders[static_cast<std::size_t>(v)];
    const auto nr = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd zb(nr, dz), xb(nr, x.cols());
    for (Eigen::Index r = 0; r < nr; ++r) {
      zb.row(r) = z.row(rows[static_cast<std::size_t>(r)]);
      xb.row(r) = x.row(batch[static_cast<std::size_t>(rows[static_cast<std::size_t>(r)])]);
    }
    MlpCache cache;
    const Eigen::MatrixXd out = dec.forward(zb, &cache);
    Eigen::MatrixXd d_out(out.rows(), out.cols());
    const Eigen::Index dv = x.cols();
    double nll = 0.0;
    if (model.likelihoods[static_cast<std::size_t>(v)] == Likelihood::Gaussian) {
      for (Eigen::Index r = 0; r < nr; ++r) {
        for (Eigen::Index c = 0; c < dv; ++c) {
          const double m = out(r, c);
          const double s = out(r, dv + c);
          const double var = std::max(s * s, kVarianceFloor);
          const double diff = xb(r, c) - m;
          nll += 0.5 * kLog2Pi + 0.5 * std::log(var) + 0.5 * diff * diff / var;
          d_out(r, c) = -diff / var * scale;
          d_out(r, dv + c) = (1.0 / s - diff * diff / (var * s)) * scale;
        }
      }
    } else {
      for (Eigen::Index r = 0; r < nr; ++r) {
        for (Eigen::Index c = 0; c < dv; ++c) {
          const double p = std::clamp(out(r, c), kProbabilityClamp, 1.0 - kProbabilityClamp);
          const double t = xb(r, c);
          nll -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
          d_out(r, c) = (-t / p + (1.0 - t) / (1.0 - p)) * scale;
        }
      }
    }
    terms.reconstruction += nll * scale;
    if (want_grad) {
      Eigen::MatrixXd d_in;
      grads->decoders[static_cast<std::size_t>(v)] = dec.backward(cache, d_out, &d_in);
      for (Eigen::Index r = 0; r < nr; ++r) d_z.row(rows[static_cast<std::size_t>(r)]) += d_in.row(r);
    }
  }

  // Mixture terms.
  const Eigen::MatrixXd prior_var = model.prior.variances();
  const Eigen::VectorXd log_pi = model.prior.log_weights();
  const auto prior_mu = model.prior.means();
  Eigen::VectorXd d_log_pi = Eigen::VectorXd::Zero(nk);
  Eigen::MatrixXd d_prior_mu = Eigen::MatrixXd::Zero(nk, dz);
  Eigen::MatrixXd d_prior_var = Eigen::MatrixXd::Zero(nk, dz);
  for (Eigen::Index b = 0; b < nb; ++b) {
    const Eigen::VectorXd zb = z.row(b).transpose();
    const Eigen::VectorXd ell = component_log_density(model.prior, zb, prior_var, log_pi);
    const double lmax = ell.maxCoeff();
    const double lse = lmax + std::log((ell.array() - lmax).exp().sum());
    const Eigen::VectorXd log_gamma = (ell.array() - lse).matrix();
    const Eigen::VectorXd gamma = log_gamma.array().exp().matrix();

    Eigen::VectorXd kl(nk);
    for (int c = 0; c < nk; ++c) {
      double s = 0.0;
      for (Eigen::Index d = 0; d < dz; ++d) {
        const double va = std::max(agg_var(b, d), kVarianceFloor);
        const double vk = prior_var(c, d);
        const double diff = agg_mu(b, d) - prior_mu(c, d);
        s += std::log(vk / va) + va / vk + diff * diff / vk - 1.0;
      }
      kl(c) = 0.5 * s;
    }
    const double latent_kl = gamma.dot(kl);
    const double cluster_kl = gamma.dot(log_gamma - log_pi);
    terms.latent_kl += latent_kl * scale;
    terms.cluster_kl += cluster_kl * scale;
    if (!want_grad) continue;

    // dL/dgamma, then through the softmax to the component log-densities.
    const Eigen::VectorXd g = (kl.array() + log_gamma.array() + 1.0 - log_pi.array()).matrix();
    const double gbar = gamma.dot(g);
    const Eigen::VectorXd d_ell = (gamma.array() * (g.array() - gbar)).matrix() * scale;
    for (int c = 0; c < nk; ++c) {
      const double wk = gamma(c) * scale;
      d_log_pi(c) += d_ell(c) - wk;
      for (Eigen::Index d = 0; d < dz; ++d) {
        const double vk = prior_var(c, d);
        const double dzk = zb(d) - prior_mu(c, d);
        d_z(b, d) -= d_ell(c) * dzk / vk;
        d_prior_mu(c, d) += d_ell(c) * dzk / vk;
        d_prior_var(c, d) += d_ell(c) * 0.5 * (dzk * dzk / (vk * vk) - 1.0 / vk);

        const double va = std::max(agg_var(b, d), kVarianceFloor);
        const double dmk = agg_mu(b, d) - prior_mu(c, d);
        d_mu(b, d) += wk * dmk / vk;
        d_var(b, d) += wk * 0.5 * (1.0 / vk - 1.0 / va);
        d_prior_mu(c, d) -= wk * dmk / vk;
        d_prior_var(c, d) += wk * 0.5 * (1.0 / vk - va / (vk * vk) - dmk * dmk / (vk * vk));
      }
    }
  }

  // Coherence between the fused posterior and each observed view posterior.
  for (Eigen::Index b = 0; b < nb; ++b) {
    int count = 0;
    for (int v = 0; v < nv; ++v) count += row_slot(b, v) >= 0 ? 1 : 0;
    double coh = 0.0;
    const double w = scale / static_cast<double>(count);
    for (int v = 0; v < nv; ++v) {
      if (row_slot(b, v) < 0) continue;
      const auto mu_v = view_mu(b, v);
      const auto sd_v = view_sd(b, v);
      auto d_enc_row = d_enc[static_cast<std::size_t>(v)].row(row_slot(b, v));
      for (Eigen::Index d = 0; d < dz; ++d) {
        const double va = std::max(agg_var(b, d), kVarianceFloor);
        const double vv = std::max(sd_v(d) * sd_v(d), kVarianceFloor);
        const double diff = agg_mu(b, d) - mu_v(d);
        coh += 0.5 * (std::log(vv / va) + va / vv + diff * diff / vv - 1.0);
        if (!want_grad) continue;
        const double aw = alpha * w;
        d_mu(b, d) += aw * diff / vv;
        d_var(b, d) += aw * 0.5 * (1.0 / vv - 1.0 / va);
        d_enc_row(d) -= aw * diff / vv;
        const double d_vv = aw * 0.5 * (1.0 / vv - va / (vv * vv) - diff * diff / (vv * vv));
        d_enc_row(dz + d) += d_vv * 2.0 * sd_v(d);
      }
    }
    terms.coherence += coh / static_cast<double>(count) * scale;
  }

  check_finite(terms.reconstruction, "reconstruction");
  check_finite(terms.latent_kl, "latent_kl");
  check_finite(terms.cluster_kl, "cluster_kl");
  check_finite(terms.coherence, "coherence");
  terms.elbo = terms.reconstruction + terms.latent_kl + terms.cluster_kl;
  terms.total = total_loss(terms.elbo, terms.coherence, alpha);
  if (!want_grad) return terms;

  // z = mu + sqrt(var) * eps, then back through the product of experts.
  for (Eigen::Index b = 0; b < nb; ++b) {
    for (Eigen::Index d = 0; d < dz; ++d) {
      const double sd = std::sqrt(agg_var(b, d));
      d_mu(b, d) += d_z(b, d);
      d_var(b, d) += d_z(b, d) * noise(b, d) / (2.0 * sd);
    }
    for (int v = 0; v < nv; ++v) {
      if (row_slot(b, v) < 0) continue;
      const auto mu_v = view_mu(b, v);
      const auto sd_v = view_sd(b, v);
      auto d_enc_row = d_enc[static_cast<std::size_t>(v)].row(row_slot(b, v));
      for (Eigen::Index d = 0; d < dz; ++d) {
        const double var = agg_var(b, d);
        const double vv = std::max(sd_v(d) * sd_v(d), kVarianceFloor);
        const double d_mu_v = d_mu(b, d) * var / vv;
        const double d_vv = d_var(b, d) * var * var / (vv * vv) +
                            d_mu(b, d) * var / (vv * vv) * (agg_mu(b, d) - mu_v(d));
        d_enc_row(d) += d_mu_v;
        d_enc_row(dz + d) += d_vv * 2.0 * sd_v(d);
      }
    }
  }
  for (int v = 0; v < nv; ++v) {
    if (rows_of[static_cast<std::size_t>(v)].empty()) continue;
    grads->encoders[static_cast<std::size_t>(v)] = model.encoders[static_cast<std::size_t>(v)].backward(
        enc_cache[static_cast<std::size_t>(v)], d_enc[static_cast<std::size_t>(v)]);
  }

  // Prior: logits through log-softmax, variances through softplus.
  const Eigen::VectorXd pi = log_pi.array().exp().matrix();
  const double d_log_pi_sum = d_log_pi.sum();
  Eigen::VectorXd& gp = grads->prior;
  for (int c = 0; c < nk; ++c) gp(c) = d_log_pi(c) - pi(c) * d_log_pi_sum;
  const auto raw = model.prior.raw_variances();
  for (int c = 0; c < nk; ++c) {
    for (Eigen::Index d = 0; d < dz; ++d) {
      gp(nk + c * dz + d) = d_prior_mu(c, d);
      gp(nk + nk * dz + c * dz + d) = d_prior_var(c, d) * logistic(raw(c, d));
    }
  }
  return terms;
}

LossTerms elbo_loss(const DmgmmModel& model, const MultiViewDataset& data,
                    std::span<const Eigen::Index> batch, const SampleImputations& imputations,
                    std::mt19937_64& rng, ModelGradients* grads) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd noise(static_cast<Eigen::Index>(batch.size()), model.latent_dim);
  for (Eigen::Index r = 0; r < noise.rows(); ++r) {
    for (Eigen::Index c = 0; c < noise.cols(); ++c) noise(r, c) = normal(rng);
  }
  return evaluate_loss(model, data, batch, imputations, noise, 0.0, grads);
}

}  // namespace si3
