#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace oracle {

si3::MultiViewDataset random_dataset(std::mt19937_64& rng, Eigen::Index n, int nv,
                                     double drop) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  si3::MultiViewDataset d;
  d.num_clusters = 2;
  for (int v = 0; v < nv; ++v) {
    Eigen::MatrixXd x(n, 2 + v % 3);
    for (auto& c : x.reshaped()) c = normal(rng);
    d.views.push_back(x);
  }
  d.mask = si3::Mask::Ones(n, nv);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int v = 0; v < nv; ++v) {
      if (unit(rng) < drop) d.mask(i, v) = 0;
    }
    if (d.mask.row(i).sum() == 0) d.mask(i, static_cast<int>(i % nv)) = 1;
  }
  // Every view keeps at least two observers.
  for (int v = 0; v < nv; ++v) {
    d.mask(v % n, v) = 1;
    d.mask((v + 1) % n, v) = 1;
  }
  return d;
}

si3::ibsi::CorrMatrix random_corr(std::mt19937_64& rng, int nv) {
  std::uniform_real_distribution<double> unit(si3::ibsi::kMinCorrelation, 1.0);
  si3::ibsi::CorrMatrix c{Eigen::MatrixXd::Identity(nv, nv)};
  for (int u = 0; u < nv; ++u) {
    for (int v = u + 1; v < nv; ++v) c.values(u, v) = c.values(v, u) = unit(rng);
  }
  return c;
}


namespace {

double dist(const Eigen::MatrixXd& x, Eigen::Index i, Eigen::Index j) {
  double acc = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double d = x(i, c) - x(j, c);
    acc += d * d;
  }
  return std::sqrt(acc);
}

double max_distance(const si3::MultiViewDataset& data, int u) {
  const auto& x = data.views[static_cast<std::size_t>(u)];
  double dmax = 0.0;
  for (Eigen::Index a = 0; a < data.num_samples(); ++a) {
    for (Eigen::Index b = a + 1; b < data.num_samples(); ++b) {
      if (data.observed(a, u) && data.observed(b, u)) dmax = std::max(dmax, dist(x, a, b));
    }
  }
  return dmax;
}

double sim(const si3::MultiViewDataset& data, const std::vector<double>& dmaxes, int u,
           Eigen::Index i, Eigen::Index j) {
  const auto& x = data.views[static_cast<std::size_t>(u)];
  const double dmax = dmaxes[static_cast<std::size_t>(u)];
  if (dmax <= 0.0) return 1.0;
  const double s = 1.0 - dist(x, i, j) / dmax;
  return s * s;
}

}  // namespace

std::vector<double> naive_info_scores(const si3::MultiViewDataset& data,
                                      const si3::ibsi::CorrMatrix& corr) {
  const int nv = data.num_views();
  std::vector<double> dmaxes;
  for (int u = 0; u < nv; ++u) dmaxes.push_back(max_distance(data, u));
  std::vector<double> out;
  for (Eigen::Index i = 0; i < data.num_samples(); ++i) {
    for (int v = 0; v < nv; ++v) {
      if (data.observed(i, v)) continue;
      // Support set and its contribution mask.
      std::vector<Eigen::Index> members;
      std::vector<std::vector<int>> ms;
      for (Eigen::Index j = 0; j < data.num_samples(); ++j) {
        if (!data.observed(j, v)) continue;
        std::vector<int> row(static_cast<std::size_t>(nv), 0);
        int shared = 0;
        for (int u = 0; u < nv; ++u) {
          if (u != v && data.observed(i, u) && data.observed(j, u)) {
            row[static_cast<std::size_t>(u)] = 1;
            ++shared;
          }
        }
        if (shared == 0) continue;
        row[static_cast<std::size_t>(v)] = 1;
        members.push_back(j);
        ms.push_back(row);
      }
      double score = 0.0;
      for (std::size_t r = 0; r < members.size(); ++r) {
        const Eigen::Index j = members[r];
        for (int u = 0; u < nv; ++u) {
          if (ms[r][static_cast<std::size_t>(u)] == 0) continue;
          double s = 0.0;
          if (u == v) {
            double num = 0.0, den = 0.0;
            for (int w = 0; w < nv; ++w) {
              if (ms[r][static_cast<std::size_t>(w)] == 0 || w == v) continue;
              num += sim(data, dmaxes, w, i, j) * corr(w, v);
              den += corr(w, v);
            }
            s = num / den;
          } else {
            s = sim(data, dmaxes, u, i, j);
          }
          score += s * corr(u, v);
        }
      }
      out.push_back(score);
    }
  }
  return out;
}

double brute_force_accuracy(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double hits = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (perm[static_cast<std::size_t>(pred[i])] == truth[i]) hits += 1.0;
    }
    best = std::max(best, hits / static_cast<double>(pred.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double pair_counting_ari(const std::vector<int>& pred, const std::vector<int>& truth) {
  // Pair-confusion counts: both together, only pred, only truth, neither.
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = i + 1; j < pred.size(); ++j) {
      const bool sp = pred[i] == pred[j];
      const bool st = truth[i] == truth[j];
      if (sp && st) a += 1.0;
      else if (sp) b += 1.0;
      else if (st) c += 1.0;
      else d += 1.0;
    }
  }
  const double denom = (a + b) * (b + d) + (a + c) * (c + d);
  if (denom == 0.0) return 1.0;
  return 2.0 * (a * d - b * c) / denom;
}

Eigen::MatrixXd reference_forward(const si3::Mlp& net, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd h = x;
  const auto& dims = net.layer_dims();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto w = net.weights(l);
    const auto bias = net.bias(l);
    Eigen::MatrixXd next(h.rows(), dims[l + 1]);
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      for (Eigen::Index o = 0; o < dims[l + 1]; ++o) {
        double s = bias(o);
        for (Eigen::Index i = 0; i < dims[l]; ++i) s += h(r, i) * w(i, o);
        const bool hidden = l + 2 < dims.size();
        next(r, o) = hidden ? std::max(0.0, s) : s;
      }
    }
    h = next;
  }
  for (const auto& head : net.heads()) {
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      for (Eigen::Index c = head.offset; c < head.offset + head.width; ++c) {
        const double a = h(r, c);
        switch (head.kind) {
          case si3::Activation::Identity:
            break;
          case si3::Activation::Softplus:
            h(r, c) = std::log(1.0 + std::exp(a)) + net.sigma_min();
            break;
          case si3::Activation::Logistic:
            h(r, c) = 1.0 / (1.0 + std::exp(-a));
            break;
        }
      }
    }
  }
  return h;
}

Eigen::VectorXd central_difference(Eigen::VectorXd& params, const std::function<double()>& f,
                                   double h) {
  Eigen::VectorXd g(params.size());
  for (Eigen::Index p = 0; p < params.size(); ++p) {
    const double saved = params(p);
    params(p) = saved + h;
    const double up = f();
    params(p) = saved - h;
    const double down = f();
    params(p) = saved;
    g(p) = (up - down) / (2.0 * h);
  }
  return g;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

LossInstance random_loss_instance(std::uint64_t seed, si3::Likelihood likelihood) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  LossInstance inst;
  const Eigen::Index n = 7;
  const int nv = 3;
  const std::vector<Eigen::Index> dims = {3, 2, 4};
  inst.data.num_clusters = 3;
  inst.data.mask = si3::Mask::Ones(n, nv);
  for (int v = 0; v < nv; ++v) {
    Eigen::MatrixXd x(n, dims[static_cast<std::size_t>(v)]);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        x(i, c) = likelihood == si3::Likelihood::Bernoulli ? coin(rng) : normal(rng);
      }
    }
    inst.data.views.push_back(x);
  }
  // Sample 0 keeps view 0 only, sample 1 loses view 2, the rest are complete.
  inst.data.mask(0, 1) = 0;
  inst.data.mask(0, 2) = 0;
  inst.data.mask(1, 2) = 0;

  si3::ModelOptions opts;
  opts.latent_dim = 3;
  opts.hidden = {6, 5};
  opts.likelihoods.assign(nv, likelihood);
  inst.model = si3::make_model(dims, inst.data.num_clusters, opts, rng);
  // Biases away from zero keep ReLU kinks away from the evaluation point.
  for (auto* nets : {&inst.model.encoders, &inst.model.decoders}) {
    for (auto& net : *nets) {
      for (std::size_t l = 0; l < net.num_layers(); ++l) {
        for (Eigen::Index b = 0; b < net.bias(l).size(); ++b) net.bias(l)(b) = 0.3 * normal(rng);
      }
    }
  }
  auto& prior = inst.model.prior;
  for (int k = 0; k < prior.num_components(); ++k) {
    prior.logits()(k) = 0.5 * normal(rng);
    for (Eigen::Index d = 0; d < prior.dim(); ++d) prior.raw_variances()(k, d) = 0.5 * normal(rng);
  }

  inst.batch = {0, 1, 3, 4, 6};
  inst.imputations.assign(static_cast<std::size_t>(n), {});
  si3::GaussianPosterior imp{Eigen::VectorXd(3), Eigen::VectorXd(3)};
  for (int d = 0; d < 3; ++d) {
    imp.mu(d) = normal(rng);
    imp.var(d) = 0.2 + std::abs(normal(rng));
  }
  inst.imputations[0].push_back({2, imp});
  inst.noise = Eigen::MatrixXd(static_cast<Eigen::Index>(inst.batch.size()), 3);
  for (Eigen::Index r = 0; r < inst.noise.rows(); ++r) {
    for (Eigen::Index c = 0; c < 3; ++c) inst.noise(r, c) = normal(rng);
  }
  inst.alpha = 0.5 + 4.5 * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return inst;
}

double max_gradient_error(LossInstance& inst, double h, double floor) {
  si3::ModelGradients grads;
  si3::evaluate_loss(inst.model, inst.data, inst.batch, inst.imputations, inst.noise, inst.alpha,
                     &grads);
  auto loss = [&] {
    return si3::evaluate_loss(inst.model, inst.data, inst.batch, inst.imputations, inst.noise,
                              inst.alpha, nullptr)
        .total;
  };
  double worst = 0.0;
  auto check = [&](Eigen::VectorXd& params, const Eigen::VectorXd& analytic) {
    const Eigen::VectorXd numeric = central_difference(params, loss, h);
    for (Eigen::Index p = 0; p < params.size(); ++p) {
      worst = std::max(worst, relative_error(analytic(p), numeric(p), floor));
    }
  };
  for (std::size_t v = 0; v < inst.model.encoders.size(); ++v) {
    check(inst.model.encoders[v].parameters(), grads.encoders[v]);
    check(inst.model.decoders[v].parameters(), grads.decoders[v]);
  }
  check(inst.model.prior.parameters(), grads.prior);
  return worst;
}

}  // namespace oracle
