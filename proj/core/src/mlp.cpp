#include "si3/mlp.hpp"

#include <cmath>
#include <sstream>

#include "si3/error.hpp"

namespace si3 {

double softplus(double a) {
  return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

double logistic(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

double softplus_inverse(double y) {
  // log(e^y - 1), written to stay accurate for large and tiny y.
  return y > 30.0 ? y : std::log(std::expm1(y));
}

Mlp::Mlp(std::vector<Eigen::Index> layer_dims, std::vector<OutputHead> heads,
         double sigma_min)
    : dims_(std::move(layer_dims)), heads_(std::move(heads)), sigma_min_(sigma_min) {
  if (dims_.size() < 2) throw ValidationError("an MLP needs at least input and output dims");
  for (auto d : dims_) {
    if (d <= 0) throw ValidationError("MLP layer dims must be positive");
  }
  if (heads_.empty()) heads_.push_back({0, dims_.back(), Activation::Identity});
  Eigen::Index covered = 0;
  for (const auto& h : heads_) {
    if (h.offset != covered || h.width <= 0) {
      throw ValidationError("MLP output heads must tile the output contiguously");
    }
    covered += h.width;
  }
  if (covered != dims_.back()) {
    throw ValidationError("MLP output heads cover " + std::to_string(covered) + " of " +
                          std::to_string(dims_.back()) + " outputs");
  }
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += (dims_[l] + 1) * dims_[l + 1];
  }
  params_ = Eigen::VectorXd::Zero(total);
}

void Mlp::init_uniform(std::mt19937_64& rng) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims_[l] + dims_[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto w = weights(l);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    bias(l).setZero();
  }
}

Eigen::Map<Mlp::RowMatrix> Mlp::weights(std::size_t layer) {
  return {params_.data() + offsets_[layer], dims_[layer], dims_[layer + 1]};
}

Eigen::Map<const Mlp::RowMatrix> Mlp::weights(std::size_t layer) const {
  return {params_.data() + offsets_[layer], dims_[layer], dims_[layer + 1]};
}

Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t layer) {
  return {params_.data() + offsets_[layer] + dims_[layer] * dims_[layer + 1], dims_[layer + 1]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t layer) const {
  return {params_.data() + offsets_[layer] + dims_[layer] * dims_[layer + 1], dims_[layer + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpCache* cache) const {
  if (x.cols() != input_dim()) {
    std::ostringstream msg;
    msg << "MLP input has " << x.cols() << " columns, expected " << input_dim();
    throw ValidationError(msg.str());
  }
  if (cache) {
    cache->inputs.clear();
    cache->preactivation.clear();
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = a * weights(l);
    z.rowwise() += bias(l).transpose();
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->preactivation.push_back(z);
    }
    if (l + 1 < num_layers()) {
      a = z.cwiseMax(0.0);
    } else {
      a = std::move(z);
    }
  }
  for (const auto& h : heads_) {
    auto block = a.middleCols(h.offset, h.width);
    switch (h.kind) {
      case Activation::Identity:
        break;
      case Activation::Softplus:
        block = block.unaryExpr([this](double v) { return softplus(v) + sigma_min_; });
        break;
      case Activation::Logistic:
        block = block.unaryExpr([](double v) { return logistic(v); });
        break;
    }
  }
  if (cache) cache->output = a;
  return a;
}

Eigen::VectorXd Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& d_output,
                              Eigen::MatrixXd* d_input) const {
  if (cache.preactivation.size() != num_layers() || cache.inputs.size() != num_layers() || cache.output.cols() != output_dim() ||
      d_output.rows() != cache.output.rows() || d_output.cols() != output_dim()) {
    throw ValidationError("stale MLP cache: shapes do not match the backward input");
  }
  for (std::size_t l = 0; l < num_layers(); ++l) {
    if (cache.inputs[l].cols() != dims_[l] || cache.preactivation[l].cols() != dims_[l + 1]) {
      throw ValidationError("stale MLP cache: layer " + std::to_string(l) +
                            " does not match this network");
    }
  }
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params_.size());

  Eigen::MatrixXd dz = d_output;
  const Eigen::MatrixXd& z_last = cache.preactivation.back();
  for (const auto& h : heads_) {
    auto block = dz.middleCols(h.offset, h.width);
    switch (h.kind) {
      case Activation::Identity:
        break;
      case Activation::Softplus:
        block = block.cwiseProduct(z_last.middleCols(h.offset, h.width)
                                       .unaryExpr([](double v) { return logistic(v); }));
        break;
      case Activation::Logistic: {
        const Eigen::MatrixXd p = cache.output.middleCols(h.offset, h.width);
        block = block.cwiseProduct(p.cwiseProduct((1.0 - p.array()).matrix()));
        break;
      }
    }
  }

  for (std::size_t l = num_layers(); l-- > 0;) {
    const Eigen::Index w_size = dims_[l] * dims_[l + 1];
    Eigen::Map<RowMatrix> dw(grad.data() + offsets_[l], dims_[l], dims_[l + 1]);
    dw.noalias() = cache.inputs[l].transpose() * dz;
    grad.segment(offsets_[l] + w_size, dims_[l + 1]) = dz.colwise().sum().transpose();
    if (l == 0 && !d_input) break;
    Eigen::MatrixXd da = dz * weights(l).transpose();
    if (l == 0) {
      *d_input = std::move(da);
    } else {
      dz = da.cwiseProduct(
          cache.preactivation[l - 1].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    }
  }
  return grad;
}

}  // namespace si3
