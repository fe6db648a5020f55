#include <numeric>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "si3/dmgmm.hpp"
#include "si3/ibsi.hpp"
#include "si3/mlp.hpp"
#include "si3/synthetic.hpp"

namespace {

si3::MultiViewDataset bench_data(Eigen::Index n, double eta) {
  si3::SyntheticSpec spec;
  spec.num_samples = n;
  spec.seed = 3;
  auto d = si3::normalize(si3::generate_synthetic(spec));
  if (eta > 0.0) d.mask = si3::generate_mask(n, d.num_views(), {{0.7, 0.5, 0.3}, eta, 3});
  return d;
}

void BM_MlpForward(benchmark::State& state) {
  const Eigen::Index batch = state.range(0);
  si3::Mlp mlp({20, 256, 64, 20}, {{0, 10, si3::Activation::Identity}, {10, 10, si3::Activation::Softplus}});
  std::mt19937_64 rng(1);
  mlp.init_uniform(rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(batch, 20);
  for (auto _ : state) benchmark::DoNotOptimize(mlp.forward(x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(100)->Arg(600);

void BM_MlpBackward(benchmark::State& state) {
  const Eigen::Index batch = state.range(0);
  si3::Mlp mlp({20, 256, 64, 20}, {{0, 10, si3::Activation::Identity}, {10, 10, si3::Activation::Softplus}});
  std::mt19937_64 rng(1);
  mlp.init_uniform(rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(batch, 20);
  si3::MlpCache cache;
  mlp.forward(x, &cache);
  const Eigen::MatrixXd grad = Eigen::MatrixXd::Ones(batch, 20);
  for (auto _ : state) benchmark::DoNotOptimize(mlp.backward(cache, grad));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpBackward)->Arg(1)->Arg(100)->Arg(600);

void BM_InfoScore(benchmark::State& state) {
  const auto d = bench_data(state.range(0), 0.5);
  si3::ibsi::CorrMatrix corr{Eigen::MatrixXd::Constant(3, 3, 0.5)};
  corr.values.diagonal().setOnes();
  const auto sims = si3::ibsi::all_similarities(d);
  for (auto _ : state) benchmark::DoNotOptimize(si3::ibsi::info_score(d, sims, corr));
}
BENCHMARK(BM_InfoScore)->Arg(200)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_Similarities(benchmark::State& state) {
  const auto d = bench_data(state.range(0), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(si3::ibsi::all_similarities(d));
}
BENCHMARK(BM_Similarities)->Arg(200)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_LossAndGradient(benchmark::State& state) {
  const Eigen::Index batch = state.range(0);
  const auto d = bench_data(600, 0.5);
  std::mt19937_64 rng(2);
  const std::vector<Eigen::Index> dims = {20, 15, 10};
  const auto model = si3::make_model(dims, 4, {}, rng);
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(batch));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  const si3::SampleImputations none(600);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd noise(batch, model.latent_dim);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise(i) = normal(rng);
  auto grads = si3::ModelGradients::zeros_like(model);
  for (auto _ : state) {
    benchmark::DoNotOptimize(si3::evaluate_loss(model, d, rows, none, noise, 5.0, &grads));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_LossAndGradient)->Arg(100)->Arg(600)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
