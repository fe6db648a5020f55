#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "si3/dataset.hpp"
#include "si3/ibsi.hpp"
#include "si3/synthetic.hpp"
#include "si3/trainer.hpp"

namespace si3::cli {

namespace fs = std::filesystem;

struct DataConfig {
  std::vector<fs::path> views;
  std::optional<fs::path> mask;
  std::optional<fs::path> labels;
  int clusters = 0;  // 0: infer from labels
  bool normalize = true;
};

// A mask is generated whenever the cell's missing rate is > 0, replacing any
// mask file. Every run of a cell shares the mask; only the training seed
// changes between runs.
struct MaskConfig {
  std::vector<double> view_probs;  // empty: uniform
  std::uint64_t mask_seed = 0;
};

struct ExperimentConfig {
  DataConfig data;
  MaskConfig mask;
  TrainConfig train;
  // Sweep axes. Run r of every cell trains with seed train.seed + r.
  std::vector<double> missing_rates = {0.0};
  std::vector<double> selection_ratios = {0.5};
  std::vector<double> alphas = {5.0};
  int runs = 1;
  int plugin_neighbors = 10;
  fs::path output_dir = "out";
  unsigned workers = 1;  // concurrent sweep cells

  void validate() const;
};

// Everything that influences results, without output paths or thread counts.
nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const TrainConfig& config);

// 64-bit FNV-1a over the bytes of `text`, as 16 lowercase hex digits.
std::string fnv1a_hex(const std::string& text);
std::string config_hash(const nlohmann::json& resolved);

// Loads the configured views, applies the mask for `missing_rate` and
// normalizes if asked.
MultiViewDataset prepare_dataset(const ExperimentConfig& config, double missing_rate);

// One missing position per row: sample,view,score,selected.
struct ScoreOutput {
  ibsi::InfoTable table;
  fs::path csv;
};
ScoreOutput cmd_score(const ExperimentConfig& config);

struct FitOutput {
  nlohmann::json result;
  fs::path json;
  fs::path checkpoint;
};
// Fits at the first missing rate / selection ratio / alpha of the axes and
// writes result.json plus model.ckpt (also every `checkpoint_every` epochs
// when positive).
FitOutput cmd_fit(const ExperimentConfig& config, int checkpoint_every = 0);

struct SweepRow {
  double eta = 0.0;
  double rho = 0.0;
  double alpha = 0.0;
  int run = 0;
  std::uint64_t seed = 0;
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
};

struct SweepOutput {
  std::vector<SweepRow> rows;  // every run row, sorted by cell key
  int computed = 0;            // cells trained in this call (0 when resumed fully)
  fs::path csv;
  std::vector<fs::path> charts;
};
SweepOutput cmd_sweep(const ExperimentConfig& config);

struct PluginRow {
  std::string variant;  // no-impute, impute-all, selected@<rho>
  double rho = 0.0;
  int run = 0;
  std::uint64_t seed = 0;
  std::size_t filled = 0;
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  std::vector<int> assignments;
};
struct PluginOutput {
  std::vector<PluginRow> rows;
  fs::path csv;
};
// Raw-space neighbour-mean imputation with and without Info gating, followed
// by the same imputation-free fit, at the first missing rate.
PluginOutput cmd_plugin(const ExperimentConfig& config);

// Writes <stem>_view<v>.csv, <stem>_mask.csv and <stem>_labels.csv into dir.
void cmd_gen_data(const SyntheticSpec& spec, const fs::path& dir, const std::string& stem);
void cmd_gen_mask(Eigen::Index samples, int views, const MissingSpec& spec, const fs::path& path);

}  // namespace si3::cli
