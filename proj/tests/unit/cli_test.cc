#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "si3/checkpoint.hpp"
#include "si3/cli/app.hpp"
#include "si3/cli/experiment.hpp"
#include "si3/csv.hpp"
#include "si3/error.hpp"

namespace fs = std::filesystem;
using si3::cli::run;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("si3_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    si3::SyntheticSpec spec;
    spec.num_samples = 60;
    spec.num_clusters = 3;
    spec.source_dim = 2;
    spec.view_dims = {5, 4, 3};
    spec.view_noise = {0.3, 0.3, 0.3};
    spec.seed = 5;
    si3::cli::cmd_gen_data(spec, dir_ / "data", "t");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::vector<std::string> data_flags() const {
    return {"--view",   (dir_ / "data/t_view0.csv").string(), "--view",
            (dir_ / "data/t_view1.csv").string(),             "--view",
            (dir_ / "data/t_view2.csv").string(),             "--labels",
            (dir_ / "data/t_labels.csv").string()};
  }
  std::vector<std::string> tiny(std::vector<std::string> extra) const {
    std::vector<std::string> args = data_flags();
    for (const char* f : {"--pretrain-epochs", "5", "--train-epochs", "4", "--hidden", "8",
                          "--latent-dim", "2"}) {
      args.emplace_back(f);
    }
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  }
  std::vector<std::string> cmd(const std::string& sub, std::vector<std::string> extra) const {
    auto args = tiny(std::move(extra));
    args.insert(args.begin(), sub);
    return args;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpListsEveryFlagAndExitsZero) {
  const std::map<std::string, std::vector<std::string>> flags = {
      {"fit", {"--view", "--mask", "--labels", "--clusters", "--normalize", "--view-probs",
               "--mask-seed", "--pretrain-epochs", "--train-epochs", "--batch-size",
               "--pretrain-lr", "--train-lr", "--neighbors", "--latent-dim", "--hidden",
               "--likelihood", "--seed", "--no-imputation", "--max-restarts", "--eval-every",
               "--prior-reseed-epoch", "--closed-form-prior", "--threads", "--eta", "--rho", "--alpha", "--out-dir",
               "--checkpoint-every"}},
      {"sweep", {"--runs", "--workers"}},
      {"plugin", {"--runs", "--workers", "--plugin-neighbors"}},
      {"gen-data", {"--samples", "--clusters", "--source-dim", "--separation", "--spread",
                    "--view-dims", "--view-noise", "--seed", "--out-dir", "--stem"}},
      {"gen-mask", {"--samples", "--views", "--eta", "--view-probs", "--mask-seed", "--out"}},
      {"score", {"--view", "--eta", "--rho"}},
  };
  for (const auto& [sub, expected] : flags) {
    const fs::path out = dir_ / (sub + "_help.txt");
    const std::string command = std::string(SI3_BINARY) + " " + sub + " --help > " + out.string();
    ASSERT_EQ(std::system(command.c_str()), 0) << sub;
    const std::string text = slurp(out);
    for (const auto& f : expected) EXPECT_NE(text.find(f), std::string::npos) << sub << " " << f;
  }
  const std::string top = std::string(SI3_BINARY) + " --help > " + (dir_ / "top.txt").string();
  ASSERT_EQ(std::system(top.c_str()), 0);
  EXPECT_NE(slurp(dir_ / "top.txt").find("--config"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"fit", "--bogus"}), 1);
  EXPECT_EQ(run({"nonsense"}), 1);
  EXPECT_EQ(run(cmd("fit", {"--rho", "2", "--out-dir", (dir_ / "o").string()})), 1);
  EXPECT_EQ(run(cmd("fit", {"--pretrain-lr", "1e300", "--out-dir", (dir_ / "o").string()})), 2);
  EXPECT_EQ(run(cmd("fit", {"--out-dir", (dir_ / "o").string()})), 0);
}

TEST_F(CliTest, GenMaskHitsTheTargetRate) {
  const fs::path out = dir_ / "m.csv";
  ASSERT_EQ(run({"gen-mask", "--samples", "50", "--views", "3", "--eta", "0.4", "--view-probs",
                 "0.6", "0.4", "0.2", "--mask-seed", "3", "--out", out.string()}),
            0);
  const Eigen::MatrixXd m = si3::csv::read_matrix(out);
  ASSERT_EQ(m.rows(), 50);
  ASSERT_EQ(m.cols(), 3);
  EXPECT_EQ(static_cast<int>((m.array() == 0.0).count()), 60);
  EXPECT_TRUE(((m.rowwise().sum().array()) >= 1.0).all());
}

TEST_F(CliTest, ScoreCompleteDataHasEmptyBody) {
  const fs::path out = dir_ / "s";
  ASSERT_EQ(run(cmd("score", {"--out-dir", out.string()})), 0);
  const auto l = lines(out / "info.csv");
  ASSERT_EQ(l.size(), 1u);
  EXPECT_EQ(l[0], "sample,view,score,selected");
}

TEST_F(CliTest, ScoreOneMissingCellGivesOneRow) {
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(60, 3);
  mask(7, 1) = 0.0;
  si3::csv::write_matrix(dir_ / "mask.csv", mask);
  const fs::path out = dir_ / "s";
  ASSERT_EQ(run(cmd("score", {"--mask", (dir_ / "mask.csv").string(), "--out-dir", out.string()})), 0);
  const auto l = lines(out / "info.csv");
  ASSERT_EQ(l.size(), 2u);
  EXPECT_EQ(l[1].rfind("7,1,", 0), 0u) << l[1];
}

// The frozen file was written by the first run after its scores were checked
// against the naive scorer; the test repeats that check.
TEST(CliGolden, ToyScoresMatchFrozenFileAndNaiveScorer) {
  const fs::path root = SI3_SOURCE_DIR;
  const fs::path out = fs::temp_directory_path() / "si3_cli_golden";
  fs::remove_all(out);
  si3::cli::ExperimentConfig c;
  for (int v = 0; v < 3; ++v) c.data.views.push_back(root / ("data/toy/toy_view" + std::to_string(v) + ".csv"));
  c.data.labels = root / "data/toy/toy_labels.csv";
  c.mask.view_probs = {0.7, 0.5, 0.3};
  c.missing_rates = {0.5};
  c.selection_ratios = {0.5};
  c.train.pretrain_epochs = 20;
  c.train.hidden = {32, 16};
  c.output_dir = out;
  const auto res = si3::cli::cmd_score(c);
  EXPECT_EQ(slurp(res.csv), slurp(root / "tests/golden/toy_info.csv"));

  const auto data = si3::cli::prepare_dataset(c, 0.5);
  si3::TrainConfig tc = c.train;
  tc.selection_ratio = 0.5;
  si3::DmgmmModel model = si3::initial_model(data, tc);
  const auto latents = si3::pretrain(model, data, tc);
  const auto naive = oracle::naive_info_scores(data, si3::ibsi::view_correlation(latents, data));
  ASSERT_EQ(naive.size(), res.table.entries.size());
  for (std::size_t e = 0; e < naive.size(); ++e) EXPECT_EQ(naive[e], res.table.entries[e].score);
  fs::remove_all(out);
}

TEST_F(CliTest, FitWritesResultAndLoadableCheckpoint) {
  const fs::path out = dir_ / "f";
  ASSERT_EQ(run(cmd("fit", {"--eta", "0.3", "--rho", "0.5", "--eval-every", "2",
                            "--checkpoint-every", "2", "--out-dir", out.string()})),
            0);
  const auto j = nlohmann::json::parse(slurp(out / "result.json"));
  EXPECT_EQ(j["seed"], 0);
  EXPECT_EQ(j["config_hash"].get<std::string>().size(), 16u);
  EXPECT_EQ(j["config_hash"], si3::cli::config_hash(j["config"]));
  EXPECT_EQ(j["epochs"].size(), 4u);
  EXPECT_TRUE(j["epochs"][1].contains("metrics"));
  EXPECT_EQ(j["pretrain_losses"].size(), 6u);
  EXPECT_EQ(j["assignments"].size(), 60u);
  for (const char* m : {"acc", "nmi", "ari"}) EXPECT_TRUE(j["metrics"][m].is_number());
  EXPECT_GT(j["selected_positions"].get<int>(), 0);
  const auto model = si3::load_checkpoint(out / "model.ckpt");
  EXPECT_EQ(model.num_views(), 3);
  EXPECT_EQ(model.latent_dim, 2);
}

TEST_F(CliTest, FitIsDeterministicAndHashIgnoresOutputDir) {
  ASSERT_EQ(run(cmd("fit", {"--eta", "0.3", "--out-dir", (dir_ / "a").string()})), 0);
  ASSERT_EQ(run(cmd("fit", {"--eta", "0.3", "--out-dir", (dir_ / "b").string()})), 0);
  EXPECT_EQ(slurp(dir_ / "a/result.json"), slurp(dir_ / "b/result.json"));
  EXPECT_EQ(slurp(dir_ / "a/result.json").find("time"), std::string::npos);
}

TEST_F(CliTest, ConfigFileSectionAppliesAndFlagsWin) {
  const fs::path ini = dir_ / "run.ini";
  {
    std::ofstream f(ini);
    f << "[fit]\ntrain-epochs = 3\neta = 0.2\nout-dir = \"" << (dir_ / "cfg").generic_string() << "\"\n";
  }
  auto args = tiny({"--config", ini.string()});
  // drop the default --train-epochs 4 so the file value is visible
  auto it = std::find(args.begin(), args.end(), "--train-epochs");
  args.erase(it, it + 2);
  args.insert(args.begin(), "fit");
  ASSERT_EQ(run(args), 0);
  auto j = nlohmann::json::parse(slurp(dir_ / "cfg/result.json"));
  EXPECT_EQ(j["epochs"].size(), 3u);
  EXPECT_EQ(j["config"]["missing_rates"][0], 0.2);

  args.push_back("--train-epochs");
  args.push_back("2");
  ASSERT_EQ(run(args), 0);
  j = nlohmann::json::parse(slurp(dir_ / "cfg/result.json"));
  EXPECT_EQ(j["epochs"].size(), 2u);
}

TEST_F(CliTest, SingleCellSweepHasOneRunAndOneAggregateRow) {
  const fs::path out = dir_ / "sw";
  ASSERT_EQ(run(cmd("sweep", {"--eta", "0.3", "--rho", "0.5", "--out-dir", out.string()})), 0);
  const auto l = lines(out / "sweep.csv");
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[1].rfind("run,", 0), 0u);
  EXPECT_EQ(l[2].rfind("aggregate,", 0), 0u);
}

TEST_F(CliTest, SweepResumesWithoutRetraining) {
  si3::cli::ExperimentConfig c;
  c.data.views = {dir_ / "data/t_view0.csv", dir_ / "data/t_view1.csv", dir_ / "data/t_view2.csv"};
  c.data.labels = dir_ / "data/t_labels.csv";
  c.train.pretrain_epochs = 3;
  c.train.train_epochs = 3;
  c.train.hidden = {8};
  c.train.latent_dim = 2;
  c.missing_rates = {0.3};
  c.selection_ratios = {0.0, 1.0};
  c.runs = 2;
  c.output_dir = dir_ / "sw";
  const auto first = si3::cli::cmd_sweep(c);
  EXPECT_EQ(first.computed, 4);
  const std::string before = slurp(first.csv);
  const auto again = si3::cli::cmd_sweep(c);
  EXPECT_EQ(again.computed, 0);
  EXPECT_EQ(slurp(again.csv), before);

  // Growing an axis only trains the new cells.
  c.selection_ratios = {0.0, 0.5, 1.0};
  const auto grown = si3::cli::cmd_sweep(c);
  EXPECT_EQ(grown.computed, 2);
  EXPECT_EQ(grown.rows.size(), 6u);

  // A different configuration in the same directory is refused.
  c.train.train_epochs = 4;
  EXPECT_THROW(si3::cli::cmd_sweep(c), si3::ValidationError);
}

TEST_F(CliTest, LineChartLabelsEqualAggregateCsvValues) {
  const fs::path out = dir_ / "sw";
  ASSERT_EQ(run(cmd("sweep", {"--eta", "0.3", "--rho", "0", "0.5", "1", "--out-dir", out.string()})), 0);
  std::map<std::string, std::string> acc_by_rho;
  std::vector<std::string> csv_order;
  for (const auto& l : lines(out / "sweep.csv")) {
    const auto f = si3::csv::split(l);
    if (f[0] != "aggregate") continue;
    acc_by_rho[f[3]] = f[7];
  }
  ASSERT_EQ(acc_by_rho.size(), 3u);
  const std::string svg = slurp(out / "sweep_acc_line.svg");
  EXPECT_NE(svg.find("viewBox=\"0 0 800 500\""), std::string::npos);
  std::regex value_re("<text class=\"value\"[^>]*>([^<]+)</text>");
  std::vector<std::string> labels;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), value_re); it != std::sregex_iterator(); ++it) {
    labels.push_back((*it)[1]);
  }
  ASSERT_EQ(labels.size(), 3u);
  EXPECT_EQ(labels[0], acc_by_rho["0"]);
  EXPECT_EQ(labels[1], acc_by_rho["0.5"]);
  EXPECT_EQ(labels[2], acc_by_rho["1"]);
  EXPECT_TRUE(fs::exists(out / "sweep_acc_bar.svg"));
  EXPECT_TRUE(fs::exists(out / "sweep_ari_line.svg"));
}

TEST_F(CliTest, EmptyAxisIsAValidationError) {
  si3::cli::ExperimentConfig c;
  c.data.views = {dir_ / "data/t_view0.csv"};
  c.missing_rates = {};
  EXPECT_THROW(si3::cli::cmd_sweep(c), si3::ValidationError);
  c.missing_rates = {0.0};
  c.runs = 0;
  EXPECT_THROW(c.validate(), si3::ValidationError);
}

TEST_F(CliTest, PluginVariantsAndGateLimits) {
  si3::cli::ExperimentConfig c;
  c.data.views = {dir_ / "data/t_view0.csv", dir_ / "data/t_view1.csv", dir_ / "data/t_view2.csv"};
  c.data.labels = dir_ / "data/t_labels.csv";
  c.train.pretrain_epochs = 3;
  c.train.train_epochs = 3;
  c.train.hidden = {8};
  c.train.latent_dim = 2;
  c.missing_rates = {0.4};
  c.selection_ratios = {0.0, 1.0, 0.3};
  c.runs = 2;
  c.output_dir = dir_ / "pl";
  const auto out = si3::cli::cmd_plugin(c);
  ASSERT_EQ(out.rows.size(), 10u);
  for (int run = 0; run < 2; ++run) {
    std::map<std::string, const si3::cli::PluginRow*> by;
    for (const auto& r : out.rows) {
      if (r.run == run) by[r.variant] = &r;
    }
    ASSERT_EQ(by.size(), 5u);
    EXPECT_EQ(by["selected@0"]->assignments, by["no-impute"]->assignments);
    EXPECT_EQ(by["selected@0"]->acc, by["no-impute"]->acc);
    EXPECT_EQ(by["selected@0"]->filled, 0u);
    EXPECT_EQ(by["selected@1"]->assignments, by["impute-all"]->assignments);
    EXPECT_EQ(by["selected@1"]->filled, by["impute-all"]->filled);
    EXPECT_EQ(by["impute-all"]->filled, 72u);  // round(0.4 * 60 * 3)
    EXPECT_LT(by["selected@0.3"]->filled, by["impute-all"]->filled);
  }
  EXPECT_EQ(lines(out.csv).size(), 11u);
}
