#include "si3/cli/app.hpp"

#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "si3/cli/experiment.hpp"
#include "si3/error.hpp"

namespace si3::cli {
namespace {

const std::map<std::string, Likelihood> kLikelihoods = {{"gaussian", Likelihood::Gaussian},
                                                        {"bernoulli", Likelihood::Bernoulli}};

struct Options {
  ExperimentConfig exp;
  std::vector<std::string> likelihoods;
  bool no_imputation = false;
  int checkpoint_every = 0;
  SyntheticSpec synth;
  std::string stem = "toy";
  std::string mask_out;
  Eigen::Index mask_samples = 0;
  int mask_views = 0;
};

void add_data_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--view", o.exp.data.views, "View feature CSV (repeat once per view, in order)")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--mask", o.exp.data.mask,
                  "Observation mask CSV (N x V of 0/1); ignored when --eta > 0 generates one")
      ->check(CLI::ExistingFile);
  cmd->add_option("--labels", o.exp.data.labels, "Ground-truth labels CSV (one integer per row)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--clusters", o.exp.data.clusters, "Cluster count K; 0 infers it from --labels")
      ->capture_default_str();
  cmd->add_flag("--normalize,!--no-normalize", o.exp.data.normalize,
                "Min-max scale each feature over observed rows (default on)");
  cmd->add_option("--view-probs", o.exp.mask.view_probs,
                  "Per-view drop probabilities for generated masks (unbalanced removal)");
  cmd->add_option("--mask-seed", o.exp.mask.mask_seed, "Seed of the generated mask (shared by all runs)")
      ->capture_default_str();
}

void add_train_options(CLI::App* cmd, Options& o) {
  TrainConfig& t = o.exp.train;
  cmd->add_option("--pretrain-epochs", t.pretrain_epochs, "Reconstruction-only warm-up epochs")
      ->capture_default_str();
  cmd->add_option("--train-epochs", t.train_epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch-size", t.batch_size, "Mini-batch size; 0 uses the full dataset")
      ->capture_default_str();
  cmd->add_option("--pretrain-lr", t.pretrain_lr, "Adam learning rate during warm-up")
      ->capture_default_str();
  cmd->add_option("--train-lr", t.train_lr, "Adam learning rate during training")
      ->capture_default_str();
  cmd->add_option("--neighbors", t.neighbors, "Neighbours per distribution-level imputation")
      ->capture_default_str();
  cmd->add_option("--latent-dim", t.latent_dim, "Latent dimension")->capture_default_str();
  cmd->add_option("--hidden", t.hidden, "Hidden layer widths of the encoders (decoders mirror them)")
      ->capture_default_str();
  cmd->add_option("--likelihood", o.likelihoods,
                  "Per-view decoder likelihood, gaussian or bernoulli (default all gaussian)")
      ->check(CLI::IsMember({"gaussian", "bernoulli"}));
  cmd->add_option("--seed", t.seed, "Training seed for run 0; run r adds r")->capture_default_str();
  cmd->add_flag("--no-imputation", o.no_imputation, "Skip scoring and imputation entirely");
  cmd->add_option("--max-restarts", t.max_restarts,
                  "Divergence recoveries (restore snapshot, halve learning rate) before aborting")
      ->capture_default_str();
  cmd->add_option("--eval-every", t.eval_every,
                  "Epochs between logged ACC/NMI/ARI when labels exist; 0 logs only the final metrics")
      ->capture_default_str();
  cmd->add_option("--prior-reseed-epoch", t.prior_reseed_epoch,
                  "Re-seed the mixture prior by k-means on the current aggregates after this many "
                  "training epochs; 0 disables")
      ->capture_default_str();
  cmd->add_flag("--closed-form-prior", t.closed_form_prior,
                "Set the prior to its closed-form moments after each epoch instead of Adam steps");
  cmd->add_option("--threads", t.threads, "Worker threads for scoring and neighbour search")
      ->capture_default_str();
}

void add_axis_options(CLI::App* cmd, Options& o, bool sweep) {
  const std::string first = sweep ? "" : " (only the first value is used)";
  cmd->add_option("--eta", o.exp.missing_rates,
                  "Missing rate(s); > 0 generates a mask with that rate" + first)
      ->capture_default_str();
  cmd->add_option("--rho", o.exp.selection_ratios, "Selection ratio(s) in [0, 1]" + first)
      ->capture_default_str();
  cmd->add_option("--alpha", o.exp.alphas, "Coherence weight(s)" + first)->capture_default_str();
  cmd->add_option("--out-dir", o.exp.output_dir, "Output directory")->capture_default_str();
}

void add_run_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--runs", o.exp.runs, "Runs per cell (seeds seed..seed+runs-1)")
      ->capture_default_str();
  cmd->add_option("--workers", o.exp.workers, "Cells or runs trained concurrently")
      ->capture_default_str();
}

void finish(Options& o) {
  o.exp.train.likelihoods.clear();
  for (const auto& name : o.likelihoods) o.exp.train.likelihoods.push_back(kLikelihoods.at(name));
  o.exp.train.imputation = !o.no_imputation;
}

}  // namespace

int run(int argc, const char* const* argv) {
  Options o;

  CLI::App app{"Selective imputation and product-of-experts clustering for incomplete multi-view data"};
  app.set_config("--config", "", "INI/TOML file with one [section] per subcommand; flags win");
  app.require_subcommand(1);

  auto* score = app.add_subcommand("score", "Pretrain, score every missing position, write info.csv");
  auto* fitc = app.add_subcommand("fit", "Train one model, write result.json and model.ckpt");
  auto* sweep = app.add_subcommand("sweep", "Grid over eta x rho x alpha x runs, write sweep.csv and SVG charts");
  auto* plugin = app.add_subcommand(
      "plugin", "Compare raw-space neighbour-mean imputation: none, all, and Info-selected");
  for (auto* cmd : {score, fitc, sweep, plugin}) {
    cmd->fallthrough();
    add_data_options(cmd, o);
    add_train_options(cmd, o);
    add_axis_options(cmd, o, cmd == sweep);
  }
  fitc->add_option("--checkpoint-every", o.checkpoint_every,
                   "Also write model.ckpt every this many epochs; 0 writes only the final model")
      ->capture_default_str();
  add_run_options(sweep, o);
  add_run_options(plugin, o);
  plugin->add_option("--plugin-neighbors", o.exp.plugin_neighbors,
                     "Neighbours averaged by the raw-space imputer")
      ->capture_default_str();

  auto* gen_data = app.add_subcommand("gen-data", "Write a synthetic Gaussian-mixture multi-view dataset");
  gen_data->fallthrough();
  gen_data->add_option("--samples", o.synth.num_samples, "Sample count")->capture_default_str();
  gen_data->add_option("--clusters", o.synth.num_clusters, "Cluster count")->capture_default_str();
  gen_data->add_option("--source-dim", o.synth.source_dim, "Dimension of the shared source space")
      ->capture_default_str();
  gen_data->add_option("--separation", o.synth.separation, "Scale of the cluster centres")
      ->capture_default_str();
  gen_data->add_option("--spread", o.synth.cluster_spread, "Within-cluster standard deviation")
      ->capture_default_str();
  gen_data->add_option("--view-dims", o.synth.view_dims, "Feature count per view")->capture_default_str();
  gen_data->add_option("--view-noise", o.synth.view_noise, "Noise standard deviation per view")
      ->capture_default_str();
  gen_data->add_option("--seed", o.synth.seed, "Generator seed")->capture_default_str();
  gen_data->add_option("--out-dir", o.exp.output_dir, "Output directory")->capture_default_str();
  gen_data->add_option("--stem", o.stem, "File name prefix")->capture_default_str();

  MissingSpec mask_spec;
  auto* gen_mask = app.add_subcommand("gen-mask", "Write an unbalanced random observation mask");
  gen_mask->fallthrough();
  gen_mask->add_option("--samples", o.mask_samples, "Sample count N")->required();
  gen_mask->add_option("--views", o.mask_views, "View count V")->required();
  gen_mask->add_option("--eta", mask_spec.target_rate, "Target missing rate")->capture_default_str();
  gen_mask->add_option("--view-probs", mask_spec.per_view_missing_prob, "Per-view drop probabilities");
  gen_mask->add_option("--mask-seed", mask_spec.seed, "Mask seed")->capture_default_str();
  gen_mask->add_option("--out", o.mask_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (gen_data->parsed()) {
      cmd_gen_data(o.synth, o.exp.output_dir, o.stem);
      std::cout << "wrote " << o.exp.output_dir.string() << "/" << o.stem << "_*.csv\n";
      return kExitOk;
    }
    if (gen_mask->parsed()) {
      cmd_gen_mask(o.mask_samples, o.mask_views, mask_spec, o.mask_out);
      std::cout << "wrote " << o.mask_out << "\n";
      return kExitOk;
    }
    finish(o);
    if (score->parsed()) {
      const auto out = cmd_score(o.exp);
      std::cout << out.table.entries.size() << " missing positions, " << out.table.selected_count()
                << " selected; wrote " << out.csv.string() << "\n";
    } else if (fitc->parsed()) {
      const auto out = cmd_fit(o.exp, o.checkpoint_every);
      std::cout << "wrote " << out.json.string() << " and " << out.checkpoint.string() << "\n";
      if (!out.result["metrics"].is_null()) std::cout << out.result["metrics"].dump() << "\n";
    } else if (sweep->parsed()) {
      const auto out = cmd_sweep(o.exp);
      std::cout << out.computed << " cells trained, " << out.rows.size() << " rows; wrote "
                << out.csv.string() << "\n";
    } else if (plugin->parsed()) {
      const auto out = cmd_plugin(o.exp);
      std::cout << out.rows.size() << " rows; wrote " << out.csv.string() << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "runtime failure (" << e.term() << "): " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("si3");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace si3::cli
