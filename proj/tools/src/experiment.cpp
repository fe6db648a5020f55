#include "si3/cli/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <tuple>

#include "si3/checkpoint.hpp"
#include "si3/cli/svg.hpp"
#include "si3/csv.hpp"
#include "si3/error.hpp"
#include "si3/ibsi.hpp"
#include "si3/parallel.hpp"
#include "si3/plugin.hpp"

namespace si3::cli {
namespace {

using json = nlohmann::json;

// Shortest text that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const fs::path& file) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError(file.string() + ": bad number '" + s + "'");
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << text;
    if (!out) throw ValidationError("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

std::string likelihood_name(Likelihood l) {
  return l == Likelihood::Bernoulli ? "bernoulli" : "gaussian";
}

TrainConfig cell_config(const ExperimentConfig& config, double rho, double alpha, int run) {
  TrainConfig tc = config.train;
  tc.selection_ratio = rho;
  tc.alpha = alpha;
  tc.seed = config.train.seed + static_cast<std::uint64_t>(run);
  return tc;
}

json metrics_json(const ClusterMetrics& m) {
  return {{"acc", m.acc}, {"nmi", m.nmi}, {"ari", m.ari}};
}

using CellKey = std::tuple<double, double, double, int>;

CellKey key_of(const SweepRow& r) { return {r.eta, r.rho, r.alpha, r.run}; }

const std::string kSweepHeader =
    "kind,config_hash,eta,rho,alpha,run,seed,acc,nmi,ari,acc_std,nmi_std,ari_std";

std::vector<SweepRow> read_sweep_rows(const fs::path& path, const std::string& hash) {
  std::vector<SweepRow> rows;
  if (!fs::exists(path)) return rows;
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != kSweepHeader) {
    throw ValidationError(path.string() + " is not a sweep results file");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 13) throw ValidationError(path.string() + ": malformed row '" + line + "'");
    if (f[1] != hash) {
      throw ValidationError(path.string() + " holds results of another configuration (hash " +
                            f[1] + "); use a different output directory");
    }
    if (f[0] != "run") continue;
    SweepRow r;
    r.eta = parse_double(f[2], path);
    r.rho = parse_double(f[3], path);
    r.alpha = parse_double(f[4], path);
    r.run = std::stoi(f[5]);
    r.seed = std::stoull(f[6]);
    r.acc = parse_double(f[7], path);
    r.nmi = parse_double(f[8], path);
    r.ari = parse_double(f[9], path);
    rows.push_back(r);
  }
  return rows;
}

struct Aggregate {
  double eta, rho, alpha;
  int count;
  double mean[3];
  double sd[3];
};

std::vector<Aggregate> aggregate(const std::vector<SweepRow>& rows, int runs) {
  std::map<std::tuple<double, double, double>, std::vector<const SweepRow*>> groups;
  for (const auto& r : rows) groups[{r.eta, r.rho, r.alpha}].push_back(&r);
  std::vector<Aggregate> out;
  for (const auto& [k, members] : groups) {
    if (static_cast<int>(members.size()) < runs) continue;
    Aggregate a{std::get<0>(k), std::get<1>(k), std::get<2>(k), static_cast<int>(members.size()),
                {}, {}};
    for (int m = 0; m < 3; ++m) {
      auto val = [m](const SweepRow* r) { return m == 0 ? r->acc : m == 1 ? r->nmi : r->ari; };
      double sum = 0.0;
      for (auto* r : members) sum += val(r);
      const double mean = sum / static_cast<double>(members.size());
      double ss = 0.0;
      for (auto* r : members) ss += (val(r) - mean) * (val(r) - mean);
      a.mean[m] = mean;
      a.sd[m] = members.size() > 1 ? std::sqrt(ss / static_cast<double>(members.size() - 1)) : 0.0;
    }
    out.push_back(a);
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::vector<Aggregate>& aggs,
                      const std::string& hash) {
  std::ostringstream os;
  os << kSweepHeader << "\n";
  for (const auto& r : rows) {
    os << "run," << hash << ',' << shortest(r.eta) << ',' << shortest(r.rho) << ','
       << shortest(r.alpha) << ',' << r.run << ',' << r.seed << ','
       << csv::format_double(r.acc, 6) << ',' << csv::format_double(r.nmi, 6) << ','
       << csv::format_double(r.ari, 6) << ",,,\n";
  }
  for (const auto& a : aggs) {
    os << "aggregate," << hash << ',' << shortest(a.eta) << ',' << shortest(a.rho) << ','
       << shortest(a.alpha) << ',' << a.count << ",";
    for (double m : a.mean) os << ',' << csv::format_double(m, 3);
    for (double s : a.sd) os << ',' << csv::format_double(s, 3);
    os << "\n";
  }
  return os.str();
}

std::vector<fs::path> write_charts(const std::vector<Aggregate>& aggs,
                                   const ExperimentConfig& config) {
  static const char* kMetric[3] = {"acc", "nmi", "ari"};
  static const char* kMetricLabel[3] = {"ACC", "NMI", "ARI"};
  const bool many_alpha = config.alphas.size() > 1;
  auto find = [&](double eta, double rho, double alpha) -> const Aggregate* {
    for (const auto& a : aggs) {
      if (a.eta == eta && a.rho == rho && a.alpha == alpha) return &a;
    }
    return nullptr;
  };
  // The plotted value is the CSV text parsed back, so labels match exactly.
  auto value = [&](const Aggregate* a, int m) {
    return a ? std::stod(csv::format_double(a->mean[m], 3)) : std::nan("");
  };
  auto alpha_suffix = [&](double alpha) {
    return many_alpha ? " alpha=" + shortest(alpha) : std::string();
  };
  std::vector<fs::path> paths;
  for (int m = 0; m < 3; ++m) {
    Chart line;
    line.title = std::string(kMetricLabel[m]) + " vs selection ratio";
    line.x_label = "selection ratio";
    line.y_label = kMetricLabel[m];
    for (double rho : config.selection_ratios) line.categories.push_back(shortest(rho));
    for (double alpha : config.alphas) {
      for (double eta : config.missing_rates) {
        Series s{"eta=" + shortest(eta) + alpha_suffix(alpha), {}};
        for (double rho : config.selection_ratios) s.values.push_back(value(find(eta, rho, alpha), m));
        line.series.push_back(std::move(s));
      }
    }
    Chart bar;
    bar.title = std::string(kMetricLabel[m]) + " vs missing rate";
    bar.x_label = "missing rate";
    bar.y_label = kMetricLabel[m];
    for (double eta : config.missing_rates) bar.categories.push_back(shortest(eta));
    for (double alpha : config.alphas) {
      for (double rho : config.selection_ratios) {
        Series s{"rho=" + shortest(rho) + alpha_suffix(alpha), {}};
        for (double eta : config.missing_rates) s.values.push_back(value(find(eta, rho, alpha), m));
        bar.series.push_back(std::move(s));
      }
    }
    const fs::path lp = config.output_dir / (std::string("sweep_") + kMetric[m] + "_line.svg");
    const fs::path bp = config.output_dir / (std::string("sweep_") + kMetric[m] + "_bar.svg");
    write_text(lp, line_chart_svg(line));
    write_text(bp, bar_chart_svg(bar));
    paths.push_back(lp);
    paths.push_back(bp);
  }
  return paths;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data.views.empty()) throw ValidationError("at least one view file is required");
  if (missing_rates.empty()) throw ValidationError("missing-rate axis is empty");
  if (selection_ratios.empty()) throw ValidationError("selection-ratio axis is empty");
  if (alphas.empty()) throw ValidationError("alpha axis is empty");
  if (runs < 1) throw ValidationError("runs must be >= 1");
  if (plugin_neighbors < 1) throw ValidationError("plugin neighbours must be >= 1");
  for (double eta : missing_rates) {
    if (!(eta >= 0.0 && eta < 1.0)) throw ValidationError("missing rates must lie in [0, 1)");
  }
  for (double rho : selection_ratios) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw ValidationError("selection ratios must lie in [0, 1]");
  }
  for (double a : alphas) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("alpha must be >= 0");
  }
  for (double p : mask.view_probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("view missing probabilities must lie in [0, 1]");
  }
  train.validate();
}

json to_json(const TrainConfig& c) {
  json likelihoods = json::array();
  for (auto l : c.likelihoods) likelihoods.push_back(likelihood_name(l));
  return {{"pretrain_epochs", c.pretrain_epochs},
          {"train_epochs", c.train_epochs},
          {"batch_size", c.batch_size},
          {"pretrain_lr", c.pretrain_lr},
          {"train_lr", c.train_lr},
          {"alpha", c.alpha},
          {"selection_ratio", c.selection_ratio},
          {"neighbors", c.neighbors},
          {"latent_dim", c.latent_dim},
          {"hidden", c.hidden},
          {"likelihoods", likelihoods},
          {"seed", c.seed},
          {"imputation", c.imputation},
          {"max_restarts", c.max_restarts},
          {"eval_every", c.eval_every},
          {"prior_reseed_epoch", c.prior_reseed_epoch},
          {"closed_form_prior", c.closed_form_prior}};
}

json to_json(const ExperimentConfig& c) {
  json views = json::array();
  for (const auto& p : c.data.views) views.push_back(p.generic_string());
  return {{"data",
           {{"views", views},
            {"mask", c.data.mask ? json(c.data.mask->generic_string()) : json(nullptr)},
            {"labels", c.data.labels ? json(c.data.labels->generic_string()) : json(nullptr)},
            {"clusters", c.data.clusters},
            {"normalize", c.data.normalize}}},
          {"mask",
           {{"view_probs", c.mask.view_probs},
            {"mask_seed", c.mask.mask_seed}}},
          {"train", to_json(c.train)},
          {"missing_rates", c.missing_rates},
          {"selection_ratios", c.selection_ratios},
          {"alphas", c.alphas},
          {"runs", c.runs},
          {"plugin_neighbors", c.plugin_neighbors}};
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const json& resolved) { return fnv1a_hex(resolved.dump()); }

MultiViewDataset prepare_dataset(const ExperimentConfig& config, double missing_rate) {
  const bool generate = missing_rate > 0.0;
  MultiViewDataset data = load_dataset(config.data.views,
                                       generate ? std::nullopt : config.data.mask,
                                       config.data.labels, config.data.clusters);
  if (data.num_clusters <= 0) {
    if (!data.labels) throw ValidationError("cluster count required when no labels are given");
    data.num_clusters = *std::max_element(data.labels->begin(), data.labels->end()) + 1;
  }
  if (generate) {
    MissingSpec spec{config.mask.view_probs, missing_rate, config.mask.mask_seed};
    data.mask = generate_mask(data.num_samples(), data.num_views(), spec);
  }
  data.validate();
  return config.data.normalize ? normalize(data) : data;
}

ScoreOutput cmd_score(const ExperimentConfig& config) {
  config.validate();
  const MultiViewDataset data = prepare_dataset(config, config.missing_rates.front());
  const TrainConfig tc = cell_config(config, config.selection_ratios.front(), config.alphas.front(), 0);
  ScoreOutput out;
  out.table.selection_ratio = tc.selection_ratio;
  if (data.missing_count() > 0) {
    DmgmmModel model = initial_model(data, tc);
    const auto latents = pretrain(model, data, tc);
    out.table = score_positions(data, latents, tc);
  }
  std::ostringstream os;
  os << "sample,view,score,selected\n";
  char buf[64];
  for (const auto& e : out.table.entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.score);
    os << e.sample << ',' << e.view << ',' << buf << ',' << (e.selected ? 1 : 0) << "\n";
  }
  out.csv = config.output_dir / "info.csv";
  write_text(out.csv, os.str());
  return out;
}

FitOutput cmd_fit(const ExperimentConfig& config, int checkpoint_every) {
  config.validate();
  const MultiViewDataset data = prepare_dataset(config, config.missing_rates.front());
  const TrainConfig tc = cell_config(config, config.selection_ratios.front(), config.alphas.front(), 0);
  FitOutput out;
  out.json = config.output_dir / "result.json";
  out.checkpoint = config.output_dir / "model.ckpt";
  fs::create_directories(config.output_dir);

  EpochCallback cb;
  if (checkpoint_every > 0) {
    cb = [&](const EpochLog& e, const DmgmmModel& model) {
      if (e.epoch % checkpoint_every == 0) save_checkpoint(out.checkpoint, model);
    };
  }
  const FitResult r = fit(data, tc, cb);
  save_checkpoint(out.checkpoint, r.model);

  json cfg = to_json(config);
  json epochs = json::array();
  for (const auto& e : r.log) {
    json row = {{"epoch", e.epoch},
                {"reconstruction", e.terms.reconstruction},
                {"latent_kl", e.terms.latent_kl},
                {"cluster_kl", e.terms.cluster_kl},
                {"coherence", e.terms.coherence},
                {"elbo", e.terms.elbo},
                {"total", e.terms.total},
                {"learning_rate", e.learning_rate}};
    if (e.metrics) row["metrics"] = metrics_json(*e.metrics);
    epochs.push_back(std::move(row));
  }
  out.result = {{"config", cfg},
                {"config_hash", config_hash(cfg)},
                {"seed", tc.seed},
                {"missing_rate", data.missing_rate()},
                {"missing_positions", r.table.entries.size()},
                {"selected_positions", r.table.selected_count()},
                {"pretrain_losses", r.pretrain_losses},
                {"epochs", epochs},
                {"restarts", r.restarts},
                {"assignments", r.assignments},
                {"metrics", r.metrics ? metrics_json(*r.metrics) : json(nullptr)}};
  write_text(out.json, out.result.dump(2) + "\n");
  return out;
}

SweepOutput cmd_sweep(const ExperimentConfig& config) {
  config.validate();
  json cfg = to_json(config);
  for (const char* axis : {"missing_rates", "selection_ratios", "alphas", "runs"}) cfg.erase(axis);
  const std::string hash = config_hash(cfg);

  SweepOutput out;
  out.csv = config.output_dir / "sweep.csv";
  std::map<CellKey, SweepRow> done;
  for (const auto& r : read_sweep_rows(out.csv, hash)) done[key_of(r)] = r;

  std::vector<CellKey> todo;
  for (double eta : config.missing_rates) {
    for (double rho : config.selection_ratios) {
      for (double alpha : config.alphas) {
        for (int run = 0; run < config.runs; ++run) {
          CellKey k{eta, rho, alpha, run};
          if (!done.count(k)) todo.push_back(k);
        }
      }
    }
  }

  std::mutex file_mutex;
  auto flush = [&] {
    std::vector<SweepRow> rows;
    for (const auto& [k, r] : done) rows.push_back(r);
    write_text(out.csv, sweep_csv(rows, aggregate(rows, config.runs), hash));
    return rows;
  };
  parallel_for(todo.size(), config.workers, [&](std::size_t t) {
    const auto [eta, rho, alpha, run] = todo[t];
    const MultiViewDataset data = prepare_dataset(config, eta);
    TrainConfig tc = cell_config(config, rho, alpha, run);
    const FitResult r = fit(data, tc);
    if (!r.metrics) throw ValidationError("sweeps need ground-truth labels");
    SweepRow row{eta, rho, alpha, run, tc.seed, r.metrics->acc, r.metrics->nmi, r.metrics->ari};
    std::lock_guard lock(file_mutex);
    done[todo[t]] = row;
    flush();
  });
  out.computed = static_cast<int>(todo.size());

  // Only cells on the current axes count towards the reported rows and charts.
  std::vector<SweepRow> rows;
  for (const auto& [k, r] : done) {
    const auto [eta, rho, alpha, run] = k;
    auto on = [](const std::vector<double>& axis, double v) {
      return std::find(axis.begin(), axis.end(), v) != axis.end();
    };
    if (on(config.missing_rates, eta) && on(config.selection_ratios, rho) &&
        on(config.alphas, alpha) && run < config.runs) {
      rows.push_back(r);
    }
  }
  flush();
  out.rows = rows;
  out.charts = write_charts(aggregate(rows, config.runs), config);
  return out;
}

PluginOutput cmd_plugin(const ExperimentConfig& config) {
  config.validate();
  const json cfg = to_json(config);
  const std::string hash = config_hash(cfg);
  const double eta = config.missing_rates.front();
  std::vector<std::vector<PluginRow>> per_run(static_cast<std::size_t>(config.runs));

  parallel_for(per_run.size(), config.workers, [&](std::size_t ru) {
    const int run = static_cast<int>(ru);
    const MultiViewDataset data = prepare_dataset(config, eta);
    TrainConfig tc = cell_config(config, 0.0, config.alphas.front(), run);
    tc.imputation = false;

    ibsi::InfoTable scores;
    if (data.missing_count() > 0) {
      DmgmmModel model = initial_model(data, tc);
      const auto latents = pretrain(model, data, tc);
      scores = ibsi::info_score(data, ibsi::view_correlation(latents, data), tc.threads);
    }
    auto run_variant = [&](const std::string& name, double rho, bool gated) {
      PluginRow row;
      row.variant = name;
      row.rho = rho;
      row.run = run;
      row.seed = tc.seed;
      FitResult r;
      if (gated) {
        const auto imp = plugin_impute(data, ibsi::select_positions(scores, rho), config.plugin_neighbors);
        row.filled = static_cast<std::size_t>(imp.imputed.sum());
        r = fit(imp.data, tc);
      } else {
        r = fit(data, tc);
      }
      if (!r.metrics) throw ValidationError("plugin comparison needs ground-truth labels");
      row.acc = r.metrics->acc;
      row.nmi = r.metrics->nmi;
      row.ari = r.metrics->ari;
      row.assignments = r.assignments;
      per_run[ru].push_back(std::move(row));
    };
    run_variant("no-impute", 0.0, false);
    run_variant("impute-all", 1.0, true);
    for (double rho : config.selection_ratios) run_variant("selected@" + shortest(rho), rho, true);
  });

  PluginOutput out;
  std::ostringstream os;
  os << "config_hash,variant,rho,run,seed,filled,acc,nmi,ari\n";
  for (auto& runs : per_run) {
    for (auto& row : runs) {
      os << hash << ',' << row.variant << ',' << shortest(row.rho) << ',' << row.run << ','
         << row.seed << ',' << row.filled << ',' << csv::format_double(row.acc, 6) << ','
         << csv::format_double(row.nmi, 6) << ',' << csv::format_double(row.ari, 6) << "\n";
      out.rows.push_back(std::move(row));
    }
  }
  out.csv = config.output_dir / "plugin.csv";
  write_text(out.csv, os.str());
  return out;
}

void cmd_gen_data(const SyntheticSpec& spec, const fs::path& dir, const std::string& stem) {
  save_dataset(generate_synthetic(spec), dir, stem);
}

void cmd_gen_mask(Eigen::Index samples, int views, const MissingSpec& spec, const fs::path& path) {
  if (samples <= 0 || views <= 0) throw ValidationError("mask needs positive sample and view counts");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  csv::write_matrix(path, generate_mask(samples, views, spec).cast<double>());
}

}  // namespace si3::cli
