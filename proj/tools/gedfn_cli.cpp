// gedfn command-line driver: simulate, generate, train, evaluate, importance.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "gedfn/checkpoint.hpp"
#include "gedfn/errors.hpp"
#include "gedfn/importance.hpp"
#include "gedfn/io.hpp"
#include "gedfn/manifest.hpp"
#include "gedfn/metrics.hpp"
#include "gedfn/rng.hpp"
#include "gedfn/trainer.hpp"

namespace {

using namespace gedfn;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kDivergence = 3 };

// Seed stream tags used by `train`.
constexpr std::uint64_t kSplitTag = 31;
constexpr std::uint64_t kTrainTag = 32;
constexpr std::uint64_t kValidTag = 33;

std::string text_of(const std::string& v) { return v; }
std::string text_of(bool v) { return v ? "true" : "false"; }
std::string text_of(double v) { return format_double(v); }
template <typename T>
  requires std::is_integral_v<T>
std::string text_of(T v) {
  return std::to_string(v);
}

/// Binds options to variables and remembers how to print their final value,
/// so every run can record its effective configuration.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <typename T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    fields_.emplace_back(name, [&var] { return text_of(var); });
    return app_->add_option("--" + name, var, help)->capture_default_str();
  }
  CLI::Option* flag(const std::string& name, bool& var, const std::string& help) {
    fields_.emplace_back(name, [&var] { return text_of(var); });
    return app_->add_flag("--" + name, var, help);
  }

  std::map<std::string, std::string> snapshot() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, get] : fields_) out[name] = get();
    return out;
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> fields_;
};

std::vector<int> parse_widths(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const int w = std::stoi(item, &used);
      if (used != item.size() || w <= 0) throw std::invalid_argument(item);
      out.push_back(w);
    } catch (const std::exception&) {
      throw ParameterError("bad layer width '" + item + "' in '" + text + "'");
    }
  }
  return out;
}

BalanceMode parse_balance(const std::string& s) {
  if (s == "median") return BalanceMode::median;
  if (s == "fixed") return BalanceMode::fixed;
  throw ParameterError("balance must be median or fixed, got '" + s + "'");
}

std::vector<ModelKind> parse_models(const std::string& text) {
  std::vector<ModelKind> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "gedfn") {
      out.push_back(ModelKind::gedfn);
    } else if (item == "dfn") {
      out.push_back(ModelKind::dfn);
    } else {
      throw ParameterError("unknown model '" + item + "' (expected gedfn or dfn)");
    }
  }
  if (out.empty()) throw ParameterError("no models selected");
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void finish(RunManifest& manifest, const OptionSet& options, const fs::path& out,
            std::chrono::steady_clock::time_point start) {
  manifest.config = options.snapshot();
  manifest.config.erase("config");
  write_file_atomic(out / "config.ini", manifest.config_text());
  manifest.outputs.push_back("config.ini");
  manifest.outputs.push_back("manifest.json");
  manifest.wall_seconds = seconds_since(start);
  manifest.write(out);
}

// ---------------------------------------------------------------------------
// simulate / generate

struct SimulationOptions {
  int p = 5000;
  int n = 400;
  int p0 = 40;
  int cores = 0;
  double singleton_frac = 0.0;
  int ba_m = 1;
  double cov_base = 0.7;
  double flip_probability = 0.5;
  std::string balance = "median";
  double threshold = 0.5;
  int max_core_draws = 32;

  void bind(OptionSet& o) {
    o.add("p", p, "number of features");
    o.add("n", n, "number of samples");
    o.add("p0", p0, "number of true predictors");
    o.add("cores", cores, "number of cores; 0 = one per 20 predictors");
    o.add("singleton-frac", singleton_frac, "fraction of predictors placed as singletons");
    o.add("ba-m", ba_m, "edges added per vertex by preferential attachment");
    o.add("cov-base", cov_base, "covariance decay base (Sigma_ij = base^d_ij)");
    o.add("flip-probability", flip_probability, "probability a coefficient is negative");
    o.add("balance", balance, "label threshold: median or fixed");
    o.add("threshold", threshold, "probability cutoff when --balance fixed");
    o.add("max-core-draws", max_core_draws, "core redraws before giving up");
  }
  int core_count() const { return cores > 0 ? cores : std::max(1, p0 / 20); }
  SimulationConfig config() const {
    SimulationConfig c;
    c.p = p;
    c.n = n;
    c.p0 = p0;
    c.n_cores = core_count();
    c.singleton_fraction = singleton_frac;
    c.ba_m = ba_m;
    c.covariance_base = cov_base;
    c.flip_probability = flip_probability;
    c.balance = parse_balance(balance);
    c.threshold = threshold;
    c.max_core_draws = max_core_draws;
    return c;
  }
};

struct TrainingOptions {
  double lr = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  double l2 = 0.0;
  double dropout = 0.0;
  double train_fraction = 0.8;
  bool stratify = true;
  std::string hidden = "64,16";

  void bind(OptionSet& o) {
    o.add("lr", lr, "Adam learning rate");
    o.add("batch-size", batch_size, "mini-batch size");
    o.add("epochs", epochs, "training epochs");
    o.add("l2", l2, "L2 penalty on weights");
    o.add("dropout", dropout, "dropout rate on hidden layers");
    o.add("train-fraction", train_fraction, "fraction of samples used for training");
    o.add("stratify", stratify, "stratify the split by label");
    o.add("hidden", hidden, "widths after the first hidden layer");
  }
  TrainConfig config(std::uint64_t seed) const {
    TrainConfig c;
    c.lr = lr;
    c.batch_size = batch_size;
    c.epochs = epochs;
    c.l2_penalty = l2;
    c.dropout_rate = dropout;
    c.train_fraction = train_fraction;
    c.stratified = stratify;
    c.seed = seed;
    return c;
  }
};

struct SimulateCommand {
  SimulationOptions sim;
  TrainingOptions train;
  int replicates = 10;
  std::uint64_t seed = 2024;
  bool grid = false;
  std::string models = "gedfn,dfn";
  int dfn_width = 0;
  bool freeze_graph = false;
  int workers = 0;
  bool quiet = false;
  std::string out;

  void bind(OptionSet& o) {
    sim.bind(o);
    train.bind(o);
    o.add("replicates", replicates, "replicates per cell");
    o.add("seed", seed, "base seed");
    o.flag("grid", grid, "run the full p0 x singleton grid (ignores --p0/--cores/--singleton-frac)");
    o.add("models", models, "comma-separated models: gedfn,dfn");
    o.add("dfn-width", dfn_width, "first hidden width of the dense model; 0 = 512 if p0 <= 40 else 1024");
    o.flag("freeze-graph", freeze_graph, "reuse one graph for every replicate");
    o.add("workers", workers, "worker threads; 0 = all cores");
    o.flag("quiet", quiet, "no per-run progress on stderr");
    o.add("out", out, "output directory")->required();
  }

  int run(const OptionSet& options) const {
    const auto start = std::chrono::steady_clock::now();
    ExperimentGrid g = grid ? ExperimentGrid::full() : ExperimentGrid{};
    g.simulation = sim.config();
    if (!grid) g.cells = {{sim.p0, sim.core_count(), sim.singleton_frac}};
    g.replicates = replicates;
    g.models = parse_models(models);
    g.train = train.config(seed);
    g.shared_hidden = parse_widths(train.hidden);
    g.dfn_width = dfn_width;
    g.freeze_graph = freeze_graph;
    g.workers = workers;

    auto progress = [this](const RunResult& r) {
      if (quiet) return;
      std::cerr << "p0=" << r.cell.p0 << " singletons=" << r.cell.singleton_fraction
                << " rep=" << r.replicate << " " << to_string(r.model);
      if (r.completed) {
        std::cerr << " auc=" << r.auc << " (" << r.wall_seconds << " s)\n";
      } else {
        std::cerr << " failed: " << r.error << "\n";
      }
    };
    const GridReport report = run_grid(g, seed, progress);

    const fs::path dir(out);
    std::ostringstream runs;
    runs << "p0,cores,singleton_fraction,replicate,seed,model,completed,auc,accuracy,"
            "final_train_loss,epochs,config_fingerprint,error\n";
    for (const auto& r : report.runs) {
      runs << r.cell.p0 << ',' << r.cell.n_cores << ',' << format_double(r.cell.singleton_fraction)
           << ',' << r.replicate << ',' << r.seed << ',' << to_string(r.model) << ','
           << (r.completed ? 1 : 0) << ',' << format_double(r.auc) << ','
           << format_double(r.accuracy) << ',' << format_double(r.final_train_loss) << ','
           << r.epochs << ',' << hex64(r.config_fingerprint) << ",\"" << r.error << "\"\n";
    }
    write_file_atomic(dir / "replicates.csv", runs.str());

    std::ostringstream summary;
    summary << "p0,cores,singleton_fraction,model,mean_auc,sd_auc,completed,replicate_aucs\n";
    for (const auto& s : report.summaries) {
      summary << s.cell.p0 << ',' << s.cell.n_cores << ',' << format_double(s.cell.singleton_fraction)
              << ',' << to_string(s.model) << ',' << format_double(s.mean_auc) << ','
              << format_double(s.sd_auc) << ',' << s.completed << ',';
      for (std::size_t k = 0; k < s.aucs.size(); ++k) {
        summary << (k ? ";" : "") << format_double(s.aucs[k]);
      }
      summary << '\n';
    }
    write_file_atomic(dir / "summary.csv", summary.str());

    RunManifest manifest;
    manifest.subcommand = "simulate";
    manifest.outputs = {"replicates.csv", "summary.csv"};
    const bool paired = std::count(g.models.begin(), g.models.end(), ModelKind::gedfn) &&
                        std::count(g.models.begin(), g.models.end(), ModelKind::dfn);
    if (paired) {
      std::ostringstream pairs;
      pairs << "p0,cores,singleton_fraction,replicate,seed,gedfn_auc,dfn_auc,difference\n";
      for (std::size_t k = 0; k + 1 < report.runs.size(); ++k) {
        const auto& a = report.runs[k];
        const auto& b = report.runs[k + 1];
        if (a.model != ModelKind::gedfn || b.model != ModelKind::dfn || a.replicate != b.replicate) continue;
        if (!a.completed || !b.completed) continue;
        pairs << a.cell.p0 << ',' << a.cell.n_cores << ',' << format_double(a.cell.singleton_fraction)
              << ',' << a.replicate << ',' << a.seed << ',' << format_double(a.auc) << ','
              << format_double(b.auc) << ',' << format_double(a.auc - b.auc) << '\n';
      }
      write_file_atomic(dir / "paired.csv", pairs.str());
      manifest.outputs.push_back("paired.csv");
    }

    manifest.seeds["base"] = seed;
    for (const auto& r : report.runs) {
      std::ostringstream key;
      key << "p0=" << r.cell.p0 << "/cores=" << r.cell.n_cores
          << "/singletons=" << format_double(r.cell.singleton_fraction) << "/replicate=" << r.replicate;
      manifest.seeds[key.str()] = r.seed;
    }
    manifest.warnings = report.warnings;
    auto timing = nlohmann::json::array();
    for (const auto& r : report.runs) {
      timing.push_back({{"p0", r.cell.p0}, {"singleton_fraction", r.cell.singleton_fraction},
                        {"replicate", r.replicate}, {"model", to_string(r.model)},
                        {"wall_seconds", r.wall_seconds}});
    }
    manifest.extra["run_times"] = std::move(timing);
    finish(manifest, options, dir, start);

    for (const auto& s : report.summaries) {
      std::cout << "p0=" << s.cell.p0 << " singletons=" << s.cell.singleton_fraction << ' '
                << to_string(s.model) << " mean_auc=" << s.mean_auc << " sd=" << s.sd_auc
                << " completed=" << s.completed << '\n';
    }
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    const bool any = std::any_of(report.runs.begin(), report.runs.end(),
                                 [](const RunResult& r) { return r.completed; });
    if (!any && !report.runs.empty()) {
      throw GenerationError("every run failed; first error: " + report.runs.front().error);
    }
    return kOk;
  }
};

struct GenerateCommand {
  SimulationOptions sim;
  std::uint64_t seed = 2024;
  std::string out;

  void bind(OptionSet& o) {
    sim.bind(o);
    o.add("seed", seed, "dataset seed");
    o.add("out", out, "output directory")->required();
  }

  int run(const OptionSet& options) const {
    const auto start = std::chrono::steady_clock::now();
    const auto ds = generate_dataset(sim.config(), seed);
    const fs::path dir(out);
    export_dataset(dir, ds);
    RunManifest manifest;
    manifest.subcommand = "generate";
    manifest.seeds["dataset"] = seed;
    manifest.outputs = {"expression.csv", "labels.csv", "edges.txt", "predictors.csv"};
    manifest.extra["jitter"] = ds.jitter;
    manifest.extra["core_draws"] = ds.core_draws;
    manifest.extra["edges"] = ds.graph.edge_count();
    finish(manifest, options, dir, start);
    std::cout << "wrote " << ds.n() << " samples x " << ds.p() << " features to " << dir.string() << '\n';
    return kOk;
  }
};

// ---------------------------------------------------------------------------
// train / evaluate / importance

struct InputOptions {
  bool transposed = false;
  std::string positive_label;

  void bind(OptionSet& o) {
    o.flag("transposed", transposed, "expression file has features as rows");
    o.add("positive-label", positive_label, "label value mapped to class 1 (default: labels are 0/1)");
  }
  IngestOptions ingest() const {
    IngestOptions opts;
    opts.transposed = transposed;
    if (!positive_label.empty()) opts.positive_label = positive_label;
    return opts;
  }
};

std::string metrics_header() { return "subset,n,n_pos,n_neg,auc,accuracy,loss\n"; }

std::string metrics_row(const std::string& subset, const Eigen::VectorXd& prob, const std::vector<int>& y) {
  const auto r = evaluate({prob.data(), static_cast<std::size_t>(prob.size())}, y);
  std::ostringstream s;
  s << subset << ',' << y.size() << ',' << r.n_pos << ',' << r.n_neg << ',' << format_double(r.auc)
    << ',' << format_double(r.accuracy) << ',' << format_double(cross_entropy(prob, y)) << '\n';
  return s.str();
}

std::vector<int> rows_for(const IngestedDataset& d, const std::vector<std::string>& ids,
                          const std::string& source) {
  std::map<std::string, int> index;
  for (std::size_t r = 0; r < d.sample_ids.size(); ++r) index.emplace(d.sample_ids[r], static_cast<int>(r));
  std::vector<int> rows;
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw IngestionError("sample '" + id + "' of the " + source + " is missing");
    rows.push_back(it->second);
  }
  return rows;
}

std::vector<std::string> pick(const std::vector<std::string>& names, const std::vector<int>& rows) {
  std::vector<std::string> out;
  for (int r : rows) out.push_back(names[static_cast<std::size_t>(r)]);
  return out;
}

struct TrainCommand {
  std::string expr, labels, graph, out, checkpoint_out;
  InputOptions input;
  TrainingOptions train;
  bool dense = false;
  int dfn_width = 512;
  int early_stop = 0;
  std::uint64_t seed = 2024;

  void bind(OptionSet& o) {
    o.add("expr", expr, "expression matrix (samples x features)")->required()->check(CLI::ExistingFile);
    o.add("labels", labels, "sample labels")->required()->check(CLI::ExistingFile);
    o.add("graph", graph, "feature graph edge list")->required()->check(CLI::ExistingFile);
    input.bind(o);
    train.bind(o);
    o.flag("dense", dense, "train the unmasked dense network");
    o.add("dfn-width", dfn_width, "first hidden width with --dense");
    o.add("early-stop", early_stop, "patience in epochs on a validation carve-out; 0 = off");
    o.add("seed", seed, "seed for split, initialization and shuffling");
    o.add("out", out, "output directory")->required();
    o.add("checkpoint-out", checkpoint_out, "checkpoint path (default: <out>/model.ckpt)");
  }

  int run(const OptionSet& options) const {
    const auto start = std::chrono::steady_clock::now();
    RunManifest manifest;
    manifest.subcommand = "train";
    for (const auto& f : {expr, labels, graph}) manifest.input_hashes[f] = file_hash(f);

    auto ing = ingest(expr, labels, graph, input.ingest());
    const auto before = ing.data.feature_names.size();
    const auto dropped = standardize(ing);
    std::cerr << "features: " << ing.data.expression_features << " in expression, "
              << ing.data.graph_vertices << " in graph, " << before << " shared, "
              << ing.data.feature_names.size() << " after dropping constant columns; samples: "
              << ing.data.sample_ids.size() << " labeled, " << ing.data.unlabeled_samples
              << " unlabeled\n";
    for (const auto& f : dropped) manifest.warnings.push_back("constant feature dropped: " + f);
    if (ing.data.unlabeled_samples > 0) {
      manifest.warnings.push_back(std::to_string(ing.data.unlabeled_samples) + " unlabeled samples ignored");
    }

    const Dataset all{ing.data.X, ing.data.y};
    const std::uint64_t split_seed = derive_seed(seed, {kSplitTag});
    const std::uint64_t train_seed = derive_seed(seed, {kTrainTag});
    const auto parts = split(all.y, train.train_fraction, split_seed, train.stratify);
    Dataset fit = subset(all, parts.train);
    const Dataset test = subset(all, parts.test);

    const auto rest = parse_widths(train.hidden);
    NetworkSpec spec;
    if (dense) {
      std::vector<int> hidden{dfn_width};
      hidden.insert(hidden.end(), rest.begin(), rest.end());
      spec = NetworkSpec::dense(all.p(), hidden);
    } else {
      spec = NetworkSpec::graph_embedded(adjacency(ing.graph), rest);
    }
    spec.dropout_rate = train.dropout;
    const Network net(spec);

    TrainConfig cfg = train.config(train_seed);
    cfg.early_stop_patience = early_stop;
    std::optional<Dataset> valid;
    std::vector<int> fit_rows = parts.train;
    if (early_stop > 0) {
      const auto inner = split(fit.y, train.train_fraction, derive_seed(seed, {kValidTag}), train.stratify);
      valid = subset(fit, inner.test);
      std::vector<int> rows;
      for (int r : inner.train) rows.push_back(parts.train[static_cast<std::size_t>(r)]);
      fit_rows = rows;
      fit = subset(all, fit_rows);
    }
    const auto result = train_model(net, fit, cfg, valid ? &*valid : nullptr);

    const fs::path dir(out);
    std::ostringstream log;
    log << "epoch,train_loss" << (valid ? ",heldout_loss" : "") << '\n';
    for (std::size_t e = 0; e < result.log.epoch_loss.size(); ++e) {
      log << e + 1 << ',' << format_double(result.log.epoch_loss[e]);
      if (valid) log << ',' << format_double(result.log.heldout_loss[e]);
      log << '\n';
    }
    write_file_atomic(dir / "training_log.csv", log.str());

    const auto test_prob = net.predict(result.params, test.X);
    std::string metrics = metrics_header() + metrics_row("train", net.predict(result.params, fit.X), fit.y) +
                          metrics_row("test", test_prob, test.y);
    write_file_atomic(dir / "metrics.csv", metrics);
    const auto test_eval = evaluate({test_prob.data(), static_cast<std::size_t>(test_prob.size())}, test.y);

    Checkpoint ck;
    ck.spec = spec;
    ck.params = result.params;
    ck.optimizer = result.optimizer;
    ck.seed = train_seed;
    ck.metadata["model"] = dense ? "DFN" : "GEDFN";
    ck.metadata["feature_names"] = ing.data.feature_names;
    ck.metadata["train_sample_ids"] = pick(ing.data.sample_ids, fit_rows);
    ck.metadata["test_sample_ids"] = pick(ing.data.sample_ids, parts.test);
    ck.metadata["dropped_features"] = dropped;
    ck.metadata["positive_label"] = input.positive_label;
    ck.metadata["transposed"] = input.transposed;
    ck.metadata["test_auc"] = test_eval.auc;
    ck.metadata["steps"] = result.log.steps;
    ck.metadata["train_config"] = cfg.describe();
    const fs::path ckpath = checkpoint_out.empty() ? dir / "model.ckpt" : fs::path(checkpoint_out);
    save_checkpoint(ckpath, ck);

    manifest.seeds = {{"seed", seed}, {"split", split_seed}, {"train", train_seed}};
    manifest.outputs = {"training_log.csv", "metrics.csv", ckpath.string()};
    manifest.extra["features"] = ing.data.feature_names.size();
    manifest.extra["samples"] = ing.data.sample_ids.size();
    manifest.extra["graph_edges"] = ing.graph.edge_count();
    manifest.extra["epochs_run"] = result.log.epochs_run;
    finish(manifest, options, dir, start);
    std::cout << (dense ? "DFN" : "GEDFN") << " test auc=" << test_eval.auc
              << " accuracy=" << test_eval.accuracy << '\n';
    return kOk;
  }
};

/// Checkpoint features read from an expression file and standardized over
/// its samples.
struct ScoringInput {
  Checkpoint ck;
  IngestedDataset data;
};

ScoringInput load_for_scoring(const std::string& checkpoint, const std::string& expr,
                              const std::optional<fs::path>& labels, const InputOptions& input) {
  ScoringInput s{load_checkpoint(checkpoint), {}};
  const auto features = s.ck.metadata.at("feature_names").get<std::vector<std::string>>();
  s.data = ingest_for_features(expr, labels, features, input.ingest());
  auto z = zscore(s.data.X);
  if (!z.dropped.empty()) {
    throw IngestionError("feature '" + features[static_cast<std::size_t>(z.dropped.front())] +
                         "' is constant in " + expr);
  }
  s.data.X = std::move(z.X);
  return s;
}

std::vector<int> subset_rows(const ScoringInput& s, const std::string& which) {
  if (which == "all") {
    std::vector<int> rows(s.data.sample_ids.size());
    for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = static_cast<int>(r);
    return rows;
  }
  const auto ids = s.ck.metadata.at("test_sample_ids").get<std::vector<std::string>>();
  return rows_for(s.data, ids, "checkpoint's test split");
}

struct EvaluateCommand {
  std::string checkpoint, expr, labels, subset_name = "test", out;
  InputOptions input;

  void bind(OptionSet& o) {
    o.add("checkpoint", checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
    o.add("expr", expr, "expression matrix")->required()->check(CLI::ExistingFile);
    o.add("labels", labels, "sample labels")->required()->check(CLI::ExistingFile);
    input.bind(o);
    o.add("subset", subset_name, "samples to score: test (the checkpoint's split) or all")
        ->check(CLI::IsMember({"test", "all"}));
    o.add("out", out, "output directory (optional)");
  }

  int run(const OptionSet& options) const {
    const auto start = std::chrono::steady_clock::now();
    const auto s = load_for_scoring(checkpoint, expr, fs::path(labels), input);
    const auto rows = subset_rows(s, subset_name);
    const Dataset all{s.data.X, s.data.y};
    const Dataset part = subset(all, rows);
    const auto prob = Network(s.ck.spec).predict(s.ck.params, part.X);
    const std::string metrics = metrics_header() + metrics_row(subset_name, prob, part.y);
    std::cout << metrics;
    if (!out.empty()) {
      const fs::path dir(out);
      write_file_atomic(dir / "metrics.csv", metrics);
      RunManifest manifest;
      manifest.subcommand = "evaluate";
      for (const auto& f : {checkpoint, expr, labels}) manifest.input_hashes[f] = file_hash(f);
      manifest.outputs = {"metrics.csv"};
      finish(manifest, options, dir, start);
    }
    return kOk;
  }
};

struct ImportanceCommand {
  std::string checkpoint, expr, labels, subset_name = "test", out;
  InputOptions input;
  double delta = 0.05;
  double top_frac = 0.05;
  double epsilon_floor = 1e-6;
  int workers = 1;

  void bind(OptionSet& o) {
    o.add("checkpoint", checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
    o.add("expr", expr, "expression matrix")->required()->check(CLI::ExistingFile);
    o.add("labels", labels, "sample labels; restricts standardization to labeled samples as in training")
        ->check(CLI::ExistingFile);
    input.bind(o);
    o.add("subset", subset_name, "samples to perturb: test or all")->check(CLI::IsMember({"test", "all"}));
    o.add("delta", delta, "relative perturbation of each feature");
    o.add("top-frac", top_frac, "fraction of features written to top.csv");
    o.add("epsilon-floor", epsilon_floor, "lower bound on the perturbation size in the denominator");
    o.add("workers", workers, "worker threads");
    o.add("out", out, "output directory")->required();
  }

  int run(const OptionSet& options) const {
    const auto start = std::chrono::steady_clock::now();
    std::optional<fs::path> label_path;
    if (!labels.empty()) label_path = labels;
    const auto s = load_for_scoring(checkpoint, expr, label_path, input);
    const auto rows = subset_rows(s, subset_name);
    const Eigen::MatrixXd X = s.data.X(rows, Eigen::all);

    ImportanceOptions opts;
    opts.delta = delta;
    opts.epsilon_floor = epsilon_floor;
    opts.workers = workers;
    const auto report = importance_scores(Network(s.ck.spec), s.ck.params, X, opts);
    const auto ranks = report.ranks();
    const auto& names = s.data.feature_names;

    std::ostringstream all;
    all << "feature_id,s_j,abs_score,rank\n";
    for (int j : report.ranking) {
      const auto k = static_cast<std::size_t>(j);
      all << names[k] << ',' << format_double(report.scores[k]) << ','
          << format_double(report.abs_scores[k]) << ',' << ranks[k] << '\n';
    }
    std::ostringstream top;
    top << "feature_id,s_j,abs_score,rank\n";
    for (int j : top_fraction(report, top_frac)) {
      const auto k = static_cast<std::size_t>(j);
      top << names[k] << ',' << format_double(report.scores[k]) << ','
          << format_double(report.abs_scores[k]) << ',' << ranks[k] << '\n';
    }
    const fs::path dir(out);
    write_file_atomic(dir / "importance.csv", all.str());
    write_file_atomic(dir / "top.csv", top.str());

    RunManifest manifest;
    manifest.subcommand = "importance";
    manifest.input_hashes[checkpoint] = file_hash(checkpoint);
    manifest.input_hashes[expr] = file_hash(expr);
    if (label_path) manifest.input_hashes[labels] = file_hash(labels);
    manifest.outputs = {"importance.csv", "top.csv"};
    manifest.extra["n_eval"] = report.n_eval;
    finish(manifest, options, dir, start);
    std::cout << "scored " << report.feature_count() << " features on " << report.n_eval << " samples\n";
    return kOk;
  }
};

// ---------------------------------------------------------------------------

/// Expands `--config FILE` into `--key=value` tokens placed right after the
/// subcommand, so explicit flags (which come later) take precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::vector<std::string> injected;
  for (std::size_t k = 0; k < args.size(); ++k) {
    std::string path;
    if (args[k] == "--config" && k + 1 < args.size()) {
      path = args[k + 1];
    } else if (args[k].rfind("--config=", 0) == 0) {
      path = args[k].substr(9);
    } else {
      continue;
    }
    if (!fs::is_regular_file(path)) throw CLI::ValidationError("--config", "file not found: " + path);
    for (const auto& [key, value] : read_key_values(path)) {
      if (key == "config" || value.empty()) continue;
      const std::string name = key.rfind("--", 0) == 0 ? key.substr(2) : key;
      injected.push_back("--" + name + "=" + value);
    }
  }
  if (!injected.empty() && !args.empty()) args.insert(args.begin() + 1, injected.begin(), injected.end());
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back
  return args;
}

int report_error(const std::string& kind, const std::string& message, int code) {
  std::string line = message;
  std::replace(line.begin(), line.end(), '\n', ' ');
  std::cerr << "gedfn: error[" << kind << "]: " << line << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-embedded deep feedforward networks", "gedfn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(GEDFN_VERSION));
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SimulateCommand simulate;
  GenerateCommand generate;
  TrainCommand train;
  EvaluateCommand evaluate_cmd;
  ImportanceCommand importance;

  std::vector<std::pair<CLI::App*, OptionSet>> subs;
  auto add_sub = [&](const char* name, const char* help, auto& cmd) -> CLI::App* {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", "flat key = value file with option defaults")->check(CLI::ExistingFile);
    OptionSet options(sub);
    cmd.bind(options);
    subs.emplace_back(sub, std::move(options));
    return sub;
  };
  add_sub("simulate", "run synthetic replicate experiments", simulate);
  add_sub("generate", "write one synthetic dataset to disk", generate);
  add_sub("train", "fit a model on expression data", train);
  add_sub("evaluate", "AUC and accuracy of a checkpoint", evaluate_cmd);
  add_sub("importance", "perturbation importance scores from a checkpoint", importance);

  try {
    auto args = expand_config(argc, argv);
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kUsage);
  } catch (const std::exception& e) {
    return report_error("config", e.what(), kUsage);
  }

  try {
    for (auto& [sub, options] : subs) {
      if (!sub->parsed()) continue;
      const std::string name = sub->get_name();
      if (name == "simulate") return simulate.run(options);
      if (name == "generate") return generate.run(options);
      if (name == "train") return train.run(options);
      if (name == "evaluate") return evaluate_cmd.run(options);
      if (name == "importance") return importance.run(options);
    }
  } catch (const DivergenceError& e) {
    return report_error(e.kind(), e.what(), kDivergence);
  } catch (const ParameterError& e) {
    return report_error(e.kind(), e.what(), kUsage);
  } catch (const Error& e) {
    return report_error(e.kind(), e.what(), kData);
  } catch (const nlohmann::json::exception& e) {
    return report_error("ingestion", e.what(), kData);
  } catch (const fs::filesystem_error& e) {
    return report_error("io", e.what(), kData);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), kData);
  }
  return kUsage;
}
