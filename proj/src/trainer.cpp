#include "gedfn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <thread>

#include "gedfn/errors.hpp"
#include "gedfn/hash.hpp"
#include "gedfn/metrics.hpp"
#include "gedfn/rng.hpp"

namespace gedfn {

namespace {

enum SeedStream : std::uint64_t { kInit = 11, kShuffle = 12, kDropout = 13 };
enum ReplicateStream : std::uint64_t { kData = 21, kSplit = 22, kTrain = 23, kFrozenGraph = 24 };

}  // namespace

Dataset subset(const Dataset& data, std::span<const int> rows) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), data.X.cols());
  out.y.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.X.row(static_cast<Eigen::Index>(k)) = data.X.row(rows[k]);
    out.y[k] = data.y[rows[k]];
  }
  return out;
}

std::string TrainConfig::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "batch_size=" << batch_size << "\n"
     << "dropout_rate=" << dropout_rate << "\n"
     << "early_stop_patience=" << early_stop_patience << "\n"
     << "epochs=" << epochs << "\n"
     << "l2_penalty=" << l2_penalty << "\n"
     << "lr=" << lr << "\n"
     << "seed=" << seed << "\n"
     << "stratified=" << (stratified ? 1 : 0) << "\n"
     << "train_fraction=" << train_fraction << "\n";
  return os.str();
}

SplitIndices split(std::span<const int> y, double train_fraction, std::uint64_t seed,
                   bool stratified) {
  const int n = static_cast<int>(y.size());
  if (n < 5) throw SplitError("split: need at least 5 samples, got " + std::to_string(n));
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("split: train fraction must lie in (0,1)");
  }
  const double test_fraction = 1.0 - train_fraction;
  const int n_test = static_cast<int>(std::lround(n * test_fraction));
  Rng rng(seed);

  std::vector<std::vector<int>> groups;
  if (stratified) {
    std::map<int, std::vector<int>> by_label;
    for (int i = 0; i < n; ++i) by_label[y[i]].push_back(i);
    for (auto& [label, rows] : by_label) groups.push_back(std::move(rows));
  } else {
    groups.emplace_back(static_cast<std::size_t>(n));
    std::iota(groups[0].begin(), groups[0].end(), 0);
  }

  // Largest-remainder allocation of the test quota across groups.
  std::vector<int> take(groups.size());
  std::vector<std::pair<double, std::size_t>> remainder;
  int assigned = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double quota = static_cast<double>(groups[g].size()) * n_test / n;
    take[g] = static_cast<int>(std::floor(quota));
    assigned += take[g];
    remainder.emplace_back(quota - take[g], g);
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n_test; ++k, ++assigned) ++take[remainder[k].second];

  SplitIndices out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto& rows = groups[g];
    std::shuffle(rows.begin(), rows.end(), rng);
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + take[g]);
    out.train.insert(out.train.end(), rows.begin() + take[g], rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  if (out.train.empty() || out.test.empty()) throw SplitError("split: one side is empty");

  std::vector<int> labels(y.begin(), y.end());
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.size() < 2) throw SplitError("split: outcome has a single class");
  for (int label : labels) {
    bool present = std::any_of(out.train.begin(), out.train.end(),
                               [&](int i) { return y[i] == label; });
    if (!present) {
      throw SplitError("split: class " + std::to_string(label) + " absent from training side");
    }
  }
  return out;
}

TrainResult train_model(const Network& network, const Dataset& train, const TrainConfig& config,
                        const Dataset* heldout) {
  return train_model(network, train, config, heldout, {});
}

TrainResult train_model(const Network& network, const Dataset& train, const TrainConfig& config,
                        const Dataset* heldout, const StepObserver& observer) {
  const int n = train.n();
  if (n == 0) throw ContractError("train_model: empty training set");
  if (train.p() != network.spec().input_dim || static_cast<int>(train.y.size()) != n) {
    throw ContractError("train_model: data dimensions do not match the network");
  }
  if (config.batch_size < 1 || config.batch_size > n) {
    throw ParameterError("train_model: batch size must lie in [1, n_train]");
  }
  if (config.epochs < 0) throw ParameterError("train_model: epochs must be non-negative");

  TrainResult result;
  result.params = network.init_params(derive_seed(config.seed, {kInit}));
  result.optimizer = AdamState::zeros_like(result.params);
  const AdamHyper hyper{config.lr};
  const bool early_stop = config.early_stop_patience > 0 && heldout != nullptr;

  Rng shuffle_rng(derive_seed(config.seed, {kShuffle}));
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);

  ModelParams best;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::size_t step = 0;
  Eigen::MatrixXd xb;
  std::vector<int> yb;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (int start = 0; start < n; start += config.batch_size) {
      const int count = std::min(config.batch_size, n - start);
      std::span<const int> rows(order.data() + start, static_cast<std::size_t>(count));
      xb = train.X(rows, Eigen::all);
      yb.assign(count, 0);
      for (int k = 0; k < count; ++k) yb[k] = train.y[rows[k]];

      ++step;
      auto trace = network.forward(result.params, xb, Mode::train,
                                   derive_seed(config.seed, {kDropout, step}));
      const double batch_loss = loss(trace, yb);
      if (!std::isfinite(batch_loss)) {
        throw DivergenceError(step, "training diverged: non-finite loss at step " +
                                        std::to_string(step));
      }
      epoch_loss += batch_loss * count;
      auto grads = network.backward(result.params, trace, yb);
      add_l2_gradient(grads, result.params, config.l2_penalty);
      adam_step(result.params, grads, result.optimizer, hyper, step);
      if (observer) observer(step, result.params);
    }
    result.log.epoch_loss.push_back(epoch_loss / n);
    result.log.epochs_run = epoch + 1;

    if (early_stop) {
      const double held = cross_entropy(network.predict(result.params, heldout->X), heldout->y);
      result.log.heldout_loss.push_back(held);
      if (held < best_loss) {
        best_loss = held;
        best = result.params;
        result.log.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= config.early_stop_patience) {
        break;
      }
    }
  }
  result.log.steps = step;
  if (early_stop && result.log.best_epoch >= 0) result.params = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------

std::string to_string(ModelKind kind) { return kind == ModelKind::gedfn ? "GEDFN" : "DFN"; }

ExperimentGrid ExperimentGrid::full() {
  ExperimentGrid g;
  g.simulation.p = 5000;
  g.simulation.n = 400;
  for (double singleton : {0.0, 0.5, 1.0}) {
    for (int k = 1; k <= 5; ++k) g.cells.push_back({40 * k, 2 * k, singleton});
  }
  g.replicates = 10;
  return g;
}

int ExperimentGrid::dfn_width_for(const GridCell& cell) const {
  if (dfn_width > 0) return dfn_width;
  return cell.p0 <= 40 ? 512 : 1024;
}

const CellSummary* GridReport::find(const GridCell& cell, ModelKind model) const {
  for (const auto& s : summaries) {
    if (s.model == model && s.cell.p0 == cell.p0 && s.cell.n_cores == cell.n_cores &&
        s.cell.singleton_fraction == cell.singleton_fraction) {
      return &s;
    }
  }
  return nullptr;
}

std::uint64_t replicate_seed(std::uint64_t base_seed, const GridCell& cell, int replicate) {
  return derive_seed(base_seed,
                     {static_cast<std::uint64_t>(cell.p0), static_cast<std::uint64_t>(cell.n_cores),
                      static_cast<std::uint64_t>(std::llround(cell.singleton_fraction * 1e6)),
                      static_cast<std::uint64_t>(replicate)});
}

namespace {

std::uint64_t run_fingerprint(const ExperimentGrid& grid, const GridCell& cell, ModelKind kind) {
  Fnv1a h;
  h.text(grid.train.describe());
  h.text(to_string(kind));
  const auto& s = grid.simulation;
  std::ostringstream os;
  os.precision(17);
  os << s.p << ' ' << s.n << ' ' << s.ba_m << ' ' << s.covariance_base << ' '
     << static_cast<int>(s.balance) << ' ' << s.threshold << ' ' << cell.p0 << ' ' << cell.n_cores
     << ' ' << cell.singleton_fraction << ' ' << grid.freeze_graph;
  if (kind == ModelKind::dfn) os << ' ' << grid.dfn_width_for(cell);
  for (int w : grid.shared_hidden) os << ' ' << w;
  h.text(os.str());
  return h.value();
}

}  // namespace

GridReport run_grid(const ExperimentGrid& grid, std::uint64_t base_seed,
                    const std::function<void(const RunResult&)>& progress) {
  if (grid.replicates < 1) throw ParameterError("run_grid: replicates must be >= 1");
  const std::size_t n_models = grid.models.size();
  const std::size_t n_jobs = grid.cells.size() * static_cast<std::size_t>(grid.replicates);

  std::optional<FeatureGraph> frozen;
  if (grid.freeze_graph) {
    frozen = generate_ba_graph(grid.simulation.p, grid.simulation.ba_m,
                               derive_seed(base_seed, {kFrozenGraph}));
  }

  GridReport report;
  report.runs.resize(n_jobs * n_models);
  std::mutex progress_mutex;

  auto run_job = [&](std::size_t job) {
    const std::size_t c = job / static_cast<std::size_t>(grid.replicates);
    const int r = static_cast<int>(job % static_cast<std::size_t>(grid.replicates));
    const GridCell& cell = grid.cells[c];
    const std::uint64_t rseed = replicate_seed(base_seed, cell, r);

    auto fill_error = [&](const std::string& what) {
      for (std::size_t m = 0; m < n_models; ++m) {
        auto& run = report.runs[job * n_models + m];
        run.error = what;
      }
    };
    for (std::size_t m = 0; m < n_models; ++m) {
      auto& run = report.runs[job * n_models + m];
      run.cell = cell;
      run.model = grid.models[m];
      run.replicate = r;
      run.seed = rseed;
      run.config_fingerprint = run_fingerprint(grid, cell, grid.models[m]);
    }

    Dataset train, test;
    std::optional<AdjacencyMatrix> mask;
    try {
      SimulationConfig sim = grid.simulation;
      sim.p0 = cell.p0;
      sim.n_cores = cell.n_cores;
      sim.singleton_fraction = cell.singleton_fraction;
      auto ds = generate_dataset(sim, derive_seed(rseed, {kData}), frozen ? &*frozen : nullptr);
      auto parts = split(ds.y, grid.train.train_fraction, derive_seed(rseed, {kSplit}),
                         grid.train.stratified);
      Dataset all{std::move(ds.X), std::move(ds.y)};
      train = subset(all, parts.train);
      test = subset(all, parts.test);
      mask = adjacency(ds.graph);
    } catch (const Error& e) {
      fill_error(e.what());
      return;
    }

    for (std::size_t m = 0; m < n_models; ++m) {
      auto& run = report.runs[job * n_models + m];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        NetworkSpec spec = run.model == ModelKind::gedfn
                               ? NetworkSpec::graph_embedded(*mask, grid.shared_hidden)
                               : [&] {
                                   std::vector<int> hidden{grid.dfn_width_for(cell)};
                                   hidden.insert(hidden.end(), grid.shared_hidden.begin(),
                                                 grid.shared_hidden.end());
                                   return NetworkSpec::dense(grid.simulation.p, hidden);
                                 }();
        spec.dropout_rate = grid.train.dropout_rate;
        Network net(std::move(spec));
        TrainConfig cfg = grid.train;
        cfg.seed = derive_seed(rseed, {kTrain});
        auto fit = train_model(net, train, cfg);
        auto prob = net.predict(fit.params, test.X);
        auto eval = evaluate({prob.data(), static_cast<std::size_t>(prob.size())}, test.y);
        run.auc = eval.auc;
        run.accuracy = eval.accuracy;
        run.final_train_loss = fit.log.epoch_loss.empty() ? 0.0 : fit.log.epoch_loss.back();
        run.epochs = fit.log.epochs_run;
        run.completed = true;
      } catch (const Error& e) {
        run.error = e.what();
      }
      run.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(run);
      }
    }
  };

  unsigned workers = grid.workers > 0 ? static_cast<unsigned>(grid.workers)
                                      : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n_jobs));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t job; (job = next.fetch_add(1)) < n_jobs;) run_job(job);
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  for (std::size_t c = 0; c < grid.cells.size(); ++c) {
    for (std::size_t m = 0; m < n_models; ++m) {
      CellSummary s;
      s.cell = grid.cells[c];
      s.model = grid.models[m];
      double sum = 0.0;
      for (int r = 0; r < grid.replicates; ++r) {
        const auto& run =
            report.runs[(c * static_cast<std::size_t>(grid.replicates) + static_cast<std::size_t>(r)) *
                            n_models + m];
        if (run.completed) {
          s.aucs.push_back(run.auc);
          sum += run.auc;
          ++s.completed;
        } else {
          s.aucs.push_back(std::numeric_limits<double>::quiet_NaN());
          report.warnings.push_back("p0=" + std::to_string(s.cell.p0) + " singleton=" +
                                    std::to_string(s.cell.singleton_fraction) + " " +
                                    to_string(s.model) + " replicate " + std::to_string(r) +
                                    " failed: " + run.error);
        }
      }
      if (s.completed > 0) {
        s.mean_auc = sum / s.completed;
        double ss = 0.0;
        for (double a : s.aucs) {
          if (!std::isnan(a)) ss += (a - s.mean_auc) * (a - s.mean_auc);
        }
        s.sd_auc = s.completed > 1 ? std::sqrt(ss / (s.completed - 1)) : 0.0;
      } else {
        s.mean_auc = std::numeric_limits<double>::quiet_NaN();
        s.sd_auc = std::numeric_limits<double>::quiet_NaN();
      }
      report.summaries.push_back(std::move(s));
    }
  }
  return report;
}

}  // namespace gedfn
