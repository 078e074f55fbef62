#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gedfn/network.hpp"
#include "gedfn/synthgen.hpp"

namespace gedfn {

/// Labeled design matrix.
struct Dataset {
  Eigen::MatrixXd X;
  std::vector<int> y;

  int n() const noexcept { return static_cast<int>(X.rows()); }
  int p() const noexcept { return static_cast<int>(X.cols()); }
};

Dataset subset(const Dataset& data, std::span<const int> rows);

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 32;
  int epochs = 100;
  double train_fraction = 0.8;  // 4:1 train:test
  bool stratified = true;
  std::uint64_t seed = 0;
  double l2_penalty = 0.0;
  double dropout_rate = 0.0;
  /// Stop once the held-out loss has not improved for this many epochs;
  /// 0 disables early stopping.
  int early_stop_patience = 0;

  /// Canonical "key=value" lines (sorted keys); hashed for fingerprints.
  std::string describe() const;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

/// Random train/test partition. The test side gets round(n * (1 - fraction))
/// rows; when stratified, per-class test counts follow largest-remainder
/// allocation of the class sizes. Throws SplitError if a side is empty or a
/// class is missing from the training side.
SplitIndices split(std::span<const int> y, double train_fraction, std::uint64_t seed,
                   bool stratified = true);

struct TrainingLog {
  std::vector<double> epoch_loss;    // sample-weighted mean of batch losses
  std::vector<double> heldout_loss;  // only with early stopping
  std::size_t steps = 0;
  int epochs_run = 0;
  int best_epoch = -1;
};

struct TrainResult {
  ModelParams params;
  AdamState optimizer;
  TrainingLog log;
};

/// Mini-batch Adam: epochs x ceil(n / batch_size) steps over batches
/// reshuffled every epoch. Throws DivergenceError on a non-finite loss.
TrainResult train_model(const Network& network, const Dataset& train, const TrainConfig& config,
                        const Dataset* heldout = nullptr);

/// Variant that calls `observer` after every optimizer step.
using StepObserver = std::function<void(std::size_t step, const ModelParams&)>;
TrainResult train_model(const Network& network, const Dataset& train, const TrainConfig& config,
                        const Dataset* heldout, const StepObserver& observer);

// ---------------------------------------------------------------------------

enum class ModelKind { gedfn, dfn };
std::string to_string(ModelKind kind);

struct GridCell {
  int p0 = 40;
  int n_cores = 2;
  double singleton_fraction = 0.0;
};

struct ExperimentGrid {
  SimulationConfig simulation;  // p, n, BA m, covariance base, balancing
  std::vector<GridCell> cells;
  int replicates = 10;
  std::vector<ModelKind> models{ModelKind::gedfn, ModelKind::dfn};
  TrainConfig train;
  std::vector<int> shared_hidden{64, 16};  // layers after the first
  /// First-hidden width of the dense baseline; 0 applies the rule
  /// 512 for p0 <= 40 and 1024 otherwise.
  int dfn_width = 0;
  /// Reuse one graph (derived from the base seed) for every replicate.
  bool freeze_graph = false;
  int workers = 0;  // 0 = hardware concurrency

  /// Full simulation grid: p=5000, n=400, p0 in {40..200} with 20 predictors
  /// per core, singleton fractions {0, 0.5, 1}, 10 replicates.
  static ExperimentGrid full();
  int dfn_width_for(const GridCell& cell) const;
};

struct RunResult {
  GridCell cell;
  ModelKind model = ModelKind::gedfn;
  int replicate = 0;
  std::uint64_t seed = 0;  // replicate seed
  bool completed = false;
  double auc = 0.0;
  double accuracy = 0.0;
  double final_train_loss = 0.0;
  int epochs = 0;
  double wall_seconds = 0.0;
  std::uint64_t config_fingerprint = 0;
  std::string error;
};

struct CellSummary {
  GridCell cell;
  ModelKind model = ModelKind::gedfn;
  double mean_auc = 0.0;
  double sd_auc = 0.0;
  int completed = 0;
  std::vector<double> aucs;  // by replicate; NaN where the run failed
};

struct GridReport {
  std::vector<RunResult> runs;  // ordered by (cell, replicate, model)
  std::vector<CellSummary> summaries;
  std::vector<std::string> warnings;

  const CellSummary* find(const GridCell& cell, ModelKind model) const;
};

std::uint64_t replicate_seed(std::uint64_t base_seed, const GridCell& cell, int replicate);

/// Runs every (cell, replicate) job on a worker pool. Within a job all models
/// share the generated dataset and the train/test split.
GridReport run_grid(const ExperimentGrid& grid, std::uint64_t base_seed,
                    const std::function<void(const RunResult&)>& progress = {});

}  // namespace gedfn
