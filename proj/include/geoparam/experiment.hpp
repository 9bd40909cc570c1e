#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "geoparam/analysis.hpp"
#include "geoparam/config.hpp"
#include "geoparam/data.hpp"
#include "geoparam/model.hpp"
#include "geoparam/optim.hpp"

namespace geoparam {

/// Deterministic sub-seed for an independent RNG stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

struct TrainOptions {
  long epochs = 1;
  Eigen::Index batch_size = 0;  // 0 = full batch
  OptimizerConfig optim;
  std::uint64_t seed = 0;
  /// Hidden layer followed by the stability tracker; negative disables it.
  int track_layer = 0;
  long snapshot_stride = 1;
  long trace_stride = 0;
  /// Compute the test metric every epoch (otherwise only after the last).
  bool eval_every_epoch = true;
};

struct EpochRecord {
  long epoch = 0;
  double train_loss = 0.0;
  double test_metric = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> metrics;
  StabilityTrace stability;
  std::vector<UnitSnapshot> snapshots;
  long steps = 0;
  bool diverged = false;
  std::string divergence;
  /// RMSE for regression, accuracy for classification; NaN if diverged.
  double final_test_metric = 0.0;
};

/// Builds `spec` from `seed` and trains it. Divergence stops training and is
/// reported in the result instead of thrown.
TrainResult train(const MlpSpec& spec, const InitOptions& init, const Dataset& train_set, const Dataset& test_set,
                  const TrainOptions& options);

/// Applies `fn` to 0..count-1 on up to `threads` workers. Results are stored
/// by index, so the output is independent of scheduling.
template <typename T>
std::vector<T> parallel_map(int count, int threads, const std::function<T(int)>& fn);

/// min(requested, GEOPARAM_THREADS) when that variable is a positive integer.
int worker_threads(int requested);

struct SplitResult {
  int split = 0;
  double test_rmse = 0.0;
  bool diverged = false;
};

struct TabularSummary {
  std::string dataset;
  Parameterization param = Parameterization::sp;
  double lr = 0.0;
  std::vector<GridEntry> grid;
  std::vector<SplitResult> splits;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  double stderr_rmse = 0.0;
  int diverged_splits = 0;
};

/// Learning-rate selection on a validation split carved from the training
/// part of split 0, followed by `cfg.splits` seeded 80/20 splits.
/// `out_dir` may be empty to skip file output.
TabularSummary run_tabular(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

enum class RunStatus { ok, diverged };

struct RunOutcome {
  RunStatus status = RunStatus::ok;
  double lr = 0.0;
  double final_metric = 0.0;
  std::filesystem::path out_dir;
};

/// Runs a whole experiment and writes its run directory:
/// metrics.csv, stability.csv, trace.csv, checkpoint.bin (+ shapes sidecar),
/// config.txt and manifest.txt. Tabular datasets get one split_XX directory
/// per split plus summary.csv and grid.csv.
/// Throws ConfigError, IoError or NoViableLearningRate.
RunOutcome run(const ExperimentConfig& cfg);

/// Regression/classification data for levy, banana or csv configs.
std::pair<Dataset, Dataset> make_datasets(const ExperimentConfig& cfg);

MlpSpec model_spec(const ExperimentConfig& cfg, Eigen::Index input_dim, Eigen::Index output_dim);

void export_metrics(const std::vector<EpochRecord>& metrics, const std::filesystem::path& path);
void export_summary(const std::vector<TabularSummary>& rows, const std::filesystem::path& path);

}  // namespace geoparam

#include "geoparam/detail/parallel.hpp"
