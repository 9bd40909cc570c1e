#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geoparam/data.hpp"
#include "geoparam/model.hpp"
#include "geoparam/optim.hpp"

namespace geoparam {

/// Everything needed to reproduce one experiment.
///
/// `dataset` is one of levy, banana, uci-<name> or csv. The csv form reads
/// `dataset_path` with `dataset_target` as the regression target.
struct ExperimentConfig {
  std::string dataset = "levy";
  std::filesystem::path dataset_path;
  std::string dataset_target;
  Eigen::Index n_train = 512;
  Eigen::Index n_test = 512;
  LevyOptions levy;
  BananaOptions banana;
  int splits = 1;

  std::vector<Eigen::Index> hidden{100};
  Parameterization param = Parameterization::sp;
  InitOptions init;

  OptimizerConfig optim;
  /// When non-empty the learning rate is chosen from these values.
  std::vector<double> lr_grid;

  long epochs = 2000;
  Eigen::Index batch_size = 0;  // 0 = full batch
  std::optional<std::uint64_t> seed;
  long snapshot_stride = 1;
  /// Snapshots written to trace.csv every this many steps; 0 disables.
  long trace_stride = 1;
  int parallel_folds = 1;
  std::filesystem::path out_dir = "runs/out";

  bool is_uci() const { return dataset.rfind("uci-", 0) == 0; }
  bool is_regression() const { return dataset != "banana"; }

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
/// Keys are dotted: dataset.*, model.*, optim.*, run.*.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one `key = value` assignment.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// The resolved configuration in the same grammar, in a stable key order.
std::string render_config(const ExperimentConfig& cfg);

/// levy, banana or uci-<name>.
ExperimentConfig preset(const std::string& name, Parameterization param);

}  // namespace geoparam
