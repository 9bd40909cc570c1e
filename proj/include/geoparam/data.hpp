#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "geoparam/autodiff.hpp"

namespace geoparam {

/// Features X (rows x n) and targets Y (rows x outputs). Classification
/// targets are integer labels stored in a single column.
struct Dataset {
  std::string name;
  Tensor X;
  Tensor Y;
  std::vector<std::string> feature_names;
  Eigen::RowVectorXd feature_means;  // empty until standardized
  Eigen::RowVectorXd feature_stds;

  Eigen::Index rows() const { return X.rows(); }
  Eigen::Index features() const { return X.cols(); }
};

/// d = 1 Levy function with w = 1 + (x - 1) / 4.
double levy(double x);

struct LevyOptions {
  double x_min = -10.0;
  double x_max = 10.0;
  double noise_std = 0.5;
};

/// x uniform on [x_min, x_max], y = levy(x) + N(0, noise_std^2).
Dataset gen_levy(Eigen::Index n_points, const LevyOptions& options, std::mt19937_64& rng);

struct BananaOptions {
  double noise_std = 0.15;
  double radius = 1.0;
  /// Vertical offset of the lower arc. Negative values interleave the arcs.
  double gap = -0.6;
};

/// Two interleaved half rings. Class 0 lies on the upper arc
/// r (cos t, sin t); class 1 on the lower arc (r + r cos t, -r sin t - gap).
/// t is uniform on [0, pi] and both coordinates get N(0, noise_std^2).
Dataset gen_banana(Eigen::Index n_points, const BananaOptions& options, std::mt19937_64& rng);

/// Reads a CSV with a header row. The named target column becomes Y and the
/// remaining columns become X, in file order.
Dataset read_regression_csv(const std::filesystem::path& path, const std::string& target_column);

/// Reads a banana.csv with columns x1, x2, label.
Dataset load_banana_csv(const std::filesystem::path& path);

/// Seeded shuffle followed by a split; the first part holds
/// round(train_fraction * rows) rows, at least one in each part.
std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed);

/// Standardizes both parts with the training mean and (population) standard
/// deviation. Constant features are centered only.
void standardize(Dataset& train, Dataset& test);

/// 80/20 split by `split_seed` with train-statistics standardization.
/// Targets are left in natural units.
std::pair<Dataset, Dataset> load_uci_csv(const std::filesystem::path& path, const std::string& target_column,
                                         std::uint64_t split_seed, double train_fraction = 0.8);

struct UciEntry {
  std::string name;
  std::string file;
  std::string target;
};

/// Datasets bundled under data/uci.
const std::vector<UciEntry>& uci_registry();
const UciEntry& uci_entry(const std::string& name);
/// GEOPARAM_DATA_DIR environment variable if set, else the source-tree data dir.
std::filesystem::path data_dir();

}  // namespace geoparam
