#include "geoparam/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <numeric>

#include "geoparam/csv.hpp"
#include "geoparam/error.hpp"

#ifndef GEOPARAM_DATA_DIR
#define GEOPARAM_DATA_DIR "data"
#endif

namespace geoparam {

double levy(double x) {
  const double pi = std::numbers::pi;
  const double w = 1.0 + (x - 1.0) / 4.0;
  const double a = std::sin(pi * w);
  const double c = std::sin(2.0 * pi * w);
  return a * a + (w - 1.0) * (w - 1.0) * (1.0 + c * c);
}

Dataset gen_levy(Eigen::Index n_points, const LevyOptions& options, std::mt19937_64& rng) {
  if (n_points < 2) throw DataError("gen_levy needs at least 2 points");
  if (!(options.x_min < options.x_max) || !std::isfinite(options.x_min) || !std::isfinite(options.x_max)) {
    throw DataError("gen_levy: invalid x range");
  }
  if (!(options.noise_std >= 0.0)) throw DataError("gen_levy: noise_std must be nonnegative");
  std::uniform_real_distribution<double> ux(options.x_min, options.x_max);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d;
  d.name = "levy";
  d.feature_names = {"x"};
  d.X.resize(n_points, 1);
  d.Y.resize(n_points, 1);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    const double x = ux(rng);
    d.X(i, 0) = x;
    d.Y(i, 0) = levy(x) + options.noise_std * noise(rng);
  }
  return d;
}

Dataset gen_banana(Eigen::Index n_points, const BananaOptions& options, std::mt19937_64& rng) {
  if (n_points < 2 || n_points % 2 != 0) throw DataError("gen_banana needs an even, positive point count");
  if (!(options.noise_std >= 0.0)) throw DataError("gen_banana: noise_std must be nonnegative");
  std::uniform_real_distribution<double> ut(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double r = options.radius;
  Dataset d;
  d.name = "banana";
  d.feature_names = {"x1", "x2"};
  d.X.resize(n_points, 2);
  d.Y.resize(n_points, 1);
  const Eigen::Index half = n_points / 2;
  for (Eigen::Index i = 0; i < n_points; ++i) {
    const double t = ut(rng);
    if (i < half) {
      d.X(i, 0) = r * std::cos(t);
      d.X(i, 1) = r * std::sin(t);
      d.Y(i, 0) = 0.0;
    } else {
      d.X(i, 0) = r + r * std::cos(t);
      d.X(i, 1) = -r * std::sin(t) - options.gap;
      d.Y(i, 0) = 1.0;
    }
    d.X(i, 0) += options.noise_std * noise(rng);
    d.X(i, 1) += options.noise_std * noise(rng);
  }
  return d;
}

namespace {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("data file not found: " + path.string());
  std::ifstream in = csv::open_input(path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file, header row required");
  t.header = csv::split_line(line);
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != t.header.size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row with " +
                      std::to_string(fields.size()) + " fields, expected " + std::to_string(t.header.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!csv::parse_double(fields[i], row[i]) || !std::isfinite(row[i])) {
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" + fields[i] +
                        "' in column " + t.header[i]);
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

Dataset take_rows(const Dataset& d, const std::vector<Eigen::Index>& idx) {
  Dataset out;
  out.name = d.name;
  out.feature_names = d.feature_names;
  out.X.resize(Eigen::Index(idx.size()), d.X.cols());
  out.Y.resize(Eigen::Index(idx.size()), d.Y.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.X.row(Eigen::Index(i)) = d.X.row(idx[i]);
    out.Y.row(Eigen::Index(i)) = d.Y.row(idx[i]);
  }
  return out;
}

}  // namespace

Dataset read_regression_csv(const std::filesystem::path& path, const std::string& target_column) {
  const Table t = read_table(path);
  const auto it = std::find(t.header.begin(), t.header.end(), target_column);
  if (it == t.header.end()) throw DataError(path.string() + ": target column '" + target_column + "' not found");
  const std::size_t target = std::size_t(it - t.header.begin());
  if (t.header.size() < 2) throw DataError(path.string() + ": need at least one feature column");
  Dataset d;
  d.name = path.stem().string();
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (j != target) d.feature_names.push_back(t.header[j]);
  }
  const Eigen::Index rows = Eigen::Index(t.rows.size());
  d.X.resize(rows, Eigen::Index(t.header.size() - 1));
  d.Y.resize(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = t.rows[std::size_t(i)];
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j == target) {
        d.Y(i, 0) = r[j];
      } else {
        d.X(i, c++) = r[j];
      }
    }
  }
  return d;
}

Dataset load_banana_csv(const std::filesystem::path& path) {
  const Table t = read_table(path);
  if (t.header != std::vector<std::string>{"x1", "x2", "label"}) {
    throw DataError(path.string() + ": expected columns x1,x2,label");
  }
  Dataset d;
  d.name = "banana";
  d.feature_names = {"x1", "x2"};
  const Eigen::Index rows = Eigen::Index(t.rows.size());
  if (rows < 2) throw DataError(path.string() + ": too few rows");
  d.X.resize(rows, 2);
  d.Y.resize(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = t.rows[std::size_t(i)];
    d.X(i, 0) = r[0];
    d.X(i, 1) = r[1];
    // Some published copies label the classes -1 and 1.
    const double label = r[2] < 0 ? 0.0 : r[2];
    if (label != 0.0 && label != 1.0) {
      throw DataError(path.string() + ":" + std::to_string(i + 2) + ": label must be 0/1 or -1/1");
    }
    d.Y(i, 0) = label;
  }
  return d;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& data, double train_fraction, std::uint64_t seed) {
  const Eigen::Index rows = data.rows();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw DataError("train fraction must lie in (0, 1)");
  if (rows < 2) throw DataError("cannot split fewer than 2 rows");
  std::vector<Eigen::Index> idx(std::size_t(rows), 0);
  std::iota(idx.begin(), idx.end(), Eigen::Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const Eigen::Index n_train = std::clamp<Eigen::Index>(std::llround(train_fraction * double(rows)), 1, rows - 1);
  const std::vector<Eigen::Index> a(idx.begin(), idx.begin() + n_train);
  const std::vector<Eigen::Index> b(idx.begin() + n_train, idx.end());
  return {take_rows(data, a), take_rows(data, b)};
}

void standardize(Dataset& train, Dataset& test) {
  if (train.features() != test.features()) throw ShapeError("standardize: feature counts differ");
  const Eigen::RowVectorXd mean = train.X.colwise().mean();
  const Eigen::RowVectorXd centered_sq = (train.X.rowwise() - mean).array().square().colwise().mean();
  Eigen::RowVectorXd stds = centered_sq.array().sqrt().matrix();
  for (Eigen::Index j = 0; j < stds.size(); ++j) {
    if (!(stds[j] > 1e-12)) stds[j] = 1.0;
  }
  for (Dataset* d : {&train, &test}) {
    d->X = ((d->X.rowwise() - mean).array().rowwise() / stds.array()).matrix();
    d->feature_means = mean;
    d->feature_stds = stds;
  }
}

std::pair<Dataset, Dataset> load_uci_csv(const std::filesystem::path& path, const std::string& target_column,
                                         std::uint64_t split_seed, double train_fraction) {
  const Dataset raw = read_regression_csv(path, target_column);
  if (raw.rows() < 5) throw DataError(path.string() + ": at least 5 rows required");
  auto [train, test] = split_dataset(raw, train_fraction, split_seed);
  standardize(train, test);
  return {std::move(train), std::move(test)};
}

const std::vector<UciEntry>& uci_registry() {
  static const std::vector<UciEntry> entries{
      {"boston", "uci/boston.csv", "medv"},
      {"wine", "uci/wine-quality-red.csv", "quality"},
      {"auto-mpg", "uci/auto-mpg.csv", "mpg"},
  };
  return entries;
}

const UciEntry& uci_entry(const std::string& name) {
  for (const UciEntry& e : uci_registry()) {
    if (e.name == name) return e;
  }
  std::string known;
  for (const UciEntry& e : uci_registry()) known += (known.empty() ? "" : ", ") + e.name;
  throw ConfigError("unknown UCI dataset '" + name + "' (bundled: " + known + ")");
}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("GEOPARAM_DATA_DIR"); env && *env) return env;
  return GEOPARAM_DATA_DIR;
}

}  // namespace geoparam
