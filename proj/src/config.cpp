#include "geoparam/config.hpp"

#include <cmath>
#include <sstream>

#include "geoparam/csv.hpp"
#include "geoparam/error.hpp"

namespace geoparam {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!csv::parse_double(value, v) || !std::isfinite(v)) throw ConfigError(key + ": expected a number, got '" + value + "'");
  return v;
}

long to_long(const std::string& key, const std::string& value) {
  const double v = to_double(key, value);
  if (v != std::floor(v) || std::abs(v) > 9e15) throw ConfigError(key + ": expected an integer, got '" + value + "'");
  return long(v);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  for (const std::string& f : csv::split_line(value)) {
    if (!f.empty()) out.push_back(f);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : ",") + csv::format_double(x);
  return s;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!seed) throw ConfigError("run.seed is required");
  if (dataset != "levy" && dataset != "banana" && dataset != "csv" && !is_uci()) {
    throw ConfigError("dataset.name: unknown dataset '" + dataset + "' (expected levy|banana|uci-<name>|csv)");
  }
  if (is_uci()) uci_entry(dataset.substr(4));
  if (dataset == "csv" && (dataset_path.empty() || dataset_target.empty())) {
    throw ConfigError("dataset.path and dataset.target are required for csv datasets");
  }
  if ((dataset == "levy" || dataset == "banana") && (n_train < 2 || n_test < 2)) {
    throw ConfigError("dataset.n_train and dataset.n_test must be at least 2");
  }
  if (dataset == "banana" && (n_train % 2 != 0 || n_test % 2 != 0)) {
    throw ConfigError("dataset.n_train and dataset.n_test must be even for banana");
  }
  if (splits < 1) throw ConfigError("dataset.splits must be at least 1");
  if (hidden.empty()) throw ConfigError("model.hidden needs at least one layer");
  for (Eigen::Index h : hidden) {
    if (h < 1) throw ConfigError("model.hidden sizes must be positive");
  }
  optim.validate();
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) throw ConfigError("optim.grid values must be positive");
  }
  if (epochs < 1) throw ConfigError("run.epochs must be at least 1");
  if (batch_size < 0) throw ConfigError("run.batch_size must be nonnegative");
  if (snapshot_stride < 1) throw ConfigError("run.snapshot_stride must be at least 1");
  if (trace_stride < 0) throw ConfigError("run.trace_stride must be nonnegative");
  if (parallel_folds < 1) throw ConfigError("run.parallel_folds must be at least 1");
}

void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "dataset.name") {
    c.dataset = value;
  } else if (key == "dataset.path") {
    c.dataset_path = value;
  } else if (key == "dataset.target") {
    c.dataset_target = value;
  } else if (key == "dataset.n_train") {
    c.n_train = to_long(key, value);
  } else if (key == "dataset.n_test") {
    c.n_test = to_long(key, value);
  } else if (key == "dataset.noise") {
    c.levy.noise_std = c.banana.noise_std = to_double(key, value);
  } else if (key == "dataset.x_min") {
    c.levy.x_min = to_double(key, value);
  } else if (key == "dataset.x_max") {
    c.levy.x_max = to_double(key, value);
  } else if (key == "dataset.splits") {
    c.splits = int(to_long(key, value));
  } else if (key == "model.hidden") {
    c.hidden.clear();
    for (const std::string& f : split_list(value)) c.hidden.push_back(to_long(key, f));
  } else if (key == "model.param") {
    try {
      c.param = parse_parameterization(value);
    } catch (const ConfigError& e) {
      throw ConfigError("model.param: " + std::string(e.what()));
    }
  } else if (key == "model.init") {
    if (value == "he") {
      c.init.dense = InitScheme::he;
    } else if (value == "glorot") {
      c.init.dense = InitScheme::glorot;
    } else {
      throw ConfigError("model.init: expected he|glorot, got '" + value + "'");
    }
  } else if (key == "model.gmp_init") {
    if (value == "default") {
      c.init.gmp = InitScheme::gmp_default;
    } else if (value == "uniform-angles") {
      c.init.gmp = InitScheme::gmp_uniform_angles;
    } else {
      throw ConfigError("model.gmp_init: expected default|uniform-angles, got '" + value + "'");
    }
  } else if (key == "optim.kind") {
    if (value == "adam") {
      c.optim.kind = OptimizerKind::adam;
    } else if (value == "sgd") {
      c.optim.kind = OptimizerKind::sgd_momentum;
    } else {
      throw ConfigError("optim.kind: expected adam|sgd, got '" + value + "'");
    }
  } else if (key == "optim.lr") {
    c.optim.lr = to_double(key, value);
  } else if (key == "optim.grid") {
    c.lr_grid.clear();
    if (value == "default") {
      c.lr_grid = default_lr_grid();
    } else if (value != "none") {
      for (const std::string& f : split_list(value)) c.lr_grid.push_back(to_double(key, f));
    }
  } else if (key == "optim.momentum") {
    c.optim.momentum = to_double(key, value);
  } else if (key == "optim.beta1") {
    c.optim.beta1 = to_double(key, value);
  } else if (key == "optim.beta2") {
    c.optim.beta2 = to_double(key, value);
  } else if (key == "optim.eps") {
    c.optim.eps = to_double(key, value);
  } else if (key == "run.epochs") {
    c.epochs = to_long(key, value);
  } else if (key == "run.batch_size") {
    c.batch_size = value == "full" ? 0 : to_long(key, value);
  } else if (key == "run.seed") {
    const long s = to_long(key, value);
    if (s < 0) throw ConfigError("run.seed must be nonnegative");
    c.seed = std::uint64_t(s);
  } else if (key == "run.snapshot_stride") {
    c.snapshot_stride = to_long(key, value);
  } else if (key == "run.trace_stride") {
    c.trace_stride = to_long(key, value);
  } else if (key == "run.parallel_folds") {
    c.parallel_folds = int(to_long(key, value));
  } else if (key == "run.out") {
    c.out_dir = value;
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const ExperimentConfig& c) {
  std::ostringstream out;
  auto kv = [&](const std::string& k, const std::string& v) { out << k << " = " << v << '\n'; };
  kv("dataset.name", c.dataset);
  if (!c.dataset_path.empty()) kv("dataset.path", c.dataset_path.string());
  if (!c.dataset_target.empty()) kv("dataset.target", c.dataset_target);
  kv("dataset.n_train", std::to_string(c.n_train));
  kv("dataset.n_test", std::to_string(c.n_test));
  kv("dataset.noise", csv::format_double(c.dataset == "banana" ? c.banana.noise_std : c.levy.noise_std));
  kv("dataset.x_min", csv::format_double(c.levy.x_min));
  kv("dataset.x_max", csv::format_double(c.levy.x_max));
  kv("dataset.splits", std::to_string(c.splits));
  std::string hidden;
  for (Eigen::Index h : c.hidden) hidden += (hidden.empty() ? "" : ",") + std::to_string(h);
  kv("model.hidden", hidden);
  kv("model.param", to_string(c.param));
  kv("model.init", c.init.dense == InitScheme::glorot ? "glorot" : "he");
  kv("model.gmp_init", c.init.gmp == InitScheme::gmp_uniform_angles ? "uniform-angles" : "default");
  kv("optim.kind", c.optim.kind == OptimizerKind::adam ? "adam" : "sgd");
  kv("optim.lr", csv::format_double(c.optim.lr));
  kv("optim.grid", c.lr_grid.empty() ? "none" : join_doubles(c.lr_grid));
  kv("optim.momentum", csv::format_double(c.optim.momentum));
  kv("optim.beta1", csv::format_double(c.optim.beta1));
  kv("optim.beta2", csv::format_double(c.optim.beta2));
  kv("optim.eps", csv::format_double(c.optim.eps));
  kv("run.epochs", std::to_string(c.epochs));
  kv("run.batch_size", c.batch_size == 0 ? "full" : std::to_string(c.batch_size));
  if (c.seed) kv("run.seed", std::to_string(*c.seed));
  kv("run.snapshot_stride", std::to_string(c.snapshot_stride));
  kv("run.trace_stride", std::to_string(c.trace_stride));
  kv("run.parallel_folds", std::to_string(c.parallel_folds));
  kv("run.out", c.out_dir.string());
  return out.str();
}

ExperimentConfig preset(const std::string& name, Parameterization param) {
  ExperimentConfig c;
  c.param = param;
  c.seed = 0;
  const bool gmp = param == Parameterization::gmp || param == Parameterization::gmp_imn;
  c.optim.kind = OptimizerKind::adam;
  c.optim.lr = gmp ? 0.1 : 0.01;
  if (name == "levy") {
    c.dataset = "levy";
    c.hidden = {100};
    c.n_train = 512;
    c.n_test = 512;
    c.epochs = 2000;
  } else if (name == "banana") {
    c.dataset = "banana";
    c.hidden = {10};
    c.n_train = 500;
    c.n_test = 500;
    c.epochs = 1000;
  } else if (name.rfind("uci-", 0) == 0) {
    uci_entry(name.substr(4));
    c.dataset = name;
    c.hidden = {100};
    c.splits = 10;
    c.epochs = 1000;
    c.trace_stride = 0;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected levy|banana|uci-<name>)");
  }
  c.out_dir = "runs/" + name + "-" + to_string(param);
  c.validate();
  return c;
}

}  // namespace geoparam
