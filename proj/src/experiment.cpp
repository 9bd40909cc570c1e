#include "geoparam/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "geoparam/checkpoint.hpp"
#include "geoparam/csv.hpp"
#include "geoparam/error.hpp"

#ifndef GEOPARAM_VERSION
#define GEOPARAM_VERSION "unknown"
#endif

namespace geoparam {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream), std::uint32_t(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t(out[0]) << 32) | out[1];
}

int worker_threads(int requested) {
  int n = std::max(requested, 1);
  if (const char* env = std::getenv("GEOPARAM_THREADS"); env && *env) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

namespace {

bool is_classification(const MlpSpec& spec) { return spec.loss == LossKind::softmax_ce; }

double evaluate(const Model& model, const Dataset& test) {
  const Tensor out = predict(model, test.X);
  if (!out.allFinite()) return std::nan("");
  return is_classification(model.spec) ? accuracy(out, test.Y) : rmse(out, test.Y);
}

Tensor take(const Tensor& m, const std::vector<Eigen::Index>& idx, std::size_t begin, std::size_t end) {
  Tensor out(Eigen::Index(end - begin), m.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(Eigen::Index(i - begin)) = m.row(idx[i]);
  return out;
}

}  // namespace

TrainResult train(const MlpSpec& spec, const InitOptions& init, const Dataset& train_set, const Dataset& test_set,
                  const TrainOptions& options) {
  TrainResult result;
  std::mt19937_64 init_rng(derive_seed(options.seed, 2));
  std::mt19937_64 batch_rng(derive_seed(options.seed, 3));
  result.model = build(spec, init, init_rng);
  Model& model = result.model;
  Optimizer opt(options.optim);

  const bool track = options.track_layer >= 0 && std::size_t(options.track_layer) + 1 < spec.layers.size();
  std::optional<StabilityTracker> tracker;
  if (track) {
    tracker.emplace(options.track_layer, options.snapshot_stride, options.trace_stride);
    tracker->observe(model, 0);
  }

  const Eigen::Index rows = train_set.rows();
  const bool full = options.batch_size == 0 || options.batch_size >= rows;
  const Eigen::Index bs = full ? rows : options.batch_size;
  std::vector<Eigen::Index> order(std::size_t(rows), 0);
  std::iota(order.begin(), order.end(), Eigen::Index(0));

  long step = 0;
  for (long epoch = 1; epoch <= options.epochs && !result.diverged; ++epoch) {
    if (!full) std::shuffle(order.begin(), order.end(), batch_rng);
    double loss_sum = 0.0;
    long batches = 0;
    for (Eigen::Index start = 0; start < rows && !result.diverged; start += bs) {
      const Eigen::Index end = std::min(rows, start + bs);
      // A trailing batch of one row has no batch statistics.
      if (!full && end - start < 2 && batches > 0) break;
      try {
        ForwardPass pass = full ? loss_forward(model, train_set.X, train_set.Y, Mode::train)
                                : loss_forward(model, take(train_set.X, order, std::size_t(start), std::size_t(end)),
                                               take(train_set.Y, order, std::size_t(start), std::size_t(end)),
                                               Mode::train);
        const double loss = pass.loss_value();
        if (is_divergent(loss)) {
          result.diverged = true;
          result.divergence = "loss " + csv::format_double(loss) + " at step " + std::to_string(step + 1);
          break;
        }
        const std::vector<Tensor> grads = pass.trainable_gradients();
        const std::vector<ParamRef> refs = trainable_slots(model);
        opt.step(refs, grads);
        loss_sum += loss;
        ++batches;
        ++step;
        if (tracker) tracker->observe(model, step);
      } catch (const NumericError& e) {
        result.diverged = true;
        result.divergence = std::string(e.what()) + " at step " + std::to_string(step + 1);
      } catch (const DegenerateWeight& e) {
        result.diverged = true;
        result.divergence = std::string(e.what()) + " at step " + std::to_string(step + 1);
      }
    }
    if (result.diverged) break;
    const bool last = epoch == options.epochs;
    const double metric = options.eval_every_epoch || last ? evaluate(model, test_set) : std::nan("");
    result.metrics.push_back(EpochRecord{epoch, loss_sum / double(std::max(batches, 1L)), metric, opt.lr()});
    if (last && !std::isfinite(metric)) {
      result.diverged = true;
      result.divergence = "non-finite test predictions";
    }
  }
  result.steps = step;
  result.final_test_metric = result.diverged ? std::nan("") : result.metrics.back().test_metric;
  if (tracker) {
    result.stability = tracker->trace();
    result.snapshots = tracker->snapshots();
  }
  return result;
}

MlpSpec model_spec(const ExperimentConfig& cfg, Eigen::Index input_dim, Eigen::Index output_dim) {
  const LossKind loss = cfg.is_regression() ? LossKind::mse : LossKind::softmax_ce;
  return make_mlp(input_dim, cfg.hidden, output_dim, cfg.param, loss, cfg.seed.value_or(0));
}

std::pair<Dataset, Dataset> make_datasets(const ExperimentConfig& cfg) {
  std::mt19937_64 rng(derive_seed(*cfg.seed, 1));
  if (cfg.dataset == "levy") {
    Dataset tr = gen_levy(cfg.n_train, cfg.levy, rng);
    Dataset te = gen_levy(cfg.n_test, cfg.levy, rng);
    return {std::move(tr), std::move(te)};
  }
  if (cfg.dataset == "banana") {
    if (!cfg.dataset_path.empty()) {
      return split_dataset(load_banana_csv(cfg.dataset_path), 0.8, derive_seed(*cfg.seed, 1));
    }
    Dataset tr = gen_banana(cfg.n_train, cfg.banana, rng);
    Dataset te = gen_banana(cfg.n_test, cfg.banana, rng);
    return {std::move(tr), std::move(te)};
  }
  throw ConfigError("make_datasets: '" + cfg.dataset + "' is a tabular dataset");
}

namespace {

TrainOptions train_options(const ExperimentConfig& cfg, double lr, std::uint64_t seed) {
  TrainOptions o;
  o.epochs = cfg.epochs;
  o.batch_size = cfg.batch_size;
  o.optim = cfg.optim;
  o.optim.lr = lr;
  o.seed = seed;
  o.snapshot_stride = cfg.snapshot_stride;
  o.trace_stride = cfg.trace_stride;
  return o;
}

Eigen::Index output_dim(const ExperimentConfig& cfg, const Dataset& train_set) {
  if (cfg.is_regression()) return train_set.Y.cols();
  return Eigen::Index(train_set.Y.maxCoeff()) + 1;
}

GridSelection select_lr(const ExperimentConfig& cfg, const Dataset& train_part, bool standardize_inner) {
  auto [inner, val] = split_dataset(train_part, 0.8, derive_seed(*cfg.seed, 1000));
  if (standardize_inner) standardize(inner, val);
  const MlpSpec spec = model_spec(cfg, inner.features(), output_dim(cfg, inner));
  const MetricMode mode = cfg.is_regression() ? MetricMode::min : MetricMode::max;
  const auto metrics = parallel_map<std::optional<double>>(
      int(cfg.lr_grid.size()), worker_threads(cfg.parallel_folds), [&](int i) -> std::optional<double> {
        TrainOptions o = train_options(cfg, cfg.lr_grid[std::size_t(i)], derive_seed(*cfg.seed, 2000));
        o.track_layer = -1;
        o.eval_every_epoch = false;
        const TrainResult r = train(spec, cfg.init, inner, val, o);
        if (r.diverged) return std::nullopt;
        return r.final_test_metric;
      });
  std::size_t k = 0;
  return lr_grid_select(cfg.lr_grid, [&](double) { return metrics[k++]; }, mode);
}

void export_grid(const GridSelection& sel, const std::filesystem::path& path) {
  std::ofstream out = csv::open_output(path);
  csv::write_row(out, {"lr", "val_metric", "selected"});
  for (const GridEntry& e : sel.table) {
    csv::write_row(out, {csv::format_double(e.lr), e.metric ? csv::format_double(*e.metric) : "",
                         e.lr == sel.best_lr ? "1" : "0"});
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_run_files(const TrainResult& r, const std::filesystem::path& dir) {
  export_metrics(r.metrics, dir / "metrics.csv");
  export_stability(r.stability, dir / "stability.csv");
  export_trace(r.snapshots, dir / "trace.csv");
  save_checkpoint(r.model, dir / "checkpoint.bin");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out = csv::open_output(path);
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

TabularSummary run_tabular(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  Dataset raw;
  if (cfg.is_uci()) {
    const UciEntry& e = uci_entry(cfg.dataset.substr(4));
    raw = read_regression_csv(data_dir() / e.file, e.target);
    raw.name = e.name;
  } else {
    raw = read_regression_csv(cfg.dataset_path, cfg.dataset_target);
  }
  if (raw.rows() < 5) throw DataError(raw.name + ": at least 5 rows required");

  TabularSummary summary;
  summary.dataset = raw.name;
  summary.param = cfg.param;
  summary.lr = cfg.optim.lr;
  if (!cfg.lr_grid.empty()) {
    const auto [train0, test0] = split_dataset(raw, 0.8, derive_seed(*cfg.seed, 100));
    const GridSelection sel = select_lr(cfg, train0, true);
    summary.lr = sel.best_lr;
    summary.grid = sel.table;
    if (!out_dir.empty()) export_grid(sel, out_dir / "grid.csv");
  }

  const MlpSpec spec = model_spec(cfg, raw.features(), 1);
  summary.splits = parallel_map<SplitResult>(cfg.splits, worker_threads(cfg.parallel_folds), [&](int k) {
    auto [tr, te] = split_dataset(raw, 0.8, derive_seed(*cfg.seed, 100 + std::uint64_t(k)));
    standardize(tr, te);
    TrainOptions o = train_options(cfg, summary.lr, derive_seed(*cfg.seed, 200 + std::uint64_t(k)));
    o.eval_every_epoch = !out_dir.empty();
    if (out_dir.empty()) o.track_layer = -1;
    const TrainResult r = train(spec, cfg.init, tr, te, o);
    if (!out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "split_%02d", k);
      write_run_files(r, out_dir / name);
    }
    return SplitResult{k, r.final_test_metric, r.diverged};
  });

  std::vector<double> ok;
  for (const SplitResult& s : summary.splits) {
    if (s.diverged) {
      ++summary.diverged_splits;
    } else {
      ok.push_back(s.test_rmse);
    }
  }
  if (ok.empty()) {
    summary.mean_rmse = summary.std_rmse = summary.stderr_rmse = std::nan("");
  } else {
    const double n = double(ok.size());
    summary.mean_rmse = std::accumulate(ok.begin(), ok.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : ok) ss += (v - summary.mean_rmse) * (v - summary.mean_rmse);
    summary.std_rmse = ok.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    summary.stderr_rmse = summary.std_rmse / std::sqrt(n);
  }
  return summary;
}

void export_metrics(const std::vector<EpochRecord>& metrics, const std::filesystem::path& path) {
  std::ofstream out = csv::open_output(path);
  csv::write_row(out, {"epoch", "train_loss", "test_metric", "lr"});
  for (const EpochRecord& m : metrics) {
    csv::write_row(out, {std::to_string(m.epoch), csv::format_double(m.train_loss), csv::format_double(m.test_metric),
                         csv::format_double(m.lr)});
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void export_summary(const std::vector<TabularSummary>& rows, const std::filesystem::path& path) {
  std::ofstream out = csv::open_output(path);
  csv::write_row(out, {"dataset", "parameterization", "lr", "splits", "mean_rmse", "std_rmse", "stderr_rmse",
                       "diverged_splits"});
  for (const TabularSummary& s : rows) {
    csv::write_row(out, {s.dataset, to_string(s.param), csv::format_double(s.lr), std::to_string(s.splits.size()),
                         csv::format_double(s.mean_rmse), csv::format_double(s.std_rmse),
                         csv::format_double(s.stderr_rmse), std::to_string(s.diverged_splits)});
  }
  if (!out) throw IoError("write failed for " + path.string());
}

RunOutcome run(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::filesystem::path dir = cfg.out_dir;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create run directory " + dir.string() + ": " + ec.message());
  write_text(dir / "config.txt", render_config(cfg));

  RunOutcome outcome;
  outcome.out_dir = dir;
  std::string manifest = "geoparam_version = " GEOPARAM_VERSION "\n";
  manifest += "dataset = " + cfg.dataset + "\nparameterization = " + to_string(cfg.param) + "\n";

  if (cfg.is_uci() || cfg.dataset == "csv") {
    const TabularSummary s = run_tabular(cfg, dir);
    export_summary({s}, dir / "summary.csv");
    outcome.lr = s.lr;
    outcome.final_metric = s.mean_rmse;
    outcome.status = s.diverged_splits == int(s.splits.size()) ? RunStatus::diverged : RunStatus::ok;
    manifest += "lr = " + csv::format_double(s.lr) + "\nsplits = " + std::to_string(s.splits.size()) +
                "\ndiverged_splits = " + std::to_string(s.diverged_splits) +
                "\nmean_test_rmse = " + csv::format_double(s.mean_rmse) + "\n";
  } else {
    const auto [tr, te] = make_datasets(cfg);
    double lr = cfg.optim.lr;
    if (!cfg.lr_grid.empty()) {
      const GridSelection sel = select_lr(cfg, tr, false);
      lr = sel.best_lr;
      export_grid(sel, dir / "grid.csv");
    }
    const MlpSpec spec = model_spec(cfg, tr.features(), output_dim(cfg, tr));
    const TrainResult r = train(spec, cfg.init, tr, te, train_options(cfg, lr, derive_seed(*cfg.seed, 4)));
    write_run_files(r, dir);
    outcome.lr = lr;
    outcome.final_metric = r.final_test_metric;
    outcome.status = r.diverged ? RunStatus::diverged : RunStatus::ok;
    manifest += "lr = " + csv::format_double(lr) + "\nsteps = " + std::to_string(r.steps) +
                "\nparameter_count = " + std::to_string(parameter_count(r.model)) +
                "\ntest_metric = " + std::string(cfg.is_regression() ? "rmse" : "accuracy") +
                "\nfinal_test_metric = " + csv::format_double(r.final_test_metric) + "\n";
    if (r.diverged) manifest += "divergence = " + r.divergence + "\n";
  }
  manifest += std::string("status = ") + (outcome.status == RunStatus::ok ? "ok" : "diverged") + "\n";
  write_text(dir / "manifest.txt", manifest);
  return outcome;
}

}  // namespace geoparam
