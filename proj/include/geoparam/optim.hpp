#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "geoparam/autodiff.hpp"
#include "geoparam/model.hpp"

namespace geoparam {

enum class OptimizerKind { sgd_momentum, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// SGD with heavy-ball momentum or Adam with bias correction.
///
/// Slot buffers are keyed by position, so callers must pass parameters in
/// the same order on every step.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  /// Applies one update. A non-finite gradient aborts the whole step before
  /// any parameter changes and raises NumericError naming the slot.
  void step(std::span<const ParamRef> params, std::span<const Tensor> grads);

  long step_count() const { return step_count_; }
  double lr() const { return config_.lr; }
  void set_lr(double lr);
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  long step_count_ = 0;
  std::vector<Tensor> first_;
  std::vector<Tensor> second_;
};

enum class MetricMode { min, max };

enum class SchedulerAction { proceed, reduce_lr, stop };

/// Reduce-on-plateau with early stopping.
class PlateauScheduler {
 public:
  PlateauScheduler(int patience_reduce, int patience_stop, double factor, MetricMode mode);

  SchedulerAction update(double metric);

  double factor() const { return factor_; }
  double best() const { return best_; }
  int epochs_since_improvement() const { return bad_epochs_; }

 private:
  int patience_reduce_;
  int patience_stop_;
  double factor_;
  MetricMode mode_;
  double best_ = 0.0;
  bool has_best_ = false;
  int bad_epochs_ = 0;
};

/// Loss values that abort a run: non-finite or above 1e6.
bool is_divergent(double loss);

struct GridEntry {
  double lr = 0.0;
  std::optional<double> metric;  // empty when the run diverged
};

struct GridSelection {
  double best_lr = 0.0;
  std::vector<GridEntry> table;
};

/// Runs `evaluate` for every learning rate and keeps the best metric. Ties go
/// to the smaller learning rate. Throws NoViableLearningRate if every run
/// returned no metric.
GridSelection lr_grid_select(std::span<const double> grid, const std::function<std::optional<double>(double)>& evaluate,
                             MetricMode mode);

/// {0.001, 0.003, 0.01, 0.03, 0.1, 0.3}
std::vector<double> default_lr_grid();

}  // namespace geoparam
