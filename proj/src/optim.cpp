#include "geoparam/optim.hpp"

#include <cmath>
#include <limits>

#include "geoparam/error.hpp"

namespace geoparam {

void OptimizerConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("optim.lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum must lie in [0, 1)");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("optim.beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("optim.beta2 must lie in (0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optim.eps must be positive");
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) { config_.validate(); }

void Optimizer::set_lr(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("optim.lr must be positive");
  config_.lr = lr;
}

void Optimizer::step(std::span<const ParamRef> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw ShapeError("optimizer: one gradient per parameter required");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = *params[i].value;
    if (grads[i].rows() != p.rows() || grads[i].cols() != p.cols()) {
      throw ShapeError("optimizer: gradient shape mismatch for " + params[i].name);
    }
    if (!grads[i].allFinite()) throw NumericError("optimizer: non-finite gradient for " + params[i].name);
  }
  if (first_.empty()) {
    for (const ParamRef& p : params) {
      first_.push_back(Tensor::Zero(p.value->rows(), p.value->cols()));
      second_.push_back(Tensor::Zero(p.value->rows(), p.value->cols()));
    }
  } else if (first_.size() != params.size()) {
    throw ShapeError("optimizer: parameter list changed between steps");
  }

  ++step_count_;
  const double lr = config_.lr;
  if (config_.kind == OptimizerKind::sgd_momentum) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = config_.momentum * first_[i] + grads[i];
      *params[i].value -= lr * first_[i];
    }
    return;
  }
  const double t = double(step_count_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * grads[i];
    second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * grads[i].cwiseAbs2();
    const auto m_hat = first_[i].array() / c1;
    const auto v_hat = second_[i].array() / c2;
    params[i].value->array() -= lr * m_hat / (v_hat.sqrt() + config_.eps);
  }
}

PlateauScheduler::PlateauScheduler(int patience_reduce, int patience_stop, double factor, MetricMode mode)
    : patience_reduce_(patience_reduce), patience_stop_(patience_stop), factor_(factor), mode_(mode) {
  if (patience_reduce < 1) throw ConfigError("patience_reduce must be at least 1");
  if (patience_stop < patience_reduce) throw ConfigError("patience_stop must be >= patience_reduce");
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("plateau factor must lie in (0, 1)");
}

SchedulerAction PlateauScheduler::update(double metric) {
  if (!std::isfinite(metric)) throw NumericError("scheduler: non-finite metric");
  const bool improved = !has_best_ || (mode_ == MetricMode::max ? metric > best_ : metric < best_);
  if (improved) {
    best_ = metric;
    has_best_ = true;
    bad_epochs_ = 0;
    return SchedulerAction::proceed;
  }
  ++bad_epochs_;
  if (bad_epochs_ >= patience_stop_) return SchedulerAction::stop;
  if (bad_epochs_ % patience_reduce_ == 0) return SchedulerAction::reduce_lr;
  return SchedulerAction::proceed;
}

bool is_divergent(double loss) { return !std::isfinite(loss) || loss > 1e6; }

GridSelection lr_grid_select(std::span<const double> grid, const std::function<std::optional<double>(double)>& evaluate,
                             MetricMode mode) {
  if (grid.empty()) throw ConfigError("learning-rate grid is empty");
  GridSelection sel;
  std::optional<std::size_t> best;
  for (double lr : grid) {
    GridEntry entry{lr, evaluate(lr)};
    if (entry.metric && !std::isfinite(*entry.metric)) entry.metric.reset();
    sel.table.push_back(entry);
    if (!entry.metric) continue;
    if (!best) {
      best = sel.table.size() - 1;
      continue;
    }
    const GridEntry& cur = sel.table[*best];
    const double a = *entry.metric, b = *cur.metric;
    const bool better = mode == MetricMode::min ? a < b : a > b;
    if (better || (a == b && lr < cur.lr)) best = sel.table.size() - 1;
  }
  if (!best) throw NoViableLearningRate("every learning rate in the grid diverged");
  sel.best_lr = sel.table[*best].lr;
  return sel;
}

std::vector<double> default_lr_grid() { return {0.001, 0.003, 0.01, 0.03, 0.1, 0.3}; }

}  // namespace geoparam
