#pragma once

#include <filesystem>
#include <vector>

#include "geoparam/hypersphere.hpp"
#include "geoparam/model.hpp"

namespace geoparam {

/// Boundary of one hidden unit at one training step.
///
/// `direction` is the unit normal of the boundary and `lambda` the signed
/// radius, so phi = -lambda * direction. For one-dimensional inputs the
/// direction is +1 or -1 and theta holds 0 or pi.
struct UnitSnapshot {
  long step = 0;
  int layer = 0;
  int unit = 0;
  Eigen::VectorXd phi;
  Eigen::VectorXd direction;
  AngularCoordinates<double> theta{Eigen::VectorXd::Zero(1)};
  double lambda = 0.0;
};

/// Eval-time affine map (w, b) of every unit in a non-GmP hidden layer.
struct EffectiveWeights {
  Tensor w;               // m x n
  Eigen::RowVectorXd b;   // m
};

EffectiveWeights effective_weights(const Model& model, int layer);

/// Snapshots every unit of hidden layer `layer`. Throws ConfigError for the
/// output layer.
std::vector<UnitSnapshot> snapshot_layer(const Model& model, int layer, long step);

struct Drift {
  double max_abs_dphi = 0.0;
  double max_dangle_deg = 0.0;
};

Drift drift_metrics(const std::vector<UnitSnapshot>& prev, const std::vector<UnitSnapshot>& curr);

struct StabilityTrace {
  std::vector<long> steps;
  std::vector<double> max_abs_dphi;
  std::vector<double> max_abs_dtheta_deg;

  std::size_t size() const { return steps.size(); }
};

/// Follows one hidden layer through training.
///
/// Call `observe` after every optimizer step (or every `stride` steps); the
/// first call only records a baseline. Snapshots are retained every
/// `keep_stride` steps (never when 0).
class StabilityTracker {
 public:
  explicit StabilityTracker(int layer, long stride = 1, long keep_stride = 1);

  void observe(const Model& model, long step);

  const StabilityTrace& trace() const { return trace_; }
  const std::vector<UnitSnapshot>& snapshots() const { return history_; }

 private:
  int layer_;
  long stride_;
  long keep_;
  std::vector<UnitSnapshot> last_;
  std::vector<UnitSnapshot> history_;
  StabilityTrace trace_;
};

/// trace.csv: step, layer, unit, phi_0..phi_{n-1}, lambda, angle_deg.
void export_trace(const std::vector<UnitSnapshot>& snapshots, const std::filesystem::path& path);
/// stability.csv: step, max_abs_dphi, max_abs_dtheta_deg.
void export_stability(const StabilityTrace& trace, const std::filesystem::path& path);

std::vector<UnitSnapshot> read_trace(const std::filesystem::path& path);
StabilityTrace read_stability(const std::filesystem::path& path);

}  // namespace geoparam
