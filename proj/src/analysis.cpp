#include "geoparam/analysis.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "geoparam/csv.hpp"
#include "geoparam/error.hpp"

namespace geoparam {

namespace {

void require_hidden(const Model& model, int layer) {
  if (layer < 0 || std::size_t(layer) >= model.params.size()) {
    throw ConfigError("layer index " + std::to_string(layer) + " out of range");
  }
  if (std::size_t(layer) + 1 == model.params.size()) {
    throw ConfigError("snapshots are defined for hidden layers only, not the output layer");
  }
}

UnitSnapshot from_direction(long step, int layer, int unit, Eigen::VectorXd direction, double lambda) {
  UnitSnapshot s;
  s.step = step;
  s.layer = layer;
  s.unit = unit;
  if (direction.size() == 1) {
    s.theta = AngularCoordinates<double>(Eigen::VectorXd::Constant(1, direction[0] < 0 ? std::numbers::pi : 0.0));
  } else {
    s.theta = angles_from_direction<double>(direction);
  }
  s.lambda = lambda;
  s.phi = -lambda * direction;
  s.direction = std::move(direction);
  return s;
}

}  // namespace

EffectiveWeights effective_weights(const Model& model, int layer) {
  require_hidden(model, layer);
  const ParamSet& p = model.params[std::size_t(layer)];
  const LayerSpec& spec = model.spec.layers[std::size_t(layer)];
  switch (p.kind()) {
    case LayerKind::SP:
      return {p["W"], p["b"].row(0)};
    case LayerKind::WN: {
      const Tensor& v = p["V"];
      const Eigen::VectorXd norms = v.rowwise().norm();
      if (!(norms.minCoeff() > 1e-30)) throw DegenerateWeight("WN direction row with zero norm");
      Tensor w = (p["l"].row(0).transpose().array() / norms.array()).matrix().asDiagonal() * v;
      Eigen::RowVectorXd b = p["b"].row(0);
      if (spec.post_norm == PostNorm::MBN) b -= p["mbn_running_mean"].row(0);
      return {std::move(w), std::move(b)};
    }
    case LayerKind::BN_SP: {
      const Eigen::ArrayXd scale =
          p["gamma"].row(0).transpose().array() *
          (p["running_var"].row(0).transpose().array() + model.spec.norm.bn_epsilon).rsqrt();
      Tensor w = scale.matrix().asDiagonal() * p["W"];
      const Eigen::ArrayXd b = p["beta"].row(0).transpose().array() +
                               scale * (p["b"].row(0).transpose().array() - p["running_mean"].row(0).transpose().array());
      return {std::move(w), b.matrix().transpose()};
    }
    case LayerKind::GMP:
      throw ConfigError("GmP layers are snapshotted from their own parameters");
  }
  throw ConfigError("unreachable layer kind");
}

std::vector<UnitSnapshot> snapshot_layer(const Model& model, int layer, long step) {
  require_hidden(model, layer);
  const ParamSet& p = model.params[std::size_t(layer)];
  const Eigen::Index n = model.spec.layers[std::size_t(layer)].fan_in;
  std::vector<UnitSnapshot> out;
  if (p.kind() == LayerKind::GMP) {
    const Tensor& theta = p["theta"];
    const Tensor& lambda = p["lambda"];
    for (Eigen::Index i = 0; i < theta.rows(); ++i) {
      Eigen::VectorXd direction =
          n == 1 ? Eigen::VectorXd::Constant(1, std::cos(theta(i, 0)))
                 : unit_vector(AngularCoordinates<double>(theta.row(i).transpose())).components();
      out.push_back(from_direction(step, layer, int(i), std::move(direction), lambda(0, i)));
    }
    return out;
  }
  const EffectiveWeights eff = effective_weights(model, layer);
  for (Eigen::Index i = 0; i < eff.w.rows(); ++i) {
    const Eigen::VectorXd w = eff.w.row(i).transpose();
    const double norm = w.norm();
    if (!(norm >= 1e-30)) throw DegenerateWeight("unit " + std::to_string(i) + " has a zero effective weight");
    out.push_back(from_direction(step, layer, int(i), w / norm, eff.b[i] / norm));
  }
  return out;
}

Drift drift_metrics(const std::vector<UnitSnapshot>& prev, const std::vector<UnitSnapshot>& curr) {
  if (prev.size() != curr.size()) {
    throw ShapeError("drift_metrics: " + std::to_string(prev.size()) + " vs " + std::to_string(curr.size()) + " units");
  }
  Drift d;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    if (prev[i].unit != curr[i].unit || prev[i].phi.size() != curr[i].phi.size()) {
      throw ShapeError("drift_metrics: unit ordering differs at position " + std::to_string(i));
    }
    d.max_abs_dphi = std::max(d.max_abs_dphi, (curr[i].phi - prev[i].phi).norm());
    d.max_dangle_deg = std::max(d.max_dangle_deg, degrees(angle_between<double>(prev[i].direction, curr[i].direction)));
  }
  return d;
}

StabilityTracker::StabilityTracker(int layer, long stride, long keep_stride)
    : layer_(layer), stride_(stride), keep_(keep_stride) {
  if (stride < 1) throw ConfigError("snapshot stride must be at least 1");
  if (keep_stride < 0) throw ConfigError("trace stride must be nonnegative");
}

void StabilityTracker::observe(const Model& model, long step) {
  if (!last_.empty() && step % stride_ != 0) return;
  std::vector<UnitSnapshot> snap = snapshot_layer(model, layer_, step);
  if (!last_.empty()) {
    const Drift d = drift_metrics(last_, snap);
    trace_.steps.push_back(step);
    trace_.max_abs_dphi.push_back(d.max_abs_dphi);
    trace_.max_abs_dtheta_deg.push_back(d.max_dangle_deg);
  }
  if (keep_ > 0 && step % keep_ == 0) history_.insert(history_.end(), snap.begin(), snap.end());
  last_ = std::move(snap);
}

void export_trace(const std::vector<UnitSnapshot>& snapshots, const std::filesystem::path& path) {
  std::ofstream out = csv::open_output(path);
  const Eigen::Index n = snapshots.empty() ? 1 : snapshots.front().phi.size();
  std::vector<std::string> header{"step", "layer", "unit"};
  for (Eigen::Index k = 0; k < n; ++k) header.push_back("phi_" + std::to_string(k));
  header.push_back("lambda");
  header.push_back("angle_deg");
  csv::write_row(out, header);
  for (const UnitSnapshot& s : snapshots) {
    if (s.phi.size() != n) throw ShapeError("export_trace: snapshots of different dimension");
    std::vector<std::string> row{std::to_string(s.step), std::to_string(s.layer), std::to_string(s.unit)};
    for (Eigen::Index k = 0; k < n; ++k) row.push_back(csv::format_double(s.phi[k]));
    row.push_back(csv::format_double(s.lambda));
    row.push_back(csv::format_double(degrees(s.theta[0])));
    csv::write_row(out, row);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void export_stability(const StabilityTrace& trace, const std::filesystem::path& path) {
  if (trace.max_abs_dphi.size() != trace.size() || trace.max_abs_dtheta_deg.size() != trace.size()) {
    throw ShapeError("export_stability: trace arrays differ in length");
  }
  std::ofstream out = csv::open_output(path);
  csv::write_row(out, {"step", "max_abs_dphi", "max_abs_dtheta_deg"});
  for (std::size_t i = 0; i < trace.size(); ++i) {
    csv::write_row(out, {std::to_string(trace.steps[i]), csv::format_double(trace.max_abs_dphi[i]),
                         csv::format_double(trace.max_abs_dtheta_deg[i])});
  }
  if (!out) throw IoError("write failed for " + path.string());
}

namespace {

std::vector<std::vector<double>> read_numeric(const std::filesystem::path& path, std::vector<std::string>& header) {
  std::ifstream in = csv::open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  header = csv::split_line(line);
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = csv::split_line(line);
    if (fields.size() != header.size()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                    " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!csv::parse_double(fields[i], row[i])) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": non-numeric field '" + fields[i] + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<UnitSnapshot> read_trace(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_numeric(path, header);
  if (header.size() < 6 || header[0] != "step" || header.back() != "angle_deg") {
    throw IoError(path.string() + ": not a trace file");
  }
  const Eigen::Index n = Eigen::Index(header.size()) - 5;
  std::vector<UnitSnapshot> out;
  for (const auto& r : rows) {
    UnitSnapshot s;
    s.step = long(r[0]);
    s.layer = int(r[1]);
    s.unit = int(r[2]);
    s.phi = Eigen::Map<const Eigen::VectorXd>(r.data() + 3, n);
    s.lambda = r[std::size_t(3 + n)];
    s.theta = AngularCoordinates<double>(Eigen::VectorXd::Constant(1, r.back() * std::numbers::pi / 180.0));
    out.push_back(std::move(s));
  }
  return out;
}

StabilityTrace read_stability(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_numeric(path, header);
  if (header != std::vector<std::string>{"step", "max_abs_dphi", "max_abs_dtheta_deg"}) {
    throw IoError(path.string() + ": not a stability file");
  }
  StabilityTrace t;
  for (const auto& r : rows) {
    t.steps.push_back(long(r[0]));
    t.max_abs_dphi.push_back(r[1]);
    t.max_abs_dtheta_deg.push_back(r[2]);
  }
  return t;
}

}  // namespace geoparam
