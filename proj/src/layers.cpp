#include "geoparam/layers.hpp"

#include <cmath>
#include <numbers>

#include "geoparam/error.hpp"
#include "geoparam/hypersphere.hpp"

namespace geoparam {

namespace {

constexpr double kPi = std::numbers::pi;

Tensor row(const Eigen::RowVectorXd& v) { return Tensor(v); }

Var activate(Var s, Activation g) { return g == Activation::relu ? relu(s) : s; }

void require_input(const LayerSpec& spec, const Tensor& x) {
  if (x.cols() != spec.fan_in) {
    throw ShapeError("layer expects " + std::to_string(spec.fan_in) + " input features, got " +
                     std::to_string(x.cols()));
  }
}

std::vector<Var> bind_constants(Tape& tape, const ParamSet& params) {
  std::vector<Var> vars;
  for (const ParamSlot& slot : params.slots()) vars.push_back(tape.constant(slot.value));
  return vars;
}

LayerSpec spec_of(const ParamSet& params, Eigen::Index fan_in, Activation g) {
  LayerSpec spec;
  spec.kind = params.kind();
  spec.fan_in = fan_in;
  spec.activation = g;
  if (params.kind() == LayerKind::GMP) {
    spec.fan_out = params["lambda"].cols();
    if (params.contains("imn_running_mean")) spec.post_norm = PostNorm::IMN;
  } else {
    spec.fan_out = params["b"].cols();
    if (params.contains("mbn_running_mean")) spec.post_norm = PostNorm::MBN;
  }
  return spec;
}

Eigen::Index slot_index(const ParamSet& params, std::string_view name) {
  const auto& slots = params.slots();
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].name == name) return Eigen::Index(i);
  }
  throw ConfigError("parameter set has no slot '" + std::string(name) + "'");
}

Tensor gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  Tensor t(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) t(i, j) = normal(rng);
  }
  return t;
}

void add_stat_count(ParamSet& p) { p.add("stat_count", Tensor::Zero(1, 1), false); }

void blend_running(Tensor& running, const Eigen::RowVectorXd& batch, bool first, double decay) {
  if (running.cols() != batch.size()) throw ShapeError("update_running: size mismatch");
  if (first) {
    running.row(0) = batch;
  } else {
    running.row(0) = decay * running.row(0) + (1.0 - decay) * batch;
  }
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::SP: return "SP";
    case LayerKind::WN: return "WN";
    case LayerKind::BN_SP: return "BN_SP";
    case LayerKind::GMP: return "GMP";
  }
  return "?";
}

std::string to_string(PostNorm norm) {
  switch (norm) {
    case PostNorm::none: return "none";
    case PostNorm::MBN: return "MBN";
    case PostNorm::IMN: return "IMN";
  }
  return "?";
}

std::string to_string(InitScheme scheme) {
  switch (scheme) {
    case InitScheme::he: return "he";
    case InitScheme::glorot: return "glorot";
    case InitScheme::gmp_default: return "gmp_default";
    case InitScheme::gmp_uniform_angles: return "gmp_uniform_angles";
  }
  return "?";
}

void LayerSpec::validate() const {
  if (fan_in < 1 || fan_out < 1) throw ConfigError("layer sizes must be positive");
  if (post_norm == PostNorm::IMN && kind != LayerKind::GMP) throw ConfigError("IMN requires a GMP layer");
  if (post_norm == PostNorm::MBN && kind != LayerKind::WN) throw ConfigError("MBN requires a WN layer");
}

void ParamSet::add(std::string name, Tensor value, bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter slot '" + name + "'");
  slots_.push_back(ParamSlot{std::move(name), std::move(value), trainable});
}

bool ParamSet::contains(std::string_view name) const {
  for (const ParamSlot& s : slots_) {
    if (s.name == name) return true;
  }
  return false;
}

Tensor& ParamSet::operator[](std::string_view name) {
  for (ParamSlot& s : slots_) {
    if (s.name == name) return s.value;
  }
  throw ConfigError("parameter set has no slot '" + std::string(name) + "'");
}

const Tensor& ParamSet::operator[](std::string_view name) const {
  for (const ParamSlot& s : slots_) {
    if (s.name == name) return s.value;
  }
  throw ConfigError("parameter set has no slot '" + std::string(name) + "'");
}

Eigen::Index ParamSet::trainable_count() const {
  Eigen::Index n = 0;
  for (const ParamSlot& s : slots_) {
    if (s.trainable) n += s.value.size();
  }
  return n;
}

ParamSet make_sp(Tensor w, Eigen::RowVectorXd b) {
  if (b.size() != w.rows()) throw ShapeError("make_sp: bias length must equal unit count");
  ParamSet p(LayerKind::SP);
  p.add("W", std::move(w), true);
  p.add("b", row(b), true);
  return p;
}

ParamSet make_wn(Tensor v, Eigen::RowVectorXd l, Eigen::RowVectorXd b, bool mean_only_bn) {
  if (l.size() != v.rows() || b.size() != v.rows()) throw ShapeError("make_wn: l and b need one entry per unit");
  const Eigen::Index m = v.rows();
  ParamSet p(LayerKind::WN);
  p.add("V", std::move(v), true);
  p.add("l", row(l), true);
  p.add("b", row(b), true);
  if (mean_only_bn) {
    p.add("mbn_running_mean", Tensor::Zero(1, m), false);
    add_stat_count(p);
  }
  return p;
}

ParamSet make_bn(Tensor w, Eigen::RowVectorXd b, Eigen::RowVectorXd gamma, Eigen::RowVectorXd beta) {
  const Eigen::Index m = w.rows();
  if (b.size() != m || gamma.size() != m || beta.size() != m) {
    throw ShapeError("make_bn: b, gamma and beta need one entry per unit");
  }
  ParamSet p(LayerKind::BN_SP);
  p.add("W", std::move(w), true);
  p.add("b", row(b), true);
  p.add("gamma", row(gamma), true);
  p.add("beta", row(beta), true);
  p.add("running_mean", Tensor::Zero(1, m), false);
  p.add("running_var", Tensor::Ones(1, m), false);
  add_stat_count(p);
  return p;
}

ParamSet make_gmp(Tensor theta, Eigen::RowVectorXd lambda, Eigen::RowVectorXd r, Eigen::Index fan_in,
                  bool input_mean_norm) {
  const Eigen::Index m = theta.rows();
  const Eigen::Index angle_cols = fan_in == 1 ? 1 : fan_in - 1;
  if (theta.cols() != angle_cols) {
    throw ShapeError("make_gmp: theta needs " + std::to_string(angle_cols) + " columns for fan_in " +
                     std::to_string(fan_in));
  }
  if (lambda.size() != m || r.size() != m) throw ShapeError("make_gmp: lambda and r need one entry per unit");
  ParamSet p(LayerKind::GMP);
  // In one dimension the direction is a sign fixed at initialization.
  p.add("theta", std::move(theta), fan_in > 1);
  p.add("lambda", row(lambda), true);
  p.add("r", row(r), true);
  if (input_mean_norm) {
    p.add("imn_running_mean", Tensor::Zero(1, fan_in), false);
    add_stat_count(p);
  }
  return p;
}

ParamSet gmp_from_sp(const Tensor& w, const Eigen::RowVectorXd& b) {
  const Eigen::Index m = w.rows(), n = w.cols();
  Tensor theta(m, n == 1 ? 1 : n - 1);
  Eigen::RowVectorXd lambda(m), r(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::VectorXd wi = w.row(i).transpose();
    const double norm = wi.norm();
    if (!(norm >= 1e-30)) throw DegenerateWeight("gmp_from_sp: zero weight row " + std::to_string(i));
    if (n == 1) {
      theta(i, 0) = wi[0] > 0.0 ? 0.0 : kPi;
    } else {
      theta.row(i) = angles_from_direction<double>(wi).angles().transpose();
    }
    lambda[i] = b[i] / norm;
    r[i] = norm;
  }
  return make_gmp(std::move(theta), lambda, r, n);
}

ParamSet init_params(const LayerSpec& spec, InitScheme scheme, std::mt19937_64& rng) {
  spec.validate();
  const Eigen::Index n = spec.fan_in, m = spec.fan_out;
  const bool gmp_scheme = scheme == InitScheme::gmp_default || scheme == InitScheme::gmp_uniform_angles;
  if (gmp_scheme != (spec.kind == LayerKind::GMP)) {
    throw ConfigError("init scheme " + to_string(scheme) + " is incompatible with layer kind " + to_string(spec.kind));
  }

  if (spec.kind == LayerKind::GMP) {
    Tensor theta(m, n == 1 ? 1 : n - 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (n == 1) {
        theta(i, 0) = normal(rng) >= 0.0 ? 0.0 : kPi;
      } else if (scheme == InitScheme::gmp_default) {
        Eigen::VectorXd g(n);
        do {
          for (Eigen::Index k = 0; k < n; ++k) g[k] = normal(rng);
        } while (g.norm() == 0.0);
        theta.row(i) = angles_from_direction<double>(g).angles().transpose();
      } else {
        for (Eigen::Index k = 0; k < n - 2; ++k) theta(i, k) = kPi * unit(rng);
        theta(i, n - 2) = 2.0 * kPi * unit(rng);
      }
    }
    return make_gmp(std::move(theta), Eigen::RowVectorXd::Zero(m), Eigen::RowVectorXd::Ones(m), n,
                    spec.post_norm == PostNorm::IMN);
  }

  const double stddev = scheme == InitScheme::he ? std::sqrt(2.0 / double(n)) : std::sqrt(2.0 / double(n + m));
  Tensor w = gaussian(m, n, stddev, rng);
  switch (spec.kind) {
    case LayerKind::SP:
      return make_sp(std::move(w), Eigen::RowVectorXd::Zero(m));
    case LayerKind::WN: {
      Eigen::RowVectorXd l = w.rowwise().norm().transpose();
      return make_wn(std::move(w), l, Eigen::RowVectorXd::Zero(m), spec.post_norm == PostNorm::MBN);
    }
    case LayerKind::BN_SP:
      return make_bn(std::move(w), Eigen::RowVectorXd::Zero(m), Eigen::RowVectorXd::Ones(m),
                     Eigen::RowVectorXd::Zero(m));
    case LayerKind::GMP:
      break;
  }
  throw ConfigError("unreachable layer kind");
}

Var unit_vectors(Var theta, Eigen::Index fan_in) {
  if (fan_in == 1) {
    if (theta.cols() != 1) throw ShapeError("unit_vectors: 1-D units need one angle column");
    return cos(theta);
  }
  if (theta.cols() != fan_in - 1) throw ShapeError("unit_vectors: theta must have fan_in - 1 columns");
  const Var s = sin(theta);
  const Var c = cos(theta);
  std::vector<Var> columns;
  columns.reserve(std::size_t(fan_in));
  Var prefix;
  for (Eigen::Index k = 0; k < fan_in - 1; ++k) {
    const Var ck = slice_cols(c, k, 1);
    const Var sk = slice_cols(s, k, 1);
    columns.push_back(prefix.valid() ? mul(prefix, ck) : ck);
    prefix = prefix.valid() ? mul(prefix, sk) : sk;
  }
  columns.push_back(prefix);
  return concat(columns, 1);
}

Var mean_only_bn(Tape& tape, Var pre, Mode mode, const Eigen::RowVectorXd& running_mean) {
  if (mode == Mode::train) {
    if (pre.rows() < 1) throw BatchTooSmall("mean-only batch norm needs a nonempty batch");
    return broadcast_add_row(pre, scale(reduce_mean(pre, 0), -1.0));
  }
  if (running_mean.size() != pre.cols()) throw ShapeError("mean_only_bn: running mean size mismatch");
  return broadcast_add_row(pre, tape.constant(row(-running_mean)));
}

Eigen::RowVectorXd compute_input_mean(const Tensor& x) {
  if (x.rows() < 1) throw BatchTooSmall("input mean of an empty batch");
  return x.colwise().mean();
}

void update_running(Tensor& running, Tensor& count, const Eigen::RowVectorXd& batch, double decay) {
  blend_running(running, batch, count(0, 0) == 0.0, decay);
  count(0, 0) += 1.0;
}

Var forward_layer(Tape& tape, const LayerSpec& spec, ParamSet& params, std::span<const Var> slot_vars, Var x,
                  Mode mode, const NormConfig& norm, BatchStats* stats) {
  require_input(spec, x.value());
  if (slot_vars.size() != params.slots().size()) throw ShapeError("forward_layer: one variable per slot required");
  if (params.kind() != spec.kind) throw ConfigError("forward_layer: parameters do not match layer kind");
  auto var = [&](std::string_view name) { return slot_vars[std::size_t(slot_index(params, name))]; };
  const Eigen::Index batch = x.rows();

  switch (spec.kind) {
    case LayerKind::SP: {
      const Var s = broadcast_add_row(matmul(x, transpose(var("W"))), var("b"));
      return activate(s, spec.activation);
    }
    case LayerKind::WN: {
      const Tensor& v = params["V"];
      const Eigen::VectorXd norms = v.rowwise().norm();
      if (!(norms.minCoeff() > 1e-30)) throw DegenerateWeight("WN direction row with zero norm");
      const Var inv_norm = reciprocal(transpose(sqrt(reduce_sum(square(var("V")), 1))));
      Var s = broadcast_mul_row(matmul(x, transpose(var("V"))), mul(var("l"), inv_norm));
      if (spec.post_norm == PostNorm::MBN) {
        const Eigen::RowVectorXd running = params["mbn_running_mean"];
        if (mode == Mode::train) {
          const Eigen::RowVectorXd batch_mean = s.value().colwise().mean();
          update_running(params["mbn_running_mean"], params["stat_count"], batch_mean, norm.decay);
          if (stats) *stats = BatchStats{batch_mean, Eigen::RowVectorXd::Zero(batch_mean.size()), batch};
        }
        s = mean_only_bn(tape, s, mode, running);
      }
      return activate(broadcast_add_row(s, var("b")), spec.activation);
    }
    case LayerKind::BN_SP: {
      const Var s = broadcast_add_row(matmul(x, transpose(var("W"))), var("b"));
      Var normalized;
      if (mode == Mode::train) {
        if (batch < 2) throw BatchTooSmall("batch norm in train mode needs batch size >= 2, got " + std::to_string(batch));
        const Var mean = reduce_mean(s, 0);
        const Var variance = reduce_var(s, 0, true);
        const Var inv_std = reciprocal(sqrt(add_scalar(variance, norm.bn_epsilon)));
        normalized = broadcast_mul_row(broadcast_add_row(s, scale(mean, -1.0)), inv_std);
        const Eigen::RowVectorXd bm = mean.value().row(0);
        const Eigen::RowVectorXd bv = variance.value().row(0);
        Tensor& count = params["stat_count"];
        blend_running(params["running_mean"], bm, count(0, 0) == 0.0, norm.decay);
        blend_running(params["running_var"], bv, count(0, 0) == 0.0, norm.decay);
        count(0, 0) += 1.0;
        if (stats) *stats = BatchStats{bm, bv, batch};
      } else {
        const Eigen::RowVectorXd mean = params["running_mean"].row(0);
        const Eigen::RowVectorXd inv_std =
            (params["running_var"].row(0).array() + norm.bn_epsilon).rsqrt().matrix();
        normalized = broadcast_mul_row(broadcast_add_row(s, tape.constant(row(-mean))), tape.constant(row(inv_std)));
      }
      const Var out = broadcast_add_row(broadcast_mul_row(normalized, var("gamma")), var("beta"));
      return activate(out, spec.activation);
    }
    case LayerKind::GMP: {
      Var centered = x;
      if (spec.post_norm == PostNorm::IMN) {
        if (mode == Mode::train) {
          const Var mean = reduce_mean(x, 0);
          update_running(params["imn_running_mean"], params["stat_count"], mean.value().row(0), norm.decay);
          centered = broadcast_add_row(x, scale(mean, -1.0));
        } else {
          const Eigen::RowVectorXd mean = params["imn_running_mean"].row(0);
          centered = broadcast_add_row(x, tape.constant(row(-mean)));
        }
      }
      const Var u = unit_vectors(var("theta"), spec.fan_in);
      const Var s = broadcast_add_row(matmul(centered, transpose(u)), var("lambda"));
      return broadcast_mul_row(activate(s, spec.activation), var("r"));
    }
  }
  throw ConfigError("unreachable layer kind");
}

Tensor forward_sp(const ParamSet& params, const Tensor& x, Activation g) {
  if (params.kind() != LayerKind::SP) throw ConfigError("forward_sp: not an SP parameter set");
  Tape tape;
  ParamSet copy = params;
  const LayerSpec spec = spec_of(params, params["W"].cols(), g);
  require_input(spec, x);
  const auto vars = bind_constants(tape, copy);
  return forward_layer(tape, spec, copy, vars, tape.constant(x), Mode::eval).value();
}

Tensor forward_wn(const ParamSet& params, const Tensor& x, Activation g) {
  if (params.kind() != LayerKind::WN) throw ConfigError("forward_wn: not a WN parameter set");
  Tape tape;
  ParamSet copy = params;
  LayerSpec spec = spec_of(params, params["V"].cols(), g);
  spec.post_norm = PostNorm::none;
  const auto vars = bind_constants(tape, copy);
  return forward_layer(tape, spec, copy, vars, tape.constant(x), Mode::eval).value();
}

std::pair<Tensor, BatchStats> forward_bn(ParamSet& params, const Tensor& x, Mode mode, Activation g,
                                         const NormConfig& norm) {
  if (params.kind() != LayerKind::BN_SP) throw ConfigError("forward_bn: not a BN parameter set");
  Tape tape;
  const LayerSpec spec = spec_of(params, params["W"].cols(), g);
  const auto vars = bind_constants(tape, params);
  BatchStats stats;
  const Var out = forward_layer(tape, spec, params, vars, tape.constant(x), mode, norm, &stats);
  if (mode == Mode::eval) {
    stats = BatchStats{params["running_mean"].row(0), params["running_var"].row(0), x.rows()};
  }
  return {out.value(), stats};
}

Tensor forward_gmp(const ParamSet& params, const Tensor& x, const std::optional<Eigen::RowVectorXd>& input_mean,
                   Activation g) {
  if (params.kind() != LayerKind::GMP) throw ConfigError("forward_gmp: not a GMP parameter set");
  const Eigen::Index theta_cols = params["theta"].cols();
  const Eigen::Index fan_in = x.cols();
  if (!(theta_cols == fan_in - 1 || (fan_in == 1 && theta_cols == 1))) {
    throw ShapeError("forward_gmp: input has " + std::to_string(fan_in) + " features but theta has " +
                     std::to_string(theta_cols) + " columns");
  }
  Tape tape;
  ParamSet copy = params;
  LayerSpec spec = spec_of(params, fan_in, g);
  spec.post_norm = PostNorm::none;
  const auto vars = bind_constants(tape, copy);
  Tensor centered = x;
  if (input_mean) {
    if (input_mean->size() != fan_in) throw ShapeError("forward_gmp: input mean size mismatch");
    centered = x.rowwise() - *input_mean;
  }
  return forward_layer(tape, spec, copy, vars, tape.constant(centered), Mode::eval).value();
}

Tensor forward_mbn(const Tensor& pre, Mode mode, const Eigen::RowVectorXd& running_mean) {
  Tape tape;
  return mean_only_bn(tape, tape.constant(pre), mode, running_mean).value();
}

}  // namespace geoparam
