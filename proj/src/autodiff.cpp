#include "geoparam/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "geoparam/error.hpp"

namespace geoparam {

namespace {

Tape& same_tape(Var a, Var b, const char* op) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw ShapeError(std::string(op) + ": operands must be recorded on the same tape");
  }
  return *a.tape();
}

Tape& tape_of(Var a, const char* op) {
  if (!a.valid()) throw ShapeError(std::string(op) + ": invalid variable");
  return *a.tape();
}

std::string dims(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + dims(a) + " vs " + dims(b));
  }
}

void require_row(const Tensor& a, const Tensor& row, const char* op) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError(std::string(op) + ": expected 1x" + std::to_string(a.cols()) + " row, got " + dims(row));
  }
}

void require_axis(int axis, const char* op) {
  if (axis != 0 && axis != 1) throw ShapeError(std::string(op) + ": axis must be 0 or 1");
}

template <typename F>
Var unary(Var a, const char* op, Tensor value, F&& local_grad) {
  Tape& tape = tape_of(a, op);
  const std::size_t ia = a.id();
  return tape.record(op, std::move(value), {ia},
                     [ia, g = std::forward<F>(local_grad)](const Tensor& adj, std::vector<Tensor>& adjoints) {
                       accumulate(adjoints, ia, g(adj));
                     });
}

}  // namespace

std::vector<Eigen::Index> shape(const Tensor& t) { return {t.rows(), t.cols()}; }

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw ShapeError("value of an unbound variable");
  return tape_->value(id_);
}

const Tensor& Gradients::operator[](Var v) const {
  const std::size_t id = v.id();
  if (id < adjoints_.size() && adjoints_[id].size() > 0) return adjoints_[id];
  return zeros_.at(id);
}

void accumulate(std::vector<Tensor>& adjoints, std::size_t id, const Tensor& delta) {
  Tensor& slot = adjoints[id];
  if (slot.size() == 0) {
    slot = delta;
  } else {
    slot += delta;
  }
}

Var Tape::leaf(Tensor value) {
  if (!value.allFinite()) throw NumericError("leaf: non-finite input");
  nodes_.push_back(Node{std::move(value), {}, {}, "leaf", true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  if (!value.allFinite()) throw NumericError("constant: non-finite input");
  nodes_.push_back(Node{std::move(value), {}, {}, "constant", false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> operands, BackwardFn backward) {
  if (!value.allFinite()) throw NumericError(std::string(op) + ": non-finite result");
  bool needs = false;
  for (std::size_t id : operands) {
    if (id >= nodes_.size()) throw ShapeError(std::string(op) + ": operand recorded after its consumer");
    needs = needs || nodes_[id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), std::move(operands), needs ? std::move(backward) : BackwardFn{}, op, needs});
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this) throw ShapeError("backward: loss belongs to another tape");
  const Tensor& lv = nodes_[loss.id()].value;
  if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward: loss must be scalar, got " + dims(lv));
  if (swept_) throw Error("backward: tape already swept; record a new forward pass");
  swept_ = true;

  std::vector<Tensor> adjoints(nodes_.size());
  adjoints[loss.id()] = Tensor::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (adjoints[i].size() == 0 || !node.backward) continue;
    node.backward(adjoints[i], adjoints);
  }
  std::vector<Tensor> zeros(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (adjoints[i].size() == 0) zeros[i] = Tensor::Zero(nodes_[i].value.rows(), nodes_[i].value.cols());
  }
  return Gradients(std::move(adjoints), std::move(zeros));
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) throw ShapeError("matmul: inner dimensions " + dims(av) + " * " + dims(bv));
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("matmul", av * bv, {ia, ib}, [ia, ib, &tape](const Tensor& adj, std::vector<Tensor>& adjoints) {
    if (tape.requires_grad(ia)) accumulate(adjoints, ia, adj * tape.value(ib).transpose());
    if (tape.requires_grad(ib)) accumulate(adjoints, ib, tape.value(ia).transpose() * adj);
  });
}

Var transpose(Var a) {
  return unary(a, "transpose", a.value().transpose(), [](const Tensor& adj) -> Tensor { return adj.transpose(); });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("add", a.value() + b.value(), {ia, ib}, [ia, ib](const Tensor& adj, std::vector<Tensor>& adjoints) {
    accumulate(adjoints, ia, adj);
    accumulate(adjoints, ib, adj);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("sub", a.value() - b.value(), {ia, ib}, [ia, ib](const Tensor& adj, std::vector<Tensor>& adjoints) {
    accumulate(adjoints, ia, adj);
    accumulate(adjoints, ib, -adj);
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  const std::size_t ia = a.id(), ib = b.id();
  return tape.record("mul", a.value().cwiseProduct(b.value()), {ia, ib},
                     [ia, ib, &tape](const Tensor& adj, std::vector<Tensor>& adjoints) {
                       if (tape.requires_grad(ia)) accumulate(adjoints, ia, adj.cwiseProduct(tape.value(ib)));
                       if (tape.requires_grad(ib)) accumulate(adjoints, ib, adj.cwiseProduct(tape.value(ia)));
                     });
}

Var broadcast_add_row(Var a, Var row) {
  Tape& tape = same_tape(a, row, "broadcast_add_row");
  require_row(a.value(), row.value(), "broadcast_add_row");
  Tensor out = a.value().rowwise() + row.value().row(0);
  const std::size_t ia = a.id(), ir = row.id();
  return tape.record("broadcast_add_row", std::move(out), {ia, ir},
                     [ia, ir](const Tensor& adj, std::vector<Tensor>& adjoints) {
                       accumulate(adjoints, ia, adj);
                       accumulate(adjoints, ir, adj.colwise().sum());
                     });
}

Var broadcast_mul_row(Var a, Var row) {
  Tape& tape = same_tape(a, row, "broadcast_mul_row");
  require_row(a.value(), row.value(), "broadcast_mul_row");
  Tensor out = a.value().array().rowwise() * row.value().row(0).array();
  const std::size_t ia = a.id(), ir = row.id();
  return tape.record("broadcast_mul_row", std::move(out), {ia, ir},
                     [ia, ir, &tape](const Tensor& adj, std::vector<Tensor>& adjoints) {
                       const Tensor& av = tape.value(ia);
                       const Tensor& rv = tape.value(ir);
                       if (tape.requires_grad(ia)) {
                         Tensor da = adj.array().rowwise() * rv.row(0).array();
                         accumulate(adjoints, ia, da);
                       }
                       if (tape.requires_grad(ir)) accumulate(adjoints, ir, adj.cwiseProduct(av).colwise().sum());
                     });
}

Var relu(Var a) {
  const Tensor& av = a.value();
  const Tensor mask = (av.array() > 0.0).cast<double>().matrix();
  return unary(a, "relu", av.cwiseMax(0.0), [mask](const Tensor& adj) -> Tensor { return adj.cwiseProduct(mask); });
}

Var sin(Var a) {
  const Tensor c = a.value().array().cos().matrix();
  return unary(a, "sin", a.value().array().sin().matrix(),
               [c](const Tensor& adj) -> Tensor { return adj.cwiseProduct(c); });
}

Var cos(Var a) {
  const Tensor s = a.value().array().sin().matrix();
  return unary(a, "cos", a.value().array().cos().matrix(),
               [s](const Tensor& adj) -> Tensor { return -adj.cwiseProduct(s); });
}

Var sqrt(Var a) {
  if ((a.value().array() < 0.0).any()) throw NumericError("sqrt: negative operand");
  Tensor out = a.value().array().sqrt().matrix();
  Tensor half_inv = (0.5 / out.array()).matrix();
  return unary(a, "sqrt", std::move(out), [half_inv](const Tensor& adj) -> Tensor { return adj.cwiseProduct(half_inv); });
}

Var square(Var a) {
  const Tensor twice = 2.0 * a.value();
  return unary(a, "square", a.value().array().square().matrix(),
               [twice](const Tensor& adj) -> Tensor { return adj.cwiseProduct(twice); });
}

Var reciprocal(Var a) {
  Tensor out = a.value().array().inverse().matrix();
  Tensor neg_sq = (-out.array().square()).matrix();
  return unary(a, "reciprocal", std::move(out), [neg_sq](const Tensor& adj) -> Tensor { return adj.cwiseProduct(neg_sq); });
}

Var scale(Var a, double factor) {
  return unary(a, "scale", factor * a.value(), [factor](const Tensor& adj) -> Tensor { return factor * adj; });
}

Var add_scalar(Var a, double offset) {
  return unary(a, "add_scalar", (a.value().array() + offset).matrix(), [](const Tensor& adj) -> Tensor { return adj; });
}

Var reduce_sum(Var a, int axis) {
  require_axis(axis, "reduce_sum");
  const Eigen::Index r = a.rows(), c = a.cols();
  if (axis == 0) {
    return unary(a, "reduce_sum", a.value().colwise().sum(),
                 [r](const Tensor& adj) -> Tensor { return adj.replicate(r, 1); });
  }
  return unary(a, "reduce_sum", a.value().rowwise().sum(),
               [c](const Tensor& adj) -> Tensor { return adj.replicate(1, c); });
}

Var reduce_mean(Var a, int axis) {
  require_axis(axis, "reduce_mean");
  const Eigen::Index n = axis == 0 ? a.rows() : a.cols();
  if (n == 0) throw ShapeError("reduce_mean: empty axis");
  return scale(reduce_sum(a, axis), 1.0 / double(n));
}

Var reduce_var(Var a, int axis, bool biased) {
  require_axis(axis, "reduce_var");
  const Tensor& av = a.value();
  const Eigen::Index n = axis == 0 ? av.rows() : av.cols();
  const double denom = biased ? double(n) : double(n) - 1.0;
  if (denom <= 0.0) throw ShapeError("reduce_var: not enough elements along axis");
  Tensor centered;
  Tensor out;
  if (axis == 0) {
    centered = av.rowwise() - av.colwise().mean();
    out = centered.array().square().colwise().sum() / denom;
  } else {
    centered = av.colwise() - av.rowwise().mean();
    out = centered.array().square().rowwise().sum() / denom;
  }
  // d var / d a_k = 2 (a_k - mean) / denom; the mean term sums to zero.
  return unary(a, "reduce_var", std::move(out), [centered, denom, axis](const Tensor& adj) -> Tensor {
    if (axis == 0) return (centered.array().rowwise() * adj.row(0).array()).matrix() * (2.0 / denom);
    return (centered.array().colwise() * adj.col(0).array()).matrix() * (2.0 / denom);
  });
}

Var sum_all(Var a) {
  const Eigen::Index r = a.rows(), c = a.cols();
  Tensor out(1, 1);
  out(0, 0) = a.value().sum();
  return unary(a, "sum_all", std::move(out), [r, c](const Tensor& adj) -> Tensor { return Tensor::Constant(r, c, adj(0, 0)); });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  const Tensor& av = a.value();
  if (begin < 0 || count < 0 || begin + count > av.cols()) {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                     ") outside " + dims(av));
  }
  const Eigen::Index r = av.rows(), c = av.cols();
  return unary(a, "slice_cols", av.middleCols(begin, count), [r, c, begin, count](const Tensor& adj) -> Tensor {
    Tensor full = Tensor::Zero(r, c);
    full.middleCols(begin, count) = adj;
    return full;
  });
}

Var concat(std::span<const Var> parts, int axis) {
  require_axis(axis, "concat");
  if (parts.empty()) throw ShapeError("concat: no operands");
  Tape& tape = tape_of(parts[0], "concat");
  Eigen::Index rows = 0, cols = 0;
  std::vector<std::size_t> ids;
  std::vector<Eigen::Index> extents;
  for (const Var& p : parts) {
    same_tape(parts[0], p, "concat");
    const Tensor& v = p.value();
    if (axis == 0) {
      if (!ids.empty() && v.cols() != cols) throw ShapeError("concat: column count mismatch");
      cols = v.cols();
      rows += v.rows();
      extents.push_back(v.rows());
    } else {
      if (!ids.empty() && v.rows() != rows) throw ShapeError("concat: row count mismatch");
      rows = v.rows();
      cols += v.cols();
      extents.push_back(v.cols());
    }
    ids.push_back(p.id());
  }
  Tensor out(rows, cols);
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    if (axis == 0) {
      out.middleRows(offset, extents[k]) = parts[k].value();
    } else {
      out.middleCols(offset, extents[k]) = parts[k].value();
    }
    offset += extents[k];
  }
  std::vector<std::size_t> operands = ids;
  return tape.record("concat", std::move(out), std::move(operands),
                     [ids, extents, axis](const Tensor& adj, std::vector<Tensor>& adjoints) {
                       Eigen::Index off = 0;
                       for (std::size_t k = 0; k < ids.size(); ++k) {
                         if (axis == 0) {
                           accumulate(adjoints, ids[k], adj.middleRows(off, extents[k]));
                         } else {
                           accumulate(adjoints, ids[k], adj.middleCols(off, extents[k]));
                         }
                         off += extents[k];
                       }
                     });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& z = logits.value();
  const Eigen::Index n = z.rows(), k = z.cols();
  if (Eigen::Index(labels.size()) != n) throw ShapeError("softmax_cross_entropy: label count != batch size");
  if (n == 0) throw ShapeError("softmax_cross_entropy: empty batch");
  Tensor probs(n, k);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[std::size_t(i)];
    if (y < 0 || y >= k) throw ShapeError("softmax_cross_entropy: label " + std::to_string(y) + " out of range");
    const double zmax = z.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (z.row(i).array() - zmax).exp().matrix();
    const double s = e.sum();
    probs.row(i) = e / s;
    loss += std::log(s) + zmax - z(i, y);
  }
  Tensor out(1, 1);
  out(0, 0) = loss / double(n);
  std::vector<int> ys(labels.begin(), labels.end());
  return unary(logits, "softmax_cross_entropy", std::move(out),
               [probs = std::move(probs), ys = std::move(ys), n](const Tensor& adj) -> Tensor {
                 Tensor g = probs;
                 for (Eigen::Index i = 0; i < n; ++i) g(i, ys[std::size_t(i)]) -= 1.0;
                 return g * (adj(0, 0) / double(n));
               });
}

Var mse(Var pred, Var target) {
  Tape& tape = same_tape(pred, target, "mse");
  require_same_shape(pred.value(), target.value(), "mse");
  const Tensor diff = pred.value() - target.value();
  const double count = double(diff.size());
  if (count == 0.0) throw ShapeError("mse: empty operands");
  Tensor out(1, 1);
  out(0, 0) = diff.squaredNorm() / count;
  const std::size_t ip = pred.id(), it = target.id();
  return tape.record("mse", std::move(out), {ip, it}, [ip, it, diff, count](const Tensor& adj, std::vector<Tensor>& adjoints) {
    const Tensor g = diff * (2.0 * adj(0, 0) / count);
    accumulate(adjoints, ip, g);
    accumulate(adjoints, it, -g);
  });
}

GradientCheckReport gradient_check(const RecordedFunction& f, std::vector<Tensor> params, double step, double tol) {
  if (!(step > 0.0)) throw Error("gradient_check: step must be positive");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.leaf(p));
    const Var loss = f(tape, leaves);
    const Gradients g = tape.backward(loss);
    for (const Var& v : leaves) analytic.push_back(g[v]);
  }

  auto evaluate = [&]() {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.constant(p));
    return f(tape, leaves).value()(0, 0);
  };

  GradientCheckReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index i = 0; i < params[p].size(); ++i) {
      double& x = params[p].data()[i];
      const double saved = x;
      x = saved + step;
      const double up = evaluate();
      x = saved - step;
      const double down = evaluate();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[p].data()[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
      ++report.checked;
      if (rel > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = rel;
        report.worst_param = p;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace geoparam
