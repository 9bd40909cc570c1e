#pragma once

// Reverse-mode differentiation over dense float64 matrices.
//
// A Tape records primitive applications in execution order. Every primitive
// stores its forward value and a closure that pushes the output adjoint back
// to its operands. Rank is at most two: scalars are 1x1 and row vectors 1xm.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace geoparam {

using Tensor = Eigen::MatrixXd;

/// Shape of a tensor as {rows, cols}.
std::vector<Eigen::Index> shape(const Tensor& t);

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Adjoints indexed by node; nodes never reached read as zero.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor> adjoints, std::vector<Tensor> zeros)
      : adjoints_(std::move(adjoints)), zeros_(std::move(zeros)) {}

  const Tensor& operator[](Var v) const;

 private:
  std::vector<Tensor> adjoints_;
  std::vector<Tensor> zeros_;
};

class Tape {
 public:
  /// Receives the output adjoint and the adjoint buffer of the whole tape.
  using BackwardFn = std::function<void(const Tensor& adjoint, std::vector<Tensor>& adjoints)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Var leaf(Tensor value);
  /// Input that never receives a gradient.
  Var constant(Tensor value);

  /// Appends a node. `op` names it in numeric errors. The value must be finite.
  Var record(const char* op, Tensor value, std::vector<std::size_t> operands, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape once in reverse.
  Gradients backward(Var loss);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> operands;
    BackwardFn backward;
    const char* op;
    bool requires_grad;
  };

  std::vector<Node> nodes_;
  bool swept_ = false;
};

/// Adds `delta` into `adjoints[id]`, creating the slot on first use.
void accumulate(std::vector<Tensor>& adjoints, std::size_t id, const Tensor& delta);

// Primitives. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
/// a (r x c) plus a 1 x c row broadcast over rows.
Var broadcast_add_row(Var a, Var row);
/// a (r x c) times a 1 x c row broadcast over rows.
Var broadcast_mul_row(Var a, Var row);
Var relu(Var a);
Var sin(Var a);
Var cos(Var a);
Var sqrt(Var a);
Var square(Var a);
Var reciprocal(Var a);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
/// axis 0 reduces rows (result 1 x c); axis 1 reduces columns (result r x 1).
Var reduce_sum(Var a, int axis);
Var reduce_mean(Var a, int axis);
/// Variance along an axis; `biased` divides by N, otherwise by N - 1.
Var reduce_var(Var a, int axis, bool biased);
Var sum_all(Var a);
/// Columns [begin, begin + count).
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
/// axis 0 stacks rows; axis 1 stacks columns.
Var concat(std::span<const Var> parts, int axis);
/// Mean over the batch of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const int> labels);
/// Mean of squared differences over all entries.
Var mse(Var pred, Var target);

struct GradientCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  Eigen::Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Builds a scalar loss from leaf variables created for `params`.
using RecordedFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares backward() with central differences for every parameter entry.
///
/// The relative error of one entry is |a - n| / max(|a|, |n|, 1e-3). The whole
/// function is re-recorded for each perturbation, so batch-coupled graphs are
/// handled correctly.
GradientCheckReport gradient_check(const RecordedFunction& f, std::vector<Tensor> params, double step,
                                   double tol);

}  // namespace geoparam
