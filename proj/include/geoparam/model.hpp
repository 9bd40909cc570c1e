#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "geoparam/autodiff.hpp"
#include "geoparam/layers.hpp"

namespace geoparam {

enum class LossKind { mse, softmax_ce };

/// Hidden-layer parameterizations selectable from the command line.
enum class Parameterization { sp, wn, wn_mbn, bn, gmp, gmp_imn };

std::string to_string(Parameterization p);
/// Accepts sp, wn, wn-mbn, bn, gmp, gmp-imn. Throws ConfigError otherwise.
Parameterization parse_parameterization(const std::string& name);

struct MlpSpec {
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::mse;
  std::uint64_t seed = 0;
  NormConfig norm;

  void validate() const;
};

/// input -> hidden... -> output MLP. IMN is applied to GmP layers after the
/// first; MBN to every WN layer. The output layer is a linear SP layer.
MlpSpec make_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index output_dim,
                 Parameterization p, LossKind loss, std::uint64_t seed = 0);

struct InitOptions {
  InitScheme dense = InitScheme::he;
  InitScheme gmp = InitScheme::gmp_default;
};

struct Model {
  MlpSpec spec;
  std::vector<ParamSet> params;
};

Model build(const MlpSpec& spec, const InitOptions& init, std::mt19937_64& rng);

/// Trainable scalar count across all layers.
Eigen::Index parameter_count(const Model& model);

/// Handle on a trainable tensor, named "layer<i>.<slot>".
struct ParamRef {
  std::string name;
  Tensor* value = nullptr;
};

std::vector<ParamRef> trainable_slots(Model& model);

/// A recorded forward pass. Owns the tape its variables point into.
class ForwardPass {
 public:
  ForwardPass() = default;

  Var output() const { return output_; }
  Var loss() const { return loss_; }
  double loss_value() const { return loss_.value()(0, 0); }

  /// Runs backward once; gradients come back in `trainable_slots` order.
  std::vector<Tensor> trainable_gradients();

 private:
  friend ForwardPass loss_forward(Model&, const Tensor&, const Tensor&, Mode);
  friend ForwardPass record_output(Model&, const Tensor&, Mode);

  std::unique_ptr<Tape> tape_;
  Var output_;
  Var loss_;
  std::vector<Var> trainable_vars_;
};

/// Composes all layers and the configured loss on one tape. For softmax_ce
/// `y` holds integer class labels in a single column.
ForwardPass loss_forward(Model& model, const Tensor& x, const Tensor& y, Mode mode);

/// Trainable tensors in `trainable_slots` order.
std::vector<Tensor> trainable_values(const Model& model);

/// The loss as a function of the trainable tensors, for gradient_check.
/// Works on a private copy of `model`, so running statistics never change.
RecordedFunction loss_function(const Model& model, const Tensor& x, const Tensor& y, Mode mode);

/// Eval-mode network output using running statistics.
Tensor predict(const Model& model, const Tensor& x);

std::vector<int> labels_of(const Tensor& y);
double rmse(const Tensor& pred, const Tensor& target);
double accuracy(const Tensor& logits, const Tensor& labels);

}  // namespace geoparam
