#pragma once

// Dense ReLU layers under four parameterizations.
//
//   SP     z = g(W x + b)
//   WN     z = g(l * (v / |v|)^T x + b)              optional mean-only BN
//   BN_SP  z = g(gamma * (s - mean s) / sqrt(var s + eps) + beta),  s = W x + b
//   GMP    z = r * g(u(theta)^T (x - mu) + lambda)   mu = input mean under IMN
//
// Parameters live in a ParamSet: an ordered list of named slots. Trainable
// slots are optimized; the others hold running statistics or frozen values.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "geoparam/autodiff.hpp"

namespace geoparam {

enum class LayerKind { SP, WN, BN_SP, GMP };
enum class PostNorm { none, MBN, IMN };
enum class Activation { relu, identity };
enum class Mode { train, eval };
enum class InitScheme { he, glorot, gmp_default, gmp_uniform_angles };

std::string to_string(LayerKind kind);
std::string to_string(PostNorm norm);
std::string to_string(InitScheme scheme);

struct LayerSpec {
  Eigen::Index fan_in = 0;
  Eigen::Index fan_out = 0;
  LayerKind kind = LayerKind::SP;
  PostNorm post_norm = PostNorm::none;
  Activation activation = Activation::relu;

  /// Throws ConfigError on invalid sizes or parameterization pairings.
  void validate() const;
};

struct NormConfig {
  double bn_epsilon = 1e-5;
  /// Weight kept by running statistics: running = decay * running + (1 - decay) * batch.
  double decay = 0.9;
};

struct ParamSlot {
  std::string name;
  Tensor value;
  bool trainable = true;
};

class ParamSet {
 public:
  ParamSet() = default;
  explicit ParamSet(LayerKind kind) : kind_(kind) {}

  LayerKind kind() const { return kind_; }

  void add(std::string name, Tensor value, bool trainable);
  bool contains(std::string_view name) const;
  Tensor& operator[](std::string_view name);
  const Tensor& operator[](std::string_view name) const;

  std::vector<ParamSlot>& slots() { return slots_; }
  const std::vector<ParamSlot>& slots() const { return slots_; }

  /// Number of trainable scalars.
  Eigen::Index trainable_count() const;

 private:
  LayerKind kind_ = LayerKind::SP;
  std::vector<ParamSlot> slots_;
};

struct BatchStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd var;
  Eigen::Index batch_size = 0;
};

/// Draws initial parameters. gmp_default samples each direction uniformly on
/// the sphere and sets lambda = 0, r = 1; gmp_uniform_angles draws every
/// angle uniformly over its canonical interval instead.
ParamSet init_params(const LayerSpec& spec, InitScheme scheme, std::mt19937_64& rng);

/// Unit directions u(theta) of all rows of an m x (n-1) angle matrix, as m x n.
/// For n = 1 the single angle column maps to cos(theta).
Var unit_vectors(Var theta, Eigen::Index fan_in);

/// Records one layer on `tape`. `slot_vars[i]` is the tape variable of
/// `params.slots()[i]`. Train mode refreshes running statistics in `params`.
/// `stats` receives batch statistics for BN and MBN layers in train mode.
Var forward_layer(Tape& tape, const LayerSpec& spec, ParamSet& params, std::span<const Var> slot_vars, Var x,
                  Mode mode, const NormConfig& norm = {}, BatchStats* stats = nullptr);

/// Subtracts the batch mean (train) or `running_mean` (eval) of pre-activations.
Var mean_only_bn(Tape& tape, Var pre, Mode mode, const Eigen::RowVectorXd& running_mean);

/// Column means of a batch.
Eigen::RowVectorXd compute_input_mean(const Tensor& x);

/// running <- batch on the first update, then running <- decay * running + (1 - decay) * batch.
void update_running(Tensor& running, Tensor& count, const Eigen::RowVectorXd& batch, double decay);

// Tensor-in, tensor-out evaluations of single layers.
Tensor forward_sp(const ParamSet& params, const Tensor& x, Activation g = Activation::relu);
Tensor forward_wn(const ParamSet& params, const Tensor& x, Activation g = Activation::relu);
std::pair<Tensor, BatchStats> forward_bn(ParamSet& params, const Tensor& x, Mode mode,
                                         Activation g = Activation::relu, const NormConfig& norm = {});
Tensor forward_gmp(const ParamSet& params, const Tensor& x, const std::optional<Eigen::RowVectorXd>& input_mean,
                   Activation g = Activation::relu);
Tensor forward_mbn(const Tensor& pre, Mode mode, const Eigen::RowVectorXd& running_mean);

// Parameter sets from explicit values; rows of W / V are units.
ParamSet make_sp(Tensor w, Eigen::RowVectorXd b);
ParamSet make_wn(Tensor v, Eigen::RowVectorXd l, Eigen::RowVectorXd b, bool mean_only_bn = false);
ParamSet make_bn(Tensor w, Eigen::RowVectorXd b, Eigen::RowVectorXd gamma, Eigen::RowVectorXd beta);
ParamSet make_gmp(Tensor theta, Eigen::RowVectorXd lambda, Eigen::RowVectorXd r, Eigen::Index fan_in,
                  bool input_mean_norm = false);

/// The GmP parameters realizing the same function as a standard unit:
/// r = |w|, lambda = b / |w|, theta from w / |w|.
ParamSet gmp_from_sp(const Tensor& w, const Eigen::RowVectorXd& b);

}  // namespace geoparam
