#include "geoparam/model.hpp"

#include <cmath>
#include <functional>

#include "geoparam/error.hpp"

namespace geoparam {

std::string to_string(Parameterization p) {
  switch (p) {
    case Parameterization::sp: return "sp";
    case Parameterization::wn: return "wn";
    case Parameterization::wn_mbn: return "wn-mbn";
    case Parameterization::bn: return "bn";
    case Parameterization::gmp: return "gmp";
    case Parameterization::gmp_imn: return "gmp-imn";
  }
  return "?";
}

Parameterization parse_parameterization(const std::string& name) {
  for (Parameterization p : {Parameterization::sp, Parameterization::wn, Parameterization::wn_mbn,
                             Parameterization::bn, Parameterization::gmp, Parameterization::gmp_imn}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("unknown parameterization '" + name + "' (expected sp|wn|wn-mbn|bn|gmp|gmp-imn)");
}

void MlpSpec::validate() const {
  if (layers.empty()) throw ConfigError("MLP needs at least an output layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].validate();
    if (i > 0 && layers[i].fan_in != layers[i - 1].fan_out) {
      throw ConfigError("layer " + std::to_string(i) + " fan_in does not match previous fan_out");
    }
  }
  const LayerSpec& out = layers.back();
  if (out.kind != LayerKind::SP || out.activation != Activation::identity || out.post_norm != PostNorm::none) {
    throw ConfigError("the output layer must be a plain SP layer with identity activation");
  }
  if (loss == LossKind::softmax_ce && out.fan_out < 2) throw ConfigError("softmax_ce needs at least two outputs");
}

MlpSpec make_mlp(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index output_dim,
                 Parameterization p, LossKind loss, std::uint64_t seed) {
  MlpSpec spec;
  spec.loss = loss;
  spec.seed = seed;
  Eigen::Index fan_in = input_dim;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    LayerSpec layer;
    layer.fan_in = fan_in;
    layer.fan_out = hidden[i];
    layer.activation = Activation::relu;
    switch (p) {
      case Parameterization::sp: layer.kind = LayerKind::SP; break;
      case Parameterization::wn: layer.kind = LayerKind::WN; break;
      case Parameterization::wn_mbn:
        layer.kind = LayerKind::WN;
        layer.post_norm = PostNorm::MBN;
        break;
      case Parameterization::bn: layer.kind = LayerKind::BN_SP; break;
      case Parameterization::gmp: layer.kind = LayerKind::GMP; break;
      case Parameterization::gmp_imn:
        layer.kind = LayerKind::GMP;
        if (i > 0) layer.post_norm = PostNorm::IMN;
        break;
    }
    spec.layers.push_back(layer);
    fan_in = hidden[i];
  }
  spec.layers.push_back(LayerSpec{fan_in, output_dim, LayerKind::SP, PostNorm::none, Activation::identity});
  spec.validate();
  return spec;
}

Model build(const MlpSpec& spec, const InitOptions& init, std::mt19937_64& rng) {
  spec.validate();
  Model model;
  model.spec = spec;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const bool is_output = i + 1 == spec.layers.size();
    InitScheme scheme = layer.kind == LayerKind::GMP ? init.gmp : init.dense;
    if (is_output) scheme = InitScheme::he;
    model.params.push_back(init_params(layer, scheme, rng));
  }
  return model;
}

Eigen::Index parameter_count(const Model& model) {
  Eigen::Index n = 0;
  for (const ParamSet& p : model.params) n += p.trainable_count();
  return n;
}

std::vector<ParamRef> trainable_slots(Model& model) {
  std::vector<ParamRef> refs;
  for (std::size_t l = 0; l < model.params.size(); ++l) {
    for (ParamSlot& slot : model.params[l].slots()) {
      if (slot.trainable) refs.push_back(ParamRef{"layer" + std::to_string(l) + "." + slot.name, &slot.value});
    }
  }
  return refs;
}

std::vector<Tensor> ForwardPass::trainable_gradients() {
  if (!tape_ || !loss_.valid()) throw Error("trainable_gradients: no loss recorded");
  const Gradients g = tape_->backward(loss_);
  std::vector<Tensor> out;
  out.reserve(trainable_vars_.size());
  for (const Var& v : trainable_vars_) out.push_back(g[v]);
  return out;
}

namespace {

Var record_layers(Tape& tape, Model& model, Var h, Mode mode, const std::function<Var(const ParamSlot&)>& bind) {
  for (std::size_t l = 0; l < model.params.size(); ++l) {
    ParamSet& params = model.params[l];
    std::vector<Var> vars;
    for (const ParamSlot& slot : params.slots()) vars.push_back(bind(slot));
    h = forward_layer(tape, model.spec.layers[l], params, vars, h, mode, model.spec.norm);
  }
  return h;
}

Var record_loss(Tape& tape, const Model& model, Var output, const Tensor& y) {
  if (model.spec.loss == LossKind::mse) return mse(output, tape.constant(y));
  return softmax_cross_entropy(output, labels_of(y));
}

}  // namespace

ForwardPass record_output(Model& model, const Tensor& x, Mode mode) {
  ForwardPass pass;
  pass.tape_ = std::make_unique<Tape>();
  Tape& tape = *pass.tape_;
  pass.output_ = record_layers(tape, model, tape.constant(x), mode, [&](const ParamSlot& slot) {
    if (!slot.trainable) return tape.constant(slot.value);
    pass.trainable_vars_.push_back(tape.leaf(slot.value));
    return pass.trainable_vars_.back();
  });
  return pass;
}

ForwardPass loss_forward(Model& model, const Tensor& x, const Tensor& y, Mode mode) {
  if (x.rows() != y.rows()) throw ShapeError("loss_forward: inputs and targets differ in row count");
  ForwardPass pass = record_output(model, x, mode);
  pass.loss_ = record_loss(*pass.tape_, model, pass.output_, y);
  return pass;
}

std::vector<Tensor> trainable_values(const Model& model) {
  std::vector<Tensor> out;
  for (const ParamSet& p : model.params) {
    for (const ParamSlot& slot : p.slots()) {
      if (slot.trainable) out.push_back(slot.value);
    }
  }
  return out;
}

RecordedFunction loss_function(const Model& model, const Tensor& x, const Tensor& y, Mode mode) {
  if (x.rows() != y.rows()) throw ShapeError("loss_function: inputs and targets differ in row count");
  auto copy = std::make_shared<Model>(model);
  return [copy, x, y, mode](Tape& tape, std::span<const Var> params) {
    std::size_t next = 0;
    const Var out = record_layers(tape, *copy, tape.constant(x), mode, [&](const ParamSlot& slot) {
      if (!slot.trainable) return tape.constant(slot.value);
      if (next >= params.size()) throw ShapeError("loss_function: too few parameter variables");
      return params[next++];
    });
    if (next != params.size()) throw ShapeError("loss_function: too many parameter variables");
    return record_loss(tape, *copy, out, y);
  };
}

Tensor predict(const Model& model, const Tensor& x) {
  Model copy = model;
  return record_output(copy, x, Mode::eval).output().value();
}

std::vector<int> labels_of(const Tensor& y) {
  if (y.cols() != 1) throw ShapeError("labels must be a single column");
  std::vector<int> labels(std::size_t(y.rows()));
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double v = y(i, 0);
    if (v != std::floor(v) || v < 0.0) throw ShapeError("labels must be nonnegative integers");
    labels[std::size_t(i)] = int(v);
  }
  return labels;
}

double rmse(const Tensor& pred, const Tensor& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("rmse: shape mismatch");
  return std::sqrt((pred - target).squaredNorm() / double(pred.size()));
}

double accuracy(const Tensor& logits, const Tensor& labels) {
  const std::vector<int> y = labels_of(labels);
  if (Eigen::Index(y.size()) != logits.rows()) throw ShapeError("accuracy: label count mismatch");
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    if (arg == y[std::size_t(i)]) ++correct;
  }
  return double(correct) / double(logits.rows());
}

}  // namespace geoparam
