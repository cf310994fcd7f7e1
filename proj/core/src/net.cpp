/*
 * Copyright 2026 The FINER Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "finer/net.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace finer {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kGlobalMaxPool: return "global-max-pool";
    case LayerKind::kSigmoidHead: return "sigmoid-head";
  }
  return "unknown";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (auto k : {LayerKind::kDense, LayerKind::kConv1d, LayerKind::kRelu,
                 LayerKind::kGlobalMaxPool, LayerKind::kSigmoidHead}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double cross_entropy_from_logit(double z, int label) {
  // softplus(z) - label * z, stable for large |z|
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - (label == 1 ? z : 0.0);
}

void ParamGrads::zero() {
  for (auto& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
  for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
}

namespace {

std::string layer_name(std::size_t i, const LayerSpec& spec) {
  return "layer " + std::to_string(i) + " (" + std::string(to_string(spec.kind)) + ")";
}

// Resolves in/out shapes and checks stack invariants.
void resolve_shapes(Shape input, std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw ShapeError("model has no layers");
  Shape cur = input;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto& s = specs[i];
    s.in = cur;
    switch (s.kind) {
      case LayerKind::kDense:
        if (s.units == 0) throw ShapeError(layer_name(i, s) + ": units must be >= 1");
        s.out = {1, s.units};
        break;
      case LayerKind::kConv1d:
        if (s.kernel == 0 || s.channels == 0)
          throw ShapeError(layer_name(i, s) + ": kernel and channels must be >= 1");
        if (cur.rows < s.kernel)
          throw ShapeError(layer_name(i, s) + ": input length " + std::to_string(cur.rows) +
                           " shorter than kernel " + std::to_string(s.kernel));
        s.out = {cur.rows - s.kernel + 1, s.channels};
        break;
      case LayerKind::kRelu:
        s.out = cur;
        break;
      case LayerKind::kGlobalMaxPool:
        if (cur.rows == 0) throw ShapeError(layer_name(i, s) + ": empty input");
        s.out = {1, cur.cols};
        break;
      case LayerKind::kSigmoidHead:
        if (i + 1 != specs.size())
          throw ShapeError(layer_name(i, s) + ": sigmoid head must be the last layer");
        if (cur.size() != 1)
          throw ShapeError(layer_name(i, s) + ": sigmoid head expects a single logit, got " +
                           std::to_string(cur.size()));
        s.out = {1, 1};
        break;
    }
    cur = s.out;
  }
  if (specs.back().kind != LayerKind::kSigmoidHead)
    throw ShapeError("model must end with a sigmoid head");
}

Shape param_shape(const LayerSpec& s) {
  if (s.kind == LayerKind::kDense) return {s.units, s.in.size()};
  if (s.kind == LayerKind::kConv1d) return {s.channels, s.kernel * s.in.cols};
  return {0, 0};
}

}  // namespace

Model Model::create(Shape input, std::vector<LayerSpec> specs, std::uint64_t seed) {
  resolve_shapes(input, specs);
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  layers.reserve(specs.size());
  for (auto& s : specs) {
    Layer layer;
    layer.spec = s;
    const Shape ps = param_shape(s);
    if (ps.rows > 0) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(ps.cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      layer.weights = Matrix(ps.rows, ps.cols);
      for (auto& w : layer.weights.data) w = dist(rng);
      layer.bias.resize(ps.rows);
      for (auto& b : layer.bias) b = dist(rng);
    }
    layers.push_back(std::move(layer));
  }
  Model m;
  m.input_ = input;
  m.layers_ = std::move(layers);
  return m;
}

Model Model::from_layers(Shape input, std::vector<Layer> layers) {
  std::vector<LayerSpec> specs;
  for (const auto& l : layers) specs.push_back(l.spec);
  resolve_shapes(input, specs);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    if (l.spec != specs[i]) l.spec = specs[i];
    const Shape ps = param_shape(l.spec);
    if (l.weights.rows != ps.rows || l.weights.cols != ps.cols || l.bias.size() != ps.rows)
      throw ShapeError(layer_name(i, l.spec) + ": parameter shape mismatch");
  }
  Model m;
  m.input_ = input;
  m.layers_ = std::move(layers);
  return m;
}

void Model::set_frozen(std::size_t layer, bool frozen) { layers_.at(layer).frozen = frozen; }

void Model::freeze_all(bool frozen) {
  for (auto& l : layers_) l.frozen = frozen;
}

bool Model::any_trainable() const {
  return std::any_of(layers_.begin(), layers_.end(),
                     [](const Layer& l) { return l.has_params() && !l.frozen; });
}

bool operator==(const Model& a, const Model& b) {
  if (a.input_ != b.input_ || a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& x = a.layers_[i];
    const auto& y = b.layers_[i];
    if (x.spec != y.spec || x.weights != y.weights || x.bias != y.bias || x.frozen != y.frozen)
      return false;
  }
  return true;
}

void Model::check_input(const Matrix& x) const {
  if (x.rows != input_.rows || x.cols != input_.cols) {
    throw ShapeError("layer 0 (" + std::string(to_string(layers_.front().spec.kind)) +
                     "): expected input " + std::to_string(input_.rows) + "x" +
                     std::to_string(input_.cols) + ", got " + std::to_string(x.rows) + "x" +
                     std::to_string(x.cols));
  }
}

Matrix layer_forward(const Layer& layer, const Matrix& in) {
  const auto& s = layer.spec;
  Matrix out(s.out.rows, s.out.cols);
  switch (s.kind) {
    case LayerKind::kDense: {
      const std::size_t n = in.size();
      for (std::size_t o = 0; o < s.units; ++o) {
        const double* w = layer.weights.data.data() + o * n;
        double acc = layer.bias[o];
        for (std::size_t j = 0; j < n; ++j) acc += w[j] * in.data[j];
        out.data[o] = acc;
      }
      break;
    }
    case LayerKind::kConv1d: {
      // A window of `kernel` consecutive rows is contiguous in memory.
      const std::size_t span = s.kernel * s.in.cols;
      for (std::size_t t = 0; t < s.out.rows; ++t) {
        const double* x = in.data.data() + t * s.in.cols;
        double* y = out.data.data() + t * s.channels;
        for (std::size_t o = 0; o < s.channels; ++o) {
          const double* w = layer.weights.data.data() + o * span;
          double acc = layer.bias[o];
          for (std::size_t j = 0; j < span; ++j) acc += w[j] * x[j];
          y[o] = acc;
        }
      }
      break;
    }
    case LayerKind::kRelu:
      for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = in.data[i] > 0 ? in.data[i] : 0.0;
      break;
    case LayerKind::kGlobalMaxPool:
      for (std::size_t c = 0; c < in.cols; ++c) {
        double best = in(0, c);
        for (std::size_t r = 1; r < in.rows; ++r) best = std::max(best, in(r, c));
        out.data[c] = best;
      }
      break;
    case LayerKind::kSigmoidHead:
      out.data[0] = sigmoid(in.data[0]);
      break;
  }
  return out;
}

Matrix linear_backward(const Layer& layer, const Matrix& grad_out) {
  const auto& s = layer.spec;
  Matrix grad_in(s.in.rows, s.in.cols);
  if (s.kind == LayerKind::kDense) {
    const std::size_t n = s.in.size();
    for (std::size_t o = 0; o < s.units; ++o) {
      const double g = grad_out.data[o];
      if (g == 0.0) continue;
      const double* w = layer.weights.data.data() + o * n;
      for (std::size_t j = 0; j < n; ++j) grad_in.data[j] += g * w[j];
    }
  } else if (s.kind == LayerKind::kConv1d) {
    const std::size_t span = s.kernel * s.in.cols;
    for (std::size_t t = 0; t < s.out.rows; ++t) {
      double* gx = grad_in.data.data() + t * s.in.cols;
      for (std::size_t o = 0; o < s.channels; ++o) {
        const double g = grad_out(t, o);
        if (g == 0.0) continue;
        const double* w = layer.weights.data.data() + o * span;
        for (std::size_t j = 0; j < span; ++j) gx[j] += g * w[j];
      }
    }
  } else {
    throw ShapeError("linear_backward on non-linear layer " + std::string(to_string(s.kind)));
  }
  return grad_in;
}

namespace {

void accumulate_linear_param_grads(const Layer& layer, const Matrix& in, const Matrix& grad_out,
                                   Matrix& gw, std::vector<double>& gb) {
  const auto& s = layer.spec;
  if (s.kind == LayerKind::kDense) {
    const std::size_t n = in.size();
    for (std::size_t o = 0; o < s.units; ++o) {
      const double g = grad_out.data[o];
      gb[o] += g;
      if (g == 0.0) continue;
      double* w = gw.data.data() + o * n;
      for (std::size_t j = 0; j < n; ++j) w[j] += g * in.data[j];
    }
  } else {
    const std::size_t span = s.kernel * s.in.cols;
    for (std::size_t t = 0; t < s.out.rows; ++t) {
      const double* x = in.data.data() + t * s.in.cols;
      for (std::size_t o = 0; o < s.channels; ++o) {
        const double g = grad_out(t, o);
        gb[o] += g;
        if (g == 0.0) continue;
        double* w = gw.data.data() + o * span;
        for (std::size_t j = 0; j < span; ++j) w[j] += g * x[j];
      }
    }
  }
}

// Plain gradient rule for the piecewise-linear layers.
Matrix nonlinear_backward(const Layer& layer, const Matrix& in, const Matrix& grad_out) {
  const auto& s = layer.spec;
  Matrix grad_in(s.in.rows, s.in.cols);
  if (s.kind == LayerKind::kRelu) {
    for (std::size_t i = 0; i < in.size(); ++i)
      grad_in.data[i] = in.data[i] > 0 ? grad_out.data[i] : 0.0;
  } else if (s.kind == LayerKind::kGlobalMaxPool) {
    // Ties route to the first maximal row.
    for (std::size_t c = 0; c < in.cols; ++c) {
      std::size_t arg = 0;
      for (std::size_t r = 1; r < in.rows; ++r)
        if (in(r, c) > in(arg, c)) arg = r;
      grad_in(arg, c) = grad_out.data[c];
    }
  } else {
    throw ShapeError("no gradient rule for " + std::string(to_string(s.kind)));
  }
  return grad_in;
}

}  // namespace

ForwardTrace Model::forward(const Matrix& x) const {
  check_input(x);
  ForwardTrace trace;
  trace.activations.reserve(layers_.size());
  const Matrix* cur = &x;
  for (const auto& layer : layers_) {
    trace.activations.push_back(layer_forward(layer, *cur));
    cur = &trace.activations.back();
  }
  trace.output = trace.activations.back().data[0];
  return trace;
}

double Model::predict(const Matrix& x) const {
  check_input(x);
  Matrix a = layer_forward(layers_.front(), x);
  for (std::size_t i = 1; i < layers_.size(); ++i) a = layer_forward(layers_[i], a);
  return a.data[0];
}

double Model::logit(const Matrix& x) const {
  check_input(x);
  Matrix a = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) a = layer_forward(layers_[i], a);
  return a.data[0];
}

int Model::predict_label(const Matrix& x) const { return label_from_probability(predict(x)); }

namespace {

// Backpropagates `grad` (w.r.t. the output of layer `top`) down to the input,
// optionally accumulating parameter gradients.
Matrix backprop(const std::vector<Layer>& layers, const Matrix& x, const ForwardTrace& trace,
                std::size_t top, Matrix grad, ParamGrads* grads) {
  for (std::size_t li = top + 1; li-- > 0;) {
    const Layer& layer = layers[li];
    const Matrix& in = li == 0 ? x : trace.activations[li - 1];
    if (layer.has_params()) {
      if (grads != nullptr && !layer.frozen)
        accumulate_linear_param_grads(layer, in, grad, grads->weights[li], grads->bias[li]);
      if (li == 0 && grads != nullptr) break;
      grad = linear_backward(layer, grad);
    } else {
      grad = nonlinear_backward(layer, in, grad);
    }
  }
  return grad;
}

}  // namespace

Matrix Model::input_gradient(const Matrix& x) const {
  ForwardTrace trace = forward(x);
  const double p = trace.output;
  Matrix g(1, 1, p * (1.0 - p));  // d sigmoid / d logit
  return backprop(layers_, x, trace, layers_.size() - 2, std::move(g), nullptr);
}

double Model::accumulate_param_grads(const Matrix& x, int label, double weight,
                                     ParamGrads& grads) const {
  ForwardTrace trace = forward(x);
  const double z = trace.activations[layers_.size() - 2].data[0];
  Matrix g(1, 1, weight * (sigmoid(z) - static_cast<double>(label)));
  backprop(layers_, x, trace, layers_.size() - 2, std::move(g), &grads);
  return cross_entropy_from_logit(z, label);
}

ParamGrads Model::zero_grads() const {
  ParamGrads g;
  for (const auto& l : layers_) {
    g.weights.emplace_back(l.weights.rows, l.weights.cols);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
}

Trainer::Trainer(Model& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), velocity_(model.zero_grads()), grads_(model.zero_grads()) {
  cfg_.validate();
}

double Trainer::step(std::span<const WeightedExample> batch) {
  grads_.zero();
  double loss = 0.0;
  for (const auto& ex : batch) {
    if (ex.weight == 0.0) continue;
    loss += ex.weight * model_.accumulate_param_grads(*ex.input, ex.label, ex.weight, grads_);
  }
  if (!std::isfinite(loss)) return loss;
  auto& layers = model_.layers();
  for (std::size_t li = 0; li < layers.size(); ++li) {
    auto& layer = layers[li];
    if (!layer.has_params() || layer.frozen) continue;
    auto update = [&](std::vector<double>& param, std::vector<double>& vel,
                      const std::vector<double>& grad) {
      for (std::size_t i = 0; i < param.size(); ++i) {
        vel[i] = cfg_.momentum * vel[i] - cfg_.learning_rate * grad[i];
        param[i] += vel[i];
      }
    };
    update(layer.weights.data, velocity_.weights[li].data, grads_.weights[li].data);
    update(layer.bias, velocity_.bias[li], grads_.bias[li]);
  }
  return loss;
}

BatchSchedule::BatchSchedule(std::size_t n, std::size_t batch_size, std::uint64_t seed)
    : n_(n), batch_size_(std::max<std::size_t>(1, batch_size)), rng_(seed), order_(n) {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
}

std::size_t BatchSchedule::batches_per_epoch() const {
  return (n_ + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchSchedule::next_epoch() {
  std::shuffle(order_.begin(), order_.end(), rng_);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < n_; i += batch_size_) {
    batches.emplace_back(order_.begin() + static_cast<std::ptrdiff_t>(i),
                         order_.begin() + static_cast<std::ptrdiff_t>(std::min(n_, i + batch_size_)));
  }
  return batches;
}

Model fit(Model model, const LabeledSet& primary, const TrainConfig& cfg,
          std::span<const LabeledSet> aux) {
  cfg.validate();
  if (primary.inputs.size() != primary.labels.size())
    throw DataError("fit: inputs and labels differ in length");
  if (!model.any_trainable()) return model;

  Trainer trainer(model, cfg);
  BatchSchedule schedule(primary.inputs.size(), cfg.batch_size, derive_seed(cfg.seed, "shuffle"));
  std::vector<BatchSchedule> aux_schedules;
  for (std::size_t s = 0; s < aux.size(); ++s)
    aux_schedules.emplace_back(aux[s].inputs.size(), std::max<std::size_t>(1, aux[s].inputs.size()),
                               derive_seed(cfg.seed, "aux" + std::to_string(s)));

  std::vector<WeightedExample> batch;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto batches = schedule.next_epoch();
    std::vector<std::vector<std::size_t>> aux_orders(aux.size());
    for (std::size_t s = 0; s < aux.size(); ++s) {
      if (aux[s].weight == 0.0 || aux[s].inputs.empty()) continue;
      aux_orders[s] = aux_schedules[s].next_epoch().front();
    }
    for (std::size_t b = 0; b < batches.size(); ++b) {
      batch.clear();
      const double w0 = primary.weight / static_cast<double>(batches[b].size());
      for (auto i : batches[b]) batch.push_back({&primary.inputs[i], primary.labels[i], w0});
      for (std::size_t s = 0; s < aux.size(); ++s) {
        if (aux_orders[s].empty()) continue;
        const std::size_t len = aux_orders[s].size();
        const std::size_t lo = b * len / batches.size();
        const std::size_t hi = (b + 1) * len / batches.size();
        if (hi == lo) continue;
        const double w = aux[s].weight / static_cast<double>(hi - lo);
        for (std::size_t j = lo; j < hi; ++j) {
          const auto i = aux_orders[s][j];
          batch.push_back({&aux[s].inputs[i], aux[s].labels[i], w});
        }
      }
      const double loss = trainer.step(batch);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(b));
      }
    }
  }
  return model;
}

double accuracy(const Model& model, std::span<const Matrix> inputs, std::span<const int> labels) {
  if (inputs.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    hits += model.predict_label(inputs[i]) == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(inputs.size());
}

}  // namespace finer
