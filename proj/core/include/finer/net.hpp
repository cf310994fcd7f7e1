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
#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finer/common.hpp"

namespace finer {

enum class LayerKind { kDense, kConv1d, kRelu, kGlobalMaxPool, kSigmoidHead };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

// One layer of the stack. `units` applies to dense layers, `channels` and
// `kernel` to conv1d. Input and output shapes are resolved when the model is
// assembled; a conv1d maps (L, C_in) to (L - kernel + 1, channels) and a dense
// layer flattens its input.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t units = 0;
  std::size_t channels = 0;
  std::size_t kernel = 0;
  Shape in;
  Shape out;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Dense weights are (units x in.size()); conv1d weights are
// (channels x kernel*in.cols) with each row laid out as [tap][in_channel].
struct Layer {
  LayerSpec spec;
  Matrix weights;
  std::vector<double> bias;
  bool frozen = false;

  bool has_params() const {
    return spec.kind == LayerKind::kDense || spec.kind == LayerKind::kConv1d;
  }
};

struct ForwardTrace {
  double output = 0.0;
  std::vector<Matrix> activations;  // activations[i] is the output of layer i
};

struct ParamGrads {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> bias;

  void zero();
};

// Sequential network mapping an input matrix to [0, 1], ending in a single sigmoid head.
// Inference is const and safe to call concurrently.
class Model {
 public:
  Model() = default;

  // Builds the stack and draws weights uniformly in +-1/sqrt(fan_in).
  static Model create(Shape input, std::vector<LayerSpec> specs, std::uint64_t seed);
  // Assembles a model from explicit parameters; validates every tensor shape.
  static Model from_layers(Shape input, std::vector<Layer> layers);

  Shape input_shape() const { return input_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  void set_frozen(std::size_t layer, bool frozen);
  void freeze_all(bool frozen);
  bool any_trainable() const;

  ForwardTrace forward(const Matrix& x) const;
  double predict(const Matrix& x) const;
  int predict_label(const Matrix& x) const;
  // Input of the sigmoid head.
  double logit(const Matrix& x) const;

  // d f(x) / d x for the positive class.
  Matrix input_gradient(const Matrix& x) const;

  // Accumulates weight * d CE(f(x), label) / d theta into `grads`. Returns the
  // example's unweighted cross entropy.
  double accumulate_param_grads(const Matrix& x, int label, double weight,
                                ParamGrads& grads) const;

  ParamGrads zero_grads() const;

  friend bool operator==(const Model& a, const Model& b);

 private:
  void check_input(const Matrix& x) const;

  Shape input_;
  std::vector<Layer> layers_;
};

// Single-layer primitives, shared with the layer-wise attribution rules.
Matrix layer_forward(const Layer& layer, const Matrix& in);
// Transpose of a dense/conv1d layer's linear map applied to `grad_out`.
Matrix linear_backward(const Layer& layer, const Matrix& grad_out);

// Threshold convention for the binary label.
inline constexpr double kLabelThreshold = 0.5;
inline int label_from_probability(double p) { return p >= kLabelThreshold ? 1 : 0; }

double sigmoid(double z);
// Cross entropy of a sigmoid output computed from its logit.
double cross_entropy_from_logit(double z, int label);

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 20;
  std::uint64_t seed = 0;
  double momentum = 0.9;

  void validate() const;
};

struct WeightedExample {
  const Matrix* input = nullptr;
  int label = 0;
  double weight = 1.0;
};

// Momentum SGD over the unfrozen layers. Holds exclusive access to the model
// for its lifetime.
class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& cfg);

  // One optimizer step on sum_i weight_i * CE_i; returns that loss.
  double step(std::span<const WeightedExample> batch);

 private:
  Model& model_;
  TrainConfig cfg_;
  ParamGrads velocity_;
  ParamGrads grads_;
};

// Deterministic per-epoch mini-batch order over n items.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t n, std::size_t batch_size, std::uint64_t seed);
  std::vector<std::vector<std::size_t>> next_epoch();
  std::size_t batches_per_epoch() const;

 private:
  std::size_t n_;
  std::size_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
};

struct LabeledSet {
  std::vector<Matrix> inputs;
  std::vector<int> labels;
  double weight = 1.0;
};

// Minimizes weight_0 * CE(primary) + sum_s weight_s * CE(aux_s), with every
// auxiliary set split evenly across the primary set's batches. Sets with zero
// weight are skipped entirely.
Model fit(Model model, const LabeledSet& primary, const TrainConfig& cfg,
          std::span<const LabeledSet> aux = {});

double accuracy(const Model& model, std::span<const Matrix> inputs, std::span<const int> labels);

// Text checkpoint: format version, input shape, layer specs, parameters.
std::string save_checkpoint(const Model& model);
Model load_checkpoint(std::string_view text);

}  // namespace finer
