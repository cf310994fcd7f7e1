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
#include <doctest.h>

#include "finer/net.hpp"
#include "helpers.hpp"

using namespace finer;
using namespace finer::testing;

TEST_CASE("input gradient agrees with central differences") {
  for (std::uint64_t s = 0; s < 12; ++s) {
    const Model m = s % 3 == 0 ? small_cnn(10, 3, s) : s % 3 == 1 ? deep_cnn(9, 2, s) : small_mlp(5, 3, s);
    const Matrix x = random_matrix(m.input_shape().rows, m.input_shape().cols, 100 + s);
    CHECK(relative_error(m.input_gradient(x).data, fd_gradient(m, x).data) < 1e-4);
  }
}

TEST_CASE("parameter gradients agree with central differences of the cross entropy") {
  Model m = deep_cnn(8, 3, 5);
  const Matrix x = random_matrix(8, 3, 6);
  for (int label : {0, 1}) {
    ParamGrads g = m.zero_grads();
    m.accumulate_param_grads(x, label, 1.0, g);
    const double h = 1e-6;
    for (std::size_t li = 0; li < m.layers().size(); ++li) {
      if (!m.layers()[li].has_params()) continue;
      auto& w = m.layers()[li].weights.data;
      for (std::size_t i = 0; i < w.size(); i += 3) {
        const double orig = w[i];
        w[i] = orig + h;
        const double up = cross_entropy_from_logit(m.logit(x), label);
        w[i] = orig - h;
        const double down = cross_entropy_from_logit(m.logit(x), label);
        w[i] = orig;
        CHECK(g.weights[li].data[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1.0));
      }
      auto& b = m.layers()[li].bias;
      for (std::size_t i = 0; i < b.size(); ++i) {
        const double orig = b[i];
        b[i] = orig + h;
        const double up = cross_entropy_from_logit(m.logit(x), label);
        b[i] = orig - h;
        const double down = cross_entropy_from_logit(m.logit(x), label);
        b[i] = orig;
        CHECK(g.bias[li][i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1.0));
      }
    }
  }
}

TEST_CASE("forward pass of a logistic model has the closed form") {
  const std::vector<double> w = {0.5, -1.0, 2.0, 0.25};
  const Model m = logistic_model(2, 2, w, 0.1);
  Matrix x(2, 2);
  x.data = {1.0, 2.0, -0.5, 4.0};
  const double z = 0.5 * 1.0 - 1.0 * 2.0 + 2.0 * -0.5 + 0.25 * 4.0 + 0.1;
  CHECK(m.predict(x) == doctest::Approx(1.0 / (1.0 + std::exp(-z))).epsilon(1e-15));
  CHECK(m.logit(x) == doctest::Approx(z).epsilon(1e-15));
  CHECK(m.predict_label(x) == (z >= 0 ? 1 : 0));
}

TEST_CASE("wrong input shape is rejected") {
  const Model m = small_cnn(10, 3, 1);
  CHECK_THROWS_AS(m.predict(Matrix(9, 3)), ShapeError);
  CHECK_THROWS_AS(small_cnn(2, 3, 1), ShapeError);
}

TEST_CASE("model must end in a sigmoid head") {
  CHECK_THROWS_AS(Model::create({4, 2}, {spec(LayerKind::kDense, 1)}, 1), ShapeError);
}

TEST_CASE("cross entropy from the logit is stable at extreme logits") {
  CHECK(cross_entropy_from_logit(800.0, 1) == doctest::Approx(0.0));
  CHECK(cross_entropy_from_logit(800.0, 0) == doctest::Approx(800.0));
  CHECK(cross_entropy_from_logit(-800.0, 1) == doctest::Approx(800.0));
  CHECK(cross_entropy_from_logit(0.0, 1) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("checkpoint round trip preserves parameters and predictions bit for bit") {
  Model m = deep_cnn(9, 2, 3);
  m.set_frozen(0, true);
  const Model back = load_checkpoint(save_checkpoint(m));
  CHECK(back == m);
  const Matrix x = random_matrix(9, 2, 4);
  CHECK(back.predict(x) == m.predict(x));
  CHECK(back.layers()[0].frozen);
}

TEST_CASE("malformed checkpoints raise data errors") {
  CHECK_THROWS_AS(load_checkpoint("not json"), DataError);
  CHECK_THROWS_AS(load_checkpoint(R"({"format":"other"})"), DataError);
  std::string text = save_checkpoint(small_mlp(3, 2, 1));
  text.replace(text.find("\"weights\""), 9, "\"weightz\"");
  CHECK_THROWS_AS(load_checkpoint(text), DataError);
}

namespace {

LabeledSet toy_set(std::size_t n, std::uint64_t seed) {
  LabeledSet s;
  for (std::size_t i = 0; i < n; ++i) {
    Matrix x = random_matrix(6, 2, seed + i);
    s.labels.push_back(x(2, 0) + x(3, 1) > 0 ? 1 : 0);
    s.inputs.push_back(std::move(x));
  }
  return s;
}

}  // namespace

TEST_CASE("training is deterministic and reduces the loss") {
  const LabeledSet data = toy_set(80, 10);
  TrainConfig cfg;
  cfg.max_epochs = 15;
  cfg.seed = 3;
  const Model init = small_mlp(6, 2, 2);
  const Model a = fit(init, data, cfg);
  const Model b = fit(init, data, cfg);
  CHECK(a == b);
  auto mean_loss = [&](const Model& m) {
    double s = 0;
    for (std::size_t i = 0; i < data.inputs.size(); ++i) s += cross_entropy_from_logit(m.logit(data.inputs[i]), data.labels[i]);
    return s / static_cast<double>(data.inputs.size());
  };
  CHECK(mean_loss(a) < mean_loss(init));
  CHECK(accuracy(a, data.inputs, data.labels) > 0.8);
}

TEST_CASE("frozen layers keep their parameters") {
  const LabeledSet data = toy_set(40, 20);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  Model init = small_mlp(6, 2, 2);
  init.set_frozen(0, true);
  const Model out = fit(init, data, cfg);
  CHECK(out.layers()[0].weights == init.layers()[0].weights);
  CHECK(out.layers()[0].bias == init.layers()[0].bias);
  CHECK(out.layers()[2].weights != init.layers()[2].weights);
  init.freeze_all(true);
  CHECK(fit(init, data, cfg) == init);
}

TEST_CASE("zero-weight auxiliary sets leave training unchanged") {
  const LabeledSet data = toy_set(40, 30);
  LabeledSet aux = toy_set(10, 99);
  aux.weight = 0.0;
  TrainConfig cfg;
  cfg.max_epochs = 3;
  const Model init = small_mlp(6, 2, 4);
  const std::vector<LabeledSet> auxes = {aux};
  CHECK(fit(init, data, cfg, auxes) == fit(init, data, cfg));
  aux.weight = 1.0;
  const std::vector<LabeledSet> active = {aux};
  CHECK_FALSE(fit(init, data, cfg, active) == fit(init, data, cfg));
}

TEST_CASE("batch schedule covers every item once per epoch") {
  BatchSchedule s(23, 5, 7);
  CHECK(s.batches_per_epoch() == 5);
  for (int e = 0; e < 3; ++e) {
    std::vector<int> seen(23, 0);
    for (const auto& b : s.next_epoch())
      for (auto i : b) seen[i]++;
    for (int c : seen) CHECK(c == 1);
  }
}

TEST_CASE("invalid training configs are rejected") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("layer kinds round trip through their names") {
  for (auto k : {LayerKind::kDense, LayerKind::kConv1d, LayerKind::kRelu, LayerKind::kGlobalMaxPool,
                 LayerKind::kSigmoidHead})
    CHECK(parse_layer_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_layer_kind("lstm"), ConfigError);
}
