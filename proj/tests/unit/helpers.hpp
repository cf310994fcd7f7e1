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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "finer/common.hpp"
#include "finer/ic.hpp"
#include "finer/net.hpp"
#include "finer/task.hpp"

namespace finer::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Matrix m(rows, cols);
  for (auto& v : m.data) v = d(rng);
  return m;
}

inline LayerSpec spec(LayerKind kind, std::size_t units = 0, std::size_t channels = 0, std::size_t kernel = 0) {
  LayerSpec s;
  s.kind = kind;
  s.units = units;
  s.channels = channels;
  s.kernel = kernel;
  return s;
}

inline Model small_cnn(std::size_t rows, std::size_t cols, std::uint64_t seed, std::size_t channels = 4,
                       std::size_t kernel = 3) {
  return Model::create({rows, cols},
                       {spec(LayerKind::kConv1d, 0, channels, kernel), spec(LayerKind::kRelu),
                        spec(LayerKind::kGlobalMaxPool), spec(LayerKind::kDense, 1),
                        spec(LayerKind::kSigmoidHead)},
                       seed);
}

inline Model deep_cnn(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  return Model::create({rows, cols},
                       {spec(LayerKind::kConv1d, 0, 5, 2), spec(LayerKind::kRelu), spec(LayerKind::kConv1d, 0, 3, 2),
                        spec(LayerKind::kRelu), spec(LayerKind::kGlobalMaxPool), spec(LayerKind::kDense, 4),
                        spec(LayerKind::kRelu), spec(LayerKind::kDense, 1), spec(LayerKind::kSigmoidHead)},
                       seed);
}

inline Model small_mlp(std::size_t rows, std::size_t cols, std::uint64_t seed, std::size_t hidden = 6) {
  return Model::create({rows, cols},
                       {spec(LayerKind::kDense, hidden), spec(LayerKind::kRelu), spec(LayerKind::kDense, 1),
                        spec(LayerKind::kSigmoidHead)},
                       seed);
}

// sigmoid(w . x + b) with explicit weights.
inline Model logistic_model(std::size_t rows, std::size_t cols, const std::vector<double>& w, double b) {
  Layer dense;
  dense.spec = spec(LayerKind::kDense, 1);
  dense.weights = Matrix(1, rows * cols);
  dense.weights.data = w;
  dense.bias = {b};
  Layer head;
  head.spec = spec(LayerKind::kSigmoidHead);
  return Model::from_layers({rows, cols}, {dense, head});
}

inline TaskSpec tiny_spec(std::uint64_t seed = 11) {
  TaskSpec t;
  t.train_benign = 30;
  t.train_risk = 30;
  t.test_benign = 10;
  t.test_risk = 10;
  t.max_len = 96;
  t.embed_dim = 4;
  t.ics_per_sample = {3, 8};
  t.seed = seed;
  t.embedding_seed = seed + 1;
  return t;
}

inline double l2(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i] / n;
    mb += b[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// Central finite-difference gradient of model.predict.
inline Matrix fd_gradient(const Model& model, const Matrix& x, double h = 1e-6) {
  Matrix g(x.rows, x.cols);
  Matrix xp = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = xp.data[i];
    xp.data[i] = orig + h;
    const double up = model.predict(xp);
    xp.data[i] = orig - h;
    const double down = model.predict(xp);
    xp.data[i] = orig;
    g.data[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return l2(d) / std::max({l2(a), l2(b), 1e-12});
}

// Places each IC by its token span in the flat sequence, clipped to the
// row budget.
ICIndicator span_oracle(const ProblemSample& x, std::size_t rows, std::size_t cols) {
  ICIndicator ind;
  ind.rows = rows;
  ind.cols = cols;
  ind.cells.assign(rows * cols, kNoIC);
  const FeatureRep f = extract_features(x);
  for (std::size_t i = 0; i < x.ics.size(); ++i) {
    const Span s = f.ic_spans[i];
    const std::size_t end = std::min(s.start + s.length, rows);
    if (s.start >= end) continue;
    const int idx = static_cast<int>(ind.ics.size());
    for (std::size_t r = s.start; r < end; ++r)
      for (std::size_t c = 0; c < cols; ++c) ind.cells[r * cols + c] = idx;
    ind.ics.push_back({i, x.ics[i].name, s.start, end - s.start});
  }
  return ind;
}

// Small generated dataset with a briefly trained classifier.
struct TrainedTask {
  TaskSpec spec = tiny_spec(13);
  Dataset data = generate_dataset(spec);
  Vectorizer vectorizer{spec};
  BaselineSet pool;
  std::vector<PreparedSample> train;
  std::vector<PreparedSample> test;
  Model model;

  TrainedTask() {
    std::vector<ProblemSample> benign;
    for (const auto& s : data.train)
      if (s.label == 0) benign.push_back(s);
    pool = BaselineSet::from_samples(benign);
    train = prepare_samples(data.train, vectorizer);
    test = prepare_samples(data.test, vectorizer);
    LabeledSet set;
    for (const auto& p : train) {
      set.inputs.push_back(p.xv.matrix);
      set.labels.push_back(p.sample.label);
    }
    TrainConfig cfg;
    cfg.max_epochs = 15;
    cfg.batch_size = 8;
    cfg.seed = 1;
    model = fit(small_cnn(spec.max_len, spec.embed_dim, 2, 8, 3), set, cfg);
  }

  std::vector<const PreparedSample*> predicted_risk() const {
    std::vector<const PreparedSample*> out;
    for (const auto* split : {&train, &test})
      for (const auto& p : *split)
        if (model.predict_label(p.xv.matrix) == 1) out.push_back(&p);
    return out;
  }
};

}  // namespace finer::testing
