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
// Microbenchmarks for the network engine and the explainers on the default task.
#include <benchmark/benchmark.h>

#include <vector>

#include "finer/explainers.hpp"
#include "finer/ic.hpp"
#include "finer/net.hpp"
#include "finer/task.hpp"

namespace {

using namespace finer;

LayerSpec layer(LayerKind kind, std::size_t units = 0, std::size_t channels = 0, std::size_t kernel = 0) {
  LayerSpec s;
  s.kind = kind;
  s.units = units;
  s.channels = channels;
  s.kernel = kernel;
  return s;
}

struct Fixture {
  TaskSpec spec;
  Dataset data;
  Vectorizer vectorizer;
  BaselineSet pool;
  std::vector<PreparedSample> samples;
  Model model;

  Fixture() {
    spec.train_benign = 64;
    spec.train_risk = 64;
    spec.test_benign = 0;
    spec.test_risk = 0;
    data = generate_dataset(spec);
    vectorizer = Vectorizer(spec);
    std::vector<ProblemSample> benign;
    for (const auto& s : data.train)
      if (s.label == 0) benign.push_back(s);
    pool = BaselineSet::from_samples(benign);
    for (auto& p : prepare_samples(data.train, vectorizer))
      if (p.sample.label == 1) samples.push_back(std::move(p));
    model = Model::create({spec.max_len, spec.embed_dim},
                          {layer(LayerKind::kConv1d, 0, 16, 3), layer(LayerKind::kRelu), layer(LayerKind::kGlobalMaxPool),
                           layer(LayerKind::kDense, 1), layer(LayerKind::kSigmoidHead)},
                          7);
  }

  const PreparedSample& sample(std::size_t i) const { return samples[i % samples.size()]; }
  ICMasker masker(const PreparedSample& p) const { return ICMasker(p, vectorizer, pool, p.sample.id); }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Forward(benchmark::State& state) {
  const Fixture& f = fixture();
  const Matrix& x = f.sample(0).xv.matrix;
  for (auto _ : state) benchmark::DoNotOptimize(f.model.predict(x));
}
BENCHMARK(BM_Forward);

void BM_InputGradient(benchmark::State& state) {
  const Fixture& f = fixture();
  const Matrix& x = f.sample(0).xv.matrix;
  for (auto _ : state) benchmark::DoNotOptimize(f.model.input_gradient(x));
}
BENCHMARK(BM_InputGradient);

void BM_IntegratedGradients(benchmark::State& state) {
  const Fixture& f = fixture();
  const PreparedSample& p = f.sample(0);
  const Matrix base = f.masker(p).mask_all();
  for (auto _ : state)
    benchmark::DoNotOptimize(ig_explain(f.model, p.xv.matrix, base, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_IntegratedGradients)->Arg(16)->Arg(64)->Arg(256);

void BM_DeepLift(benchmark::State& state) {
  const Fixture& f = fixture();
  const PreparedSample& p = f.sample(0);
  const Matrix base = f.masker(p).mask_all();
  for (auto _ : state) benchmark::DoNotOptimize(deeplift_explain(f.model, p.xv.matrix, base));
}
BENCHMARK(BM_DeepLift);

void BM_Lime(benchmark::State& state) {
  const Fixture& f = fixture();
  const PreparedSample& p = f.sample(0);
  const ICMasker masker = f.masker(p);
  const BlackBox box = BlackBox::of(f.model);
  NeighborhoodOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(lime_explain(box, masker, opts));
  state.counters["ics"] = static_cast<double>(masker.num_ics());
}
BENCHMARK(BM_Lime)->Unit(benchmark::kMillisecond);

void BM_Lemna(benchmark::State& state) {
  const Fixture& f = fixture();
  const PreparedSample& p = f.sample(0);
  const ICMasker masker = f.masker(p);
  const BlackBox box = BlackBox::of(f.model);
  LemnaOptions opts;
  for (auto _ : state) benchmark::DoNotOptimize(lemna_explain(box, masker, opts));
}
BENCHMARK(BM_Lemna)->Unit(benchmark::kMillisecond);

void BM_ShapleyExact(benchmark::State& state) {
  const Fixture& f = fixture();
  const auto n = static_cast<std::size_t>(state.range(0));
  const PreparedSample* chosen = &f.sample(0);
  for (const auto& p : f.samples)
    if (p.indicator.size() == n) chosen = &p;
  const ICMasker masker = f.masker(*chosen);
  const BlackBox box = BlackBox::of(f.model);
  ShapleyOptions opts;
  opts.mode = ShapleyOptions::Mode::kExact;
  for (auto _ : state) benchmark::DoNotOptimize(shapley_explain(box, masker, opts));
  state.counters["ics"] = static_cast<double>(masker.num_ics());
}
BENCHMARK(BM_ShapleyExact)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_ShapleySampled(benchmark::State& state) {
  const Fixture& f = fixture();
  const PreparedSample& p = f.sample(0);
  const ICMasker masker = f.masker(p);
  const BlackBox box = BlackBox::of(f.model);
  ShapleyOptions opts;
  opts.mode = ShapleyOptions::Mode::kSampled;
  for (auto _ : state) benchmark::DoNotOptimize(shapley_explain(box, masker, opts));
}
BENCHMARK(BM_ShapleySampled)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
