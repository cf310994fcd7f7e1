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

#include <algorithm>
#include <random>

#include "finer/ensemble.hpp"
#include "finer/metrics.hpp"
#include "helpers.hpp"

using namespace finer;
using namespace finer::testing;

namespace {

const TrainedTask& task() {
  static const TrainedTask t;
  return t;
}

EnsembleConfig fast_config() {
  EnsembleConfig cfg;
  cfg.explainers.lime.n_neighbors = 120;
  cfg.explainers.lemna.neighborhood.n_neighbors = 120;
  cfg.explainers.lemna.max_iter = 30;
  cfg.explainers.shapley.exact_cap = 8;
  cfg.explainers.shapley.permutations = 10;
  cfg.explainers.ig_steps = 16;
  return cfg;
}

ScenarioRun handmade_run(std::vector<std::vector<double>> scores, std::vector<double> mpd) {
  ScenarioRun run;
  run.risk = true;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    ICAttribution a;
    a.explainer = kAllExplainers[e];
    a.scores = scores[e];
    run.attributions.push_back(a);
    run.normalized.push_back(normalize_attribution(scores[e]));
  }
  run.weight_mpd = std::move(mpd);
  return run;
}

}  // namespace

TEST_CASE("scenario names and members") {
  for (auto id : kAllScenarios) CHECK(parse_scenario(to_string(id)) == id);
  CHECK_THROWS_AS(parse_scenario("cheap"), ConfigError);
  CHECK(Scenario::of(ScenarioId::kBlackBox).explainers ==
        std::vector<ExplainerId>{ExplainerId::kLime, ExplainerId::kLemna, ExplainerId::kShapley});
  CHECK(Scenario::of(ScenarioId::kLowCost).explainers ==
        std::vector<ExplainerId>{ExplainerId::kGradients, ExplainerId::kIG, ExplainerId::kDeepLift});
  CHECK(Scenario::of(ScenarioId::kUnlimited).explainers.size() == 6);
}

TEST_CASE("attribution normalization") {
  const auto a = normalize_attribution(std::vector<double>{1, 2, 3});
  CHECK(a[0] == 0.0);
  CHECK(a[1] == doctest::Approx(1.0 / 3));
  CHECK(a[2] == doctest::Approx(2.0 / 3));
  CHECK(normalize_attribution(std::vector<double>{4, 4, 4, 4}) == std::vector<double>(4, 0.25));
  CHECK_THROWS_AS(normalize_attribution(std::vector<double>{}), DataError);
  CHECK_THROWS_AS(normalize_attribution(std::vector<double>{1, std::nan("")}), DataError);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> s(2 + rep % 20);
    for (auto& v : s) v = g(rng);
    const auto n = normalize_attribution(s);
    CHECK(rank_descending(n) == rank_descending(s));
    double sum = 0;
    for (double v : n) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("weight normalization") {
  const auto w = normalize_weights(std::vector<double>{0.2, -0.1, 0.3});
  CHECK(w[0] == doctest::Approx(0.4));
  CHECK(w[1] == 0.0);
  CHECK(w[2] == doctest::Approx(0.6));
  CHECK(normalize_weights(std::vector<double>{-1, -2}) == std::vector<double>{0.5, 0.5});
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> s(1 + rep % 7);
    for (auto& v : s) v = g(rng);
    const auto n = normalize_weights(s);
    double sum = 0;
    for (double v : n) sum += v;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("weighted combination is convex in the normalized attributions") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(-0.2, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t ne = 1 + rep % 6, n = 2 + rep % 9;
    std::vector<std::vector<double>> scores(ne, std::vector<double>(n));
    std::vector<double> mpd(ne);
    for (auto& s : scores)
      for (auto& v : s) v = g(rng);
    for (auto& v : mpd) v = u(rng);
    const ScenarioRun run = handmade_run(scores, mpd);
    const DomainExplanation d = combine_weighted(run, 3);
    for (std::size_t j = 0; j < n; ++j) {
      double lo = 1e300, hi = -1e300;
      for (const auto& e : run.normalized) {
        lo = std::min(lo, e[j]);
        hi = std::max(hi, e[j]);
      }
      CHECK(d.scores[j] >= lo - 1e-12);
      CHECK(d.scores[j] <= hi + 1e-12);
    }
    CHECK(d.roi.indices.size() == std::min<std::size_t>(3, n));
  }
}

TEST_CASE("single explainer and identical explainers reduce to the normalized scores") {
  const std::vector<double> s = {0.5, -0.2, 1.5, 0.1};
  const ScenarioRun one = handmade_run({s}, {0.3});
  CHECK(combine_weighted(one, 2).scores == one.normalized[0]);
  CHECK(combine_naive(one, 2).scores == one.normalized[0]);
  const ScenarioRun same = handmade_run({s, s, s}, {0.9, 0.05, 0.0});
  const auto d = combine_weighted(same, 2);
  for (std::size_t j = 0; j < s.size(); ++j) CHECK(d.scores[j] == doctest::Approx(same.normalized[0][j]));
  CHECK(d.roi.indices == std::vector<std::size_t>{0, 2});
}

TEST_CASE("opposite attributions sum to uniform scores") {
  const std::vector<double> a = {1.0, 2.0, 3.0, 4.0};
  const std::vector<double> neg = {-1.0, -2.0, -3.0, -4.0};
  const auto d = combine_naive(handmade_run({a, neg}, {0.1, 0.2}), 1);
  for (double v : d.scores) CHECK(v == doctest::Approx(d.scores[0]));
  CHECK(d.weights == std::vector<double>{1.0, 1.0});
}

TEST_CASE("empty explanations carry a reason") {
  ScenarioRun benign;
  CHECK(combine_weighted(benign, 3).reason == kReasonPredictedBenign);
  CHECK(combine_weighted(benign, 3).empty());
  ScenarioRun no_ics;
  no_ics.risk = true;
  CHECK(combine_naive(no_ics, 3).reason == kReasonNoICs);

  const TrainedTask& t = task();
  const Model benign_model = logistic_model(t.spec.max_len, t.spec.embed_dim,
                                            std::vector<double>(t.spec.max_len * t.spec.embed_dim, 0.0), -5.0);
  const EnsembleInputs in{&benign_model, &t.test.back(), &t.vectorizer, &t.pool};
  const DomainExplanation d = explain_ensemble(in, Scenario::of(ScenarioId::kUnlimited), fast_config(), 1);
  CHECK(d.reason == kReasonPredictedBenign);
  CHECK(d.scores.empty());
  CHECK(d.roi.empty());
}

TEST_CASE("ensemble weights are the MPD of each explainer under the weighting masker") {
  const TrainedTask& t = task();
  const auto risk = t.predicted_risk();
  REQUIRE(risk.size() >= 3);
  const EnsembleConfig cfg = fast_config();
  for (std::size_t i = 0; i < 3; ++i) {
    const EnsembleInputs in{&t.model, risk[i], &t.vectorizer, &t.pool};
    const std::uint64_t seed = 100 + i;
    const ScenarioRun run = run_scenario(in, Scenario::of(ScenarioId::kUnlimited), cfg, seed);
    REQUIRE(run.risk);
    const ICMasker wm(*risk[i], t.vectorizer, t.pool, derive_seed(seed, "weight-mask"));
    for (std::size_t e = 0; e < run.attributions.size(); ++e) {
      CHECK(run.weight_mpd[e] == mpd_k(t.model, wm, run.attributions[e].scores, cfg.k));
      CHECK(run.normalized[e] == normalize_attribution(run.attributions[e].scores));
    }
    const DomainExplanation d = combine_weighted(run, cfg.k);
    CHECK(d.weights == normalize_weights(run.weight_mpd));
    CHECK(d.roi.indices == select_roi(d.scores, Selection::top_k(cfg.k)).indices);
  }
}

TEST_CASE("ensemble runs are deterministic and restriction matches a direct run") {
  const TrainedTask& t = task();
  const auto risk = t.predicted_risk();
  REQUIRE(!risk.empty());
  const EnsembleConfig cfg = fast_config();
  const EnsembleInputs in{&t.model, risk.front(), &t.vectorizer, &t.pool};
  const auto a = explain_ensemble(in, Scenario::of(ScenarioId::kUnlimited), cfg, 7);
  const auto b = explain_ensemble(in, Scenario::of(ScenarioId::kUnlimited), cfg, 7);
  CHECK(a.scores == b.scores);
  CHECK(a.weights == b.weights);
  const ScenarioRun full = run_scenario(in, Scenario::of(ScenarioId::kUnlimited), cfg, 7);
  for (auto id : {ScenarioId::kBlackBox, ScenarioId::kLowCost}) {
    const ScenarioRun direct = run_scenario(in, Scenario::of(id), cfg, 7);
    const ScenarioRun restricted = restrict_run(full, Scenario::of(id));
    CHECK(restricted.weight_mpd == direct.weight_mpd);
    CHECK(restricted.normalized == direct.normalized);
    CHECK(combine_weighted(restricted, 3).scores == combine_weighted(direct, 3).scores);
  }
  const ScenarioRun low = run_scenario(in, Scenario::of(ScenarioId::kLowCost), cfg, 7);
  CHECK_THROWS_AS(restrict_run(low, Scenario::of(ScenarioId::kUnlimited)), ConfigError);
}

TEST_CASE("single-explainer scenario gives the same explanation weighted or naive") {
  const TrainedTask& t = task();
  const auto risk = t.predicted_risk();
  REQUIRE(!risk.empty());
  const EnsembleInputs in{&t.model, risk.back(), &t.vectorizer, &t.pool};
  const Scenario solo{ScenarioId::kLowCost, {ExplainerId::kDeepLift}};
  const auto w = explain_ensemble(in, solo, fast_config(), 3);
  const auto n = naive_ensemble(in, solo, fast_config(), 3);
  CHECK(w.scores == n.scores);
  CHECK(w.roi.indices == n.roi.indices);
  EnsembleConfig bad = fast_config();
  bad.k = 0;
  CHECK_THROWS_AS(explain_ensemble(in, solo, bad, 3), ConfigError);
}
