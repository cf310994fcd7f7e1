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
#include "finer/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "finer/metrics.hpp"

namespace finer {

std::string_view to_string(ScenarioId id) {
  switch (id) {
    case ScenarioId::kBlackBox: return "black-box";
    case ScenarioId::kLowCost: return "low-cost";
    case ScenarioId::kUnlimited: return "unlimited";
  }
  return "unknown";
}

ScenarioId parse_scenario(std::string_view name) {
  for (auto id : kAllScenarios)
    if (to_string(id) == name) return id;
  throw ConfigError("unknown scenario '" + std::string(name) + "'");
}

Scenario Scenario::of(ScenarioId id) {
  Scenario s{id, {}};
  for (auto e : kAllExplainers) {
    const bool grad = is_gradient_family(e);
    if (id == ScenarioId::kUnlimited || (id == ScenarioId::kLowCost) == grad) s.explainers.push_back(e);
  }
  return s;
}

std::vector<double> normalize_attribution(std::span<const double> scores) {
  if (scores.empty()) throw DataError("normalize_attribution: empty attribution");
  for (double v : scores)
    if (!std::isfinite(v)) throw DataError("normalize_attribution: non-finite score");
  const double lo = *std::min_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = scores[i] - lo;
    sum += out[i];
  }
  if (!(sum > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<double> normalize_weights(std::span<const double> weights) {
  std::vector<double> out(weights.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out[i] = std::isfinite(weights[i]) ? std::max(0.0, weights[i]) : 0.0;
    sum += out[i];
  }
  if (!(sum > 0.0)) {
    std::fill(out.begin(), out.end(), out.empty() ? 0.0 : 1.0 / static_cast<double>(out.size()));
    return out;
  }
  for (auto& v : out) v /= sum;
  return out;
}

ScenarioRun run_scenario(const EnsembleInputs& in, const Scenario& scenario, const EnsembleConfig& cfg,
                         std::uint64_t seed) {
  if (cfg.k < 1) throw ConfigError("ensemble needs k >= 1");
  const PreparedSample& p = *in.sample;
  ScenarioRun run;
  run.sample_id = p.sample.id;
  run.scenario = scenario.id;
  run.risk = in.model->predict_label(p.xv.matrix) == 1;
  if (!run.risk || p.indicator.size() == 0) return run;

  const ICMasker masker(p, *in.vectorizer, *in.pool, derive_seed(seed, "mask"));
  const ICMasker weight_masker(p, *in.vectorizer, *in.pool, derive_seed(seed, "weight-mask"));
  ExplainContext ctx;
  ctx.model = in.model;
  ctx.xv = &p.xv.matrix;
  ctx.indicator = &p.indicator;
  ctx.masker = &masker;
  ctx.baseline = masker.mask_all();

  const std::size_t wk = cfg.weight_k == 0 ? cfg.k : cfg.weight_k;
  for (auto id : scenario.explainers) {
    run.attributions.push_back(explain_ic(id, ctx, cfg.explainers, seed));
    run.normalized.push_back(normalize_attribution(run.attributions.back().scores));
    run.weight_mpd.push_back(mpd_k(*in.model, weight_masker, run.attributions.back().scores, wk));
  }
  return run;
}

ScenarioRun restrict_run(const ScenarioRun& full, const Scenario& scenario) {
  ScenarioRun out;
  out.sample_id = full.sample_id;
  out.scenario = scenario.id;
  out.risk = full.risk;
  if (full.attributions.empty()) return out;
  for (auto id : scenario.explainers) {
    std::size_t i = 0;
    while (i < full.attributions.size() && full.attributions[i].explainer != id) ++i;
    if (i == full.attributions.size())
      throw ConfigError("restrict_run: explainer " + std::string(to_string(id)) + " was not run");
    out.attributions.push_back(full.attributions[i]);
    out.normalized.push_back(full.normalized[i]);
    out.weight_mpd.push_back(full.weight_mpd[i]);
  }
  return out;
}

namespace {

DomainExplanation combine(const ScenarioRun& run, std::size_t k, std::vector<double> weights) {
  DomainExplanation d;
  d.sample_id = run.sample_id;
  d.scenario = run.scenario;
  d.k = k;
  if (!run.risk) {
    d.reason = kReasonPredictedBenign;
    return d;
  }
  if (run.attributions.empty()) {
    d.reason = kReasonNoICs;
    return d;
  }
  for (const auto& a : run.attributions) {
    d.explainers.push_back(a.explainer);
    d.explainer_scores.push_back(a.scores);
    d.forward_passes.push_back(a.forward_passes);
  }
  d.scores.assign(run.normalized.front().size(), 0.0);
  for (std::size_t e = 0; e < run.normalized.size(); ++e)
    for (std::size_t j = 0; j < d.scores.size(); ++j) d.scores[j] += weights[e] * run.normalized[e][j];
  d.weights = std::move(weights);
  d.roi = select_roi(d.scores, Selection::top_k(k));
  return d;
}

}  // namespace

DomainExplanation combine_weighted(const ScenarioRun& run, std::size_t k) {
  return combine(run, k, normalize_weights(run.weight_mpd));
}

DomainExplanation combine_naive(const ScenarioRun& run, std::size_t k) {
  return combine(run, k, std::vector<double>(run.attributions.size(), 1.0));
}

DomainExplanation explain_ensemble(const EnsembleInputs& in, const Scenario& scenario,
                                   const EnsembleConfig& cfg, std::uint64_t seed) {
  return combine_weighted(run_scenario(in, scenario, cfg, seed), cfg.k);
}

DomainExplanation naive_ensemble(const EnsembleInputs& in, const Scenario& scenario,
                                 const EnsembleConfig& cfg, std::uint64_t seed) {
  return combine_naive(run_scenario(in, scenario, cfg, seed), cfg.k);
}

}  // namespace finer
