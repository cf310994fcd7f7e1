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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "finer/explainers.hpp"
#include "finer/ic.hpp"
#include "finer/net.hpp"

namespace finer {

enum class ScenarioId { kBlackBox, kLowCost, kUnlimited };

inline constexpr std::array<ScenarioId, 3> kAllScenarios = {ScenarioId::kBlackBox, ScenarioId::kLowCost,
                                                            ScenarioId::kUnlimited};

std::string_view to_string(ScenarioId id);
ScenarioId parse_scenario(std::string_view name);

struct Scenario {
  ScenarioId id = ScenarioId::kUnlimited;
  std::vector<ExplainerId> explainers;

  static Scenario of(ScenarioId id);
};

// Shifts scores so the minimum is 0 and rescales them to sum to 1.
std::vector<double> normalize_attribution(std::span<const double> scores);
// Clips negatives and L1-normalizes; all non-positive input gives uniform weights.
std::vector<double> normalize_weights(std::span<const double> weights);

struct EnsembleConfig {
  ExplainerConfig explainers;
  std::size_t k = 3;
  std::size_t weight_k = 0;  // 0: weight at k
};

// Everything the ensemble needs to explain one sample.
struct EnsembleInputs {
  const Model* model = nullptr;
  const PreparedSample* sample = nullptr;
  const Vectorizer* vectorizer = nullptr;
  const BaselineSet* pool = nullptr;
};

// Per-explainer results for one sample before they are combined.
struct ScenarioRun {
  std::uint64_t sample_id = 0;
  ScenarioId scenario = ScenarioId::kUnlimited;
  bool risk = false;
  std::vector<ICAttribution> attributions;
  std::vector<std::vector<double>> normalized;
  std::vector<double> weight_mpd;  // MPD of each explainer under the weighting masker
};

struct DomainExplanation {
  std::uint64_t sample_id = 0;
  ScenarioId scenario = ScenarioId::kUnlimited;
  std::size_t k = 0;
  std::string reason;  // non-empty when no explanation was produced
  std::vector<ExplainerId> explainers;
  std::vector<std::vector<double>> explainer_scores;
  std::vector<std::size_t> forward_passes;
  std::vector<double> weights;
  std::vector<double> scores;
  ROI roi;

  bool empty() const { return !reason.empty(); }
};

inline constexpr std::string_view kReasonPredictedBenign = "predicted-benign";
inline constexpr std::string_view kReasonNoICs = "no-valid-ics";

// Runs every explainer of the scenario and evaluates its weighting MPD.
// Explainer randomness derives from `seed`; the weighting masker uses its
// own sub-seed.
ScenarioRun run_scenario(const EnsembleInputs& in, const Scenario& scenario, const EnsembleConfig& cfg,
                         std::uint64_t seed);

// The part of \`full\` that belongs to \`scenario\`; every explainer of the
// scenario must have been run.
ScenarioRun restrict_run(const ScenarioRun& full, const Scenario& scenario);

// MPD-weighted convex combination of the normalized attributions.
DomainExplanation combine_weighted(const ScenarioRun& run, std::size_t k);
// Equal-weight sum of the normalized attributions.
DomainExplanation combine_naive(const ScenarioRun& run, std::size_t k);

DomainExplanation explain_ensemble(const EnsembleInputs& in, const Scenario& scenario,
                                   const EnsembleConfig& cfg, std::uint64_t seed);
DomainExplanation naive_ensemble(const EnsembleInputs& in, const Scenario& scenario,
                                 const EnsembleConfig& cfg, std::uint64_t seed);

}  // namespace finer
