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
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "finer/common.hpp"
#include "finer/ic.hpp"
#include "finer/net.hpp"

namespace finer {

enum class ExplainerId { kGradients, kIG, kDeepLift, kLime, kLemna, kShapley };

inline constexpr std::array<ExplainerId, 6> kAllExplainers = {
    ExplainerId::kGradients, ExplainerId::kIG,    ExplainerId::kDeepLift,
    ExplainerId::kLime,      ExplainerId::kLemna, ExplainerId::kShapley};

std::string_view to_string(ExplainerId id);
ExplainerId parse_explainer(std::string_view name);
// Gradient-family explainers need white-box access (middle activations).
bool is_gradient_family(ExplainerId id);

// Per-cell importance scores.
struct Attribution {
  Matrix values;
  std::size_t forward_passes = 0;
};

// Per-IC importance scores.
struct ICAttribution {
  std::vector<double> scores;
  ExplainerId explainer = ExplainerId::kGradients;
  std::size_t forward_passes = 0;
  bool converged = true;
};

// Output-only access to a classifier. Every query is counted, which is how
// the explanation cost of perturbation methods is accounted.
class BlackBox {
 public:
  using Fn = std::function<double(const Matrix&)>;

  explicit BlackBox(Fn fn) : fn_(std::move(fn)), count_(std::make_shared<std::atomic<std::size_t>>(0)) {}
  static BlackBox of(const Model& model) {
    return BlackBox([&model](const Matrix& x) { return model.predict(x); });
  }

  double operator()(const Matrix& x) const {
    count_->fetch_add(1, std::memory_order_relaxed);
    return fn_(x);
  }
  std::size_t forward_count() const { return count_->load(); }

 private:
  Fn fn_;
  std::shared_ptr<std::atomic<std::size_t>> count_;
};

// Gradient x input.
Attribution gradients_explain(const Model& model, const Matrix& xv);

// Midpoint Riemann sum of the gradient along the straight path from `bv` to
// `xv`, scaled by (xv - bv). Uses exactly `steps` gradient evaluations.
Attribution ig_explain(const Model& model, const Matrix& xv, const Matrix& bv, std::size_t steps);

// Rescale-rule multipliers propagated layer by layer from one forward trace
// of `xv` and one of `bv`; the result sums to f(xv) - f(bv).
Attribution deeplift_explain(const Model& model, const Matrix& xv, const Matrix& bv);

// L1 norm of the attribution over each IC's cells.
ICAttribution ic_aggregate(const Attribution& e, const ICIndicator& indicator, ExplainerId id);

struct NeighborhoodOptions {
  std::size_t n_neighbors = 1000;
  double off_probability = 0.5;
  double kernel_width_scale = 0.75;
  double ridge = 1e-3;
  std::uint64_t seed = 0;
};

struct LemnaOptions {
  NeighborhoodOptions neighborhood;
  std::size_t components = 3;
  double penalty = 1e-2;
  std::size_t max_iter = 200;
  double tol = 1e-5;
};

struct ShapleyOptions {
  enum class Mode { kAuto, kExact, kSampled };
  Mode mode = Mode::kAuto;
  std::size_t exact_cap = 12;
  std::size_t permutations = 200;
  std::uint64_t seed = 0;
};

// IC on/off neighborhood: row 0 is the unperturbed instance, the remaining
// rows switch each IC off independently.
struct Neighborhood {
  std::size_t n_ics = 0;
  std::vector<std::uint8_t> on;  // n_neighbors x n_ics
  std::vector<double> outputs;
  std::vector<double> kernel;

  std::size_t size() const { return outputs.size(); }
};

Neighborhood sample_neighborhood(const BlackBox& f, const ICMasker& masker,
                                 const NeighborhoodOptions& opts);
double neighborhood_kernel_width(std::size_t n_ics, double scale);

ICAttribution lime_explain(const BlackBox& f, const ICMasker& masker, const NeighborhoodOptions& opts);
ICAttribution lime_fit(const Neighborhood& nb, double ridge);
ICAttribution lemna_explain(const BlackBox& f, const ICMasker& masker, const LemnaOptions& opts);
ICAttribution lemna_fit(const Neighborhood& nb, const LemnaOptions& opts);
ICAttribution shapley_explain(const BlackBox& f, const ICMasker& masker, const ShapleyOptions& opts);

// Feature-level counterparts, used to measure what the IC adjustment saves.
// Features are the first `features` input rows; switching one off zeroes it.
ICAttribution lime_feature_explain(const BlackBox& f, const Matrix& xv, std::size_t features,
                                   const NeighborhoodOptions& opts);
// Exact feature-level Shapley over all input cells; throws InfeasibleError when
// the cell count exceeds the enumeration cap.
ICAttribution shapley_feature_explain(const BlackBox& f, const Matrix& xv, const ShapleyOptions& opts);
// Neighbor count giving `per_dimension` samples per surrogate parameter.
std::size_t neighbors_for_adequacy(std::size_t dimensions, double per_dimension);

struct ExplainerConfig {
  std::size_t ig_steps = 64;
  NeighborhoodOptions lime;
  LemnaOptions lemna;
  ShapleyOptions shapley;
};

// Everything one explain call needs about one sample.
struct ExplainContext {
  const Model* model = nullptr;
  const Matrix* xv = nullptr;
  const ICIndicator* indicator = nullptr;
  const ICMasker* masker = nullptr;
  Matrix baseline;  // reference input for the gradient family
};

// Runs one explainer and returns IC-level scores: gradient-family results are
// aggregated over IC cells, black-box ones perturb ICs directly.
ICAttribution explain_ic(ExplainerId id, const ExplainContext& ctx, const ExplainerConfig& cfg,
                         std::uint64_t seed);

}  // namespace finer
