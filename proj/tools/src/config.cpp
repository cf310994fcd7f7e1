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
#include "finer/tools/config.hpp"

#include <cmath>
#include <cstdio>

#include "finer/json_io.hpp"

namespace finer::tools {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ModelSection, architecture, channels, kernel, hidden)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FinetuneSection, lambda_sanitized, lambda_variant,
                                                lambda_counter, roi_k, roi_percentile, surrogate, max_epochs,
                                                learning_rate, batch_size, momentum, freeze, early_stop,
                                                plateau_tolerance, plateau_epochs, validation_percentile)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExplainSection, ig_steps, lime_neighbors, off_probability,
                                                kernel_width_scale, ridge, lemna_components, lemna_penalty,
                                                lemna_max_iter, lemna_tol, shapley_exact_cap,
                                                shapley_permutations)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MetricsSection, k, weight_k, k_grid, p_grid, cost_samples,
                                                validation_fraction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, seed, output_dir, jobs, task, model, train,
                                                finetune, explain, scenarios, metrics)

namespace {

void reject_unknown(const nlohmann::json& given, const nlohmann::json& known, const std::string& path) {
  if (!given.is_object() || !known.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    const std::string where = path.empty() ? it.key() : path + "." + it.key();
    if (!known.contains(it.key())) throw ConfigError("unknown config key '" + where + "'");
    reject_unknown(it.value(), known.at(it.key()), where);
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void ExperimentConfig::validate() const {
  task.validate();
  train.validate();
  require(jobs >= 1, "jobs must be >= 1");
  require(!output_dir.empty(), "output_dir must not be empty");
  require(model.architecture == "cnn" || model.architecture == "cnn-deep" || model.architecture == "mlp",
          "model.architecture must be cnn, cnn-deep or mlp");
  require(model.channels >= 1 && model.kernel >= 1 && model.hidden >= 1, "model sizes must be >= 1");
  require(model.kernel <= task.max_len, "model.kernel exceeds task.max_len");
  require(finetune.roi_k >= 1, "finetune.roi_k must be >= 1");
  require(finetune.roi_percentile >= 0.0 && finetune.roi_percentile <= 100.0,
          "finetune.roi_percentile must be in [0, 100]");
  parse_explainer(finetune.surrogate);
  require(explain.ig_steps >= 1, "explain.ig_steps must be >= 1");
  require(explain.off_probability > 0.0 && explain.off_probability < 1.0,
          "explain.off_probability must be in (0, 1)");
  require(explain.kernel_width_scale > 0.0, "explain.kernel_width_scale must be > 0");
  require(explain.ridge >= 0.0 && explain.lemna_penalty >= 0.0, "ridge and penalty must be >= 0");
  require(explain.lemna_components >= 1, "explain.lemna_components must be >= 1");
  require(explain.shapley_exact_cap <= 24, "explain.shapley_exact_cap must be <= 24");
  require(explain.shapley_permutations >= 1, "explain.shapley_permutations must be >= 1");
  require(explain.lime_neighbors > task.ics_per_sample.max,
          "explain.lime_neighbors must exceed the largest IC count");
  require(!scenarios.empty(), "at least one scenario is required");
  for (const auto& s : scenarios) parse_scenario(s);
  require(metrics.k >= 1, "metrics.k must be >= 1");
  require(!metrics.k_grid.empty() && !metrics.p_grid.empty(), "metric grids must not be empty");
  for (std::size_t i = 0; i < metrics.k_grid.size(); ++i)
    require(metrics.k_grid[i] >= 1 && (i == 0 || metrics.k_grid[i] > metrics.k_grid[i - 1]),
            "metrics.k_grid must be strictly increasing and >= 1");
  for (std::size_t i = 0; i < metrics.p_grid.size(); ++i)
    require(metrics.p_grid[i] > 0 && metrics.p_grid[i] <= 100 &&
                (i == 0 || metrics.p_grid[i] > metrics.p_grid[i - 1]),
            "metrics.p_grid must be strictly increasing within (0, 100]");
  require(metrics.validation_fraction >= 0.0 && metrics.validation_fraction < 0.5,
          "metrics.validation_fraction must be in [0, 0.5)");
  resolved_finetune(*this).validate();
}

Seeds Seeds::from(std::uint64_t master) {
  Seeds s;
  s.master = master;
  s.data = derive_seed(master, "data");
  s.embedding = derive_seed(master, "embedding");
  s.model = derive_seed(master, "model");
  s.train = derive_seed(master, "train");
  s.finetune = derive_seed(master, "finetune");
  s.explain = derive_seed(master, "explain");
  s.eval = derive_seed(master, "eval");
  return s;
}

ExperimentConfig parse_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, nlohmann::json(ExperimentConfig{}), "");
  ExperimentConfig cfg;
  try {
    cfg = j.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config has a wrong value type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string dump_config(const ExperimentConfig& cfg) { return nlohmann::json(cfg).dump(2) + "\n"; }

std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::json j = cfg;
  j.erase("output_dir");
  j.erase("jobs");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

TaskSpec resolved_task(const ExperimentConfig& cfg) {
  const Seeds s = Seeds::from(cfg.seed);
  TaskSpec t = cfg.task;
  t.seed = s.data;
  t.embedding_seed = s.embedding;
  return t;
}

TrainConfig resolved_train(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = Seeds::from(cfg.seed).train;
  return t;
}

ExplainerConfig resolved_explainers(const ExperimentConfig& cfg) {
  const auto& e = cfg.explain;
  ExplainerConfig x;
  x.ig_steps = e.ig_steps;
  x.lime.n_neighbors = e.lime_neighbors;
  x.lime.off_probability = e.off_probability;
  x.lime.kernel_width_scale = e.kernel_width_scale;
  x.lime.ridge = e.ridge;
  x.lemna.neighborhood = x.lime;
  x.lemna.components = e.lemna_components;
  x.lemna.penalty = e.lemna_penalty;
  x.lemna.max_iter = e.lemna_max_iter;
  x.lemna.tol = e.lemna_tol;
  x.shapley.exact_cap = e.shapley_exact_cap;
  x.shapley.permutations = e.shapley_permutations;
  return x;
}

FinetuneConfig resolved_finetune(const ExperimentConfig& cfg) {
  const auto& f = cfg.finetune;
  FinetuneConfig c;
  c.lambda_sanitized = f.lambda_sanitized;
  c.lambda_variant = f.lambda_variant;
  c.lambda_counter = f.lambda_counter;
  c.roi = f.roi_percentile > 0.0 ? Selection::top_percentile(f.roi_percentile) : Selection::top_k(f.roi_k);
  c.surrogate = parse_explainer(f.surrogate);
  c.explainer = resolved_explainers(cfg);
  c.train.learning_rate = f.learning_rate;
  c.train.batch_size = f.batch_size;
  c.train.max_epochs = f.max_epochs;
  c.train.momentum = f.momentum;
  c.train.seed = Seeds::from(cfg.seed).finetune;
  c.frozen = f.freeze;
  c.early_stop = f.early_stop;
  c.plateau_tolerance = f.plateau_tolerance;
  c.plateau_epochs = f.plateau_epochs;
  c.validation_percentile = f.validation_percentile;
  return c;
}

EnsembleConfig resolved_ensemble(const ExperimentConfig& cfg) {
  EnsembleConfig e;
  e.explainers = resolved_explainers(cfg);
  e.k = cfg.metrics.k;
  e.weight_k = cfg.metrics.weight_k;
  return e;
}

std::vector<Scenario> resolved_scenarios(const ExperimentConfig& cfg) {
  std::vector<Scenario> out;
  for (const auto& s : cfg.scenarios) out.push_back(Scenario::of(parse_scenario(s)));
  return out;
}

Model build_model(const ExperimentConfig& cfg) {
  const auto& m = cfg.model;
  const Shape input{cfg.task.max_len, cfg.task.embed_dim};
  std::vector<LayerSpec> specs;
  auto add = [&](LayerKind kind, std::size_t units = 0, std::size_t channels = 0, std::size_t kernel = 0) {
    LayerSpec s;
    s.kind = kind;
    s.units = units;
    s.channels = channels;
    s.kernel = kernel;
    specs.push_back(s);
  };
  if (m.architecture == "mlp") {
    add(LayerKind::kDense, m.hidden);
    add(LayerKind::kRelu);
  } else {
    add(LayerKind::kConv1d, 0, m.channels, m.kernel);
    add(LayerKind::kRelu);
    add(LayerKind::kGlobalMaxPool);
    if (m.architecture == "cnn-deep") {
      add(LayerKind::kDense, m.hidden);
      add(LayerKind::kRelu);
    }
  }
  add(LayerKind::kDense, 1);
  add(LayerKind::kSigmoidHead);
  return Model::create(input, specs, Seeds::from(cfg.seed).model);
}

}  // namespace finer::tools
