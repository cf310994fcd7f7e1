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
#include <string>
#include <string_view>
#include <vector>

#include "finer/ensemble.hpp"
#include "finer/explainers.hpp"
#include "finer/finetune.hpp"
#include "finer/net.hpp"
#include "finer/task.hpp"

namespace finer::tools {

struct ModelSection {
  std::string architecture = "cnn";  // cnn | cnn-deep | mlp
  std::size_t channels = 16;
  std::size_t kernel = 3;
  std::size_t hidden = 16;
};

struct FinetuneSection {
  double lambda_sanitized = 1.0;
  double lambda_variant = 1.0;
  double lambda_counter = 1.0;
  std::size_t roi_k = 5;
  double roi_percentile = 0.0;  // > 0 selects the top-p% ICs instead of top-k
  std::string surrogate = "gradients";
  std::size_t max_epochs = 30;
  double learning_rate = 0.005;
  std::size_t batch_size = 32;
  double momentum = 0.9;
  std::vector<bool> freeze;
  bool early_stop = false;
  double plateau_tolerance = 0.01;
  std::size_t plateau_epochs = 3;
  double validation_percentile = 5.0;
};

struct ExplainSection {
  std::size_t ig_steps = 64;
  std::size_t lime_neighbors = 1000;
  double off_probability = 0.5;
  double kernel_width_scale = 0.75;
  double ridge = 1e-3;
  std::size_t lemna_components = 3;
  double lemna_penalty = 1e-2;
  std::size_t lemna_max_iter = 200;
  double lemna_tol = 1e-5;
  std::size_t shapley_exact_cap = 12;
  std::size_t shapley_permutations = 200;
};

struct MetricsSection {
  std::size_t k = 3;
  std::size_t weight_k = 0;
  std::vector<std::size_t> k_grid = {1, 2, 3, 5, 8, 12, 16};
  std::vector<double> p_grid = {5, 10, 20, 40, 60, 80};
  std::size_t cost_samples = 3;
  double validation_fraction = 0.1;
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::string output_dir = "finer-out";
  std::size_t jobs = 1;
  TaskSpec task;
  ModelSection model;
  TrainConfig train;
  FinetuneSection finetune;
  ExplainSection explain;
  std::vector<std::string> scenarios = {"black-box", "low-cost", "unlimited"};
  MetricsSection metrics;

  void validate() const;
};

// Named sub-seeds fanned out from the master seed.
struct Seeds {
  std::uint64_t master = 0;
  std::uint64_t data = 0;
  std::uint64_t embedding = 0;
  std::uint64_t model = 0;
  std::uint64_t train = 0;
  std::uint64_t finetune = 0;
  std::uint64_t explain = 0;
  std::uint64_t eval = 0;

  static Seeds from(std::uint64_t master);
};

// Parses a JSON config; unknown keys and invalid values raise ConfigError.
ExperimentConfig parse_config(std::string_view text);
std::string dump_config(const ExperimentConfig& cfg);
// Hash over every setting that can change results (output_dir and jobs excluded).
std::string config_hash(const ExperimentConfig& cfg);

// Task spec with its seeds replaced by the derived data/embedding seeds.
TaskSpec resolved_task(const ExperimentConfig& cfg);
TrainConfig resolved_train(const ExperimentConfig& cfg);
FinetuneConfig resolved_finetune(const ExperimentConfig& cfg);
ExplainerConfig resolved_explainers(const ExperimentConfig& cfg);
EnsembleConfig resolved_ensemble(const ExperimentConfig& cfg);
std::vector<Scenario> resolved_scenarios(const ExperimentConfig& cfg);
Model build_model(const ExperimentConfig& cfg);

}  // namespace finer::tools
