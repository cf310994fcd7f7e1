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
#include <span>
#include <string>
#include <vector>

#include "finer/explainers.hpp"
#include "finer/ic.hpp"
#include "finer/net.hpp"

namespace finer {

struct FinetuneConfig {
  double lambda_sanitized = 1.0;
  double lambda_variant = 1.0;
  double lambda_counter = 1.0;
  Selection roi = Selection::top_k(3);
  ExplainerId surrogate = ExplainerId::kGradients;
  ExplainerConfig explainer;  // used when the surrogate is not gradient-based
  TrainConfig train;
  std::vector<bool> frozen;   // per layer; empty keeps every layer trainable
  bool early_stop = true;
  double plateau_tolerance = 0.01;
  std::size_t plateau_epochs = 3;
  double validation_percentile = 5.0;

  void validate() const;
};

// One augmented input and where it came from.
struct AugmentedItem {
  Matrix input;
  int label = 0;
  std::size_t origin = 0;          // index into the training set
  std::vector<std::size_t> masked; // ICs replaced with benign content
};

struct AugmentedBatch {
  std::vector<AugmentedItem> sanitized;  // true positives, ROI masked, label 0
  std::vector<AugmentedItem> variant;    // true positives, non-ROI masked, label 1
  std::vector<AugmentedItem> counter;    // false positives, both maskings, label 0
  bool used_fallback_pool = false;

  bool empty() const { return sanitized.empty() && variant.empty() && counter.empty(); }
};

// Training data shared across batches.
struct FinetuneData {
  std::span<const PreparedSample> train;
  std::span<const PreparedSample> validation;  // its risk samples drive the plateau check
  const Vectorizer* vectorizer = nullptr;
  const BaselineSet* fallback_pool = nullptr;
};

// Builds the three augmented sets for `batch` (indices into data.train)
// under the current model.
AugmentedBatch augment_batch(const Model& model, const FinetuneData& data,
                             std::span<const std::size_t> batch, const FinetuneConfig& cfg,
                             std::uint64_t seed);

struct LossBreakdown {
  double primary = 0.0;
  double sanitized = 0.0;
  double variant = 0.0;
  double counter = 0.0;
  double total = 0.0;
};

// Mean cross entropy per set; the total weights the augmented terms by their
// lambdas and empty sets contribute 0.
LossBreakdown multitask_loss(const Model& model, std::span<const Matrix> inputs, std::span<const int> labels,
                             const AugmentedBatch& aug, const FinetuneConfig& cfg);

struct EpochReport {
  std::size_t epoch = 0;
  LossBreakdown loss;  // averaged over the epoch's batches
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double validation_amp = 0.0;
  std::size_t sanitized = 0;
  std::size_t variant = 0;
  std::size_t counter = 0;
};

struct FinetuneResult {
  Model model;
  std::vector<EpochReport> epochs;
  bool stopped_early = false;
};

FinetuneResult finetune(Model model, const FinetuneData& data, const FinetuneConfig& cfg);

// Mean output on the validation risk samples after masking the surrogate's
// top-p% ICs.
double validation_amp(const Model& model, const FinetuneData& data, const FinetuneConfig& cfg,
                      std::uint64_t seed);

}  // namespace finer
