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

#include "finer/common.hpp"
#include "finer/ic.hpp"
#include "finer/net.hpp"

namespace finer {

// Zeroes the k highest-scoring cells of `xv` and returns the model output.
double da_k(const Model& model, const Matrix& xv, const Matrix& cell_scores, std::size_t k);

// Output drop after replacing the ICs in `roi` with benign content.
double mpd_roi(const Model& model, const ICMasker& masker, const ROI& roi);
// Output drop after masking the top-k ICs of `scores` (k clamped to |I|).
double mpd_k(const Model& model, const ICMasker& masker, std::span<const double> scores, std::size_t k);

// One explanation to evaluate: the sample's masker and its IC scores.
struct ScoredSample {
  const ICMasker* masker = nullptr;
  std::vector<double> scores;
};

// Mean model output after masking the top-p% ICs of every explanation.
double amp(const Model& model, std::span<const ScoredSample> explanations, double percentile);

struct FidelityReport {
  std::string id;
  std::size_t k = 0;
  std::vector<double> values;          // MPD of each included sample
  std::vector<std::size_t> included;   // positions in the input
  std::size_t filtered = 0;            // samples with |I| <= k
  double mean = 0.0;

  bool has_data() const { return !values.empty(); }
};

// Mean MPD@k over explanations whose sample has more than k ICs.
FidelityReport global_fidelity(const Model& model, std::span<const ScoredSample> explanations,
                               std::size_t k, std::string id = {});

// |top-k(a) ∩ top-k(b)| / min(k, |I|).
double intersection_size(std::span<const double> a, std::span<const double> b, std::size_t k);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

struct RocResult {
  double auc = 0.5;
  std::vector<CurvePoint> curve;  // (false positive rate, true positive rate)
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

// Threshold sweep over (score, truth) pairs; tied scores move diagonally.
RocResult roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth);

struct LocalAuc {
  double mean = 0.0;
  std::vector<double> values;
  std::size_t included = 0;
  std::size_t excluded = 0;  // samples without a positive or a negative IC
};

// Mean of per-sample AUCs; samples lacking either class are skipped.
LocalAuc mean_local_auc(std::span<const std::vector<double>> scores,
                        std::span<const std::vector<std::uint8_t>> truth);

}  // namespace finer
