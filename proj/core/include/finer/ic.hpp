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
#include "finer/task.hpp"

namespace finer {

inline constexpr int kNoIC = -1;

struct ICDescriptor {
  std::size_t original_index = 0;  // position in the sample's IC list
  std::string name;
  std::size_t row_begin = 0;  // input rows covered by this IC
  std::size_t row_count = 0;

  friend bool operator==(const ICDescriptor&, const ICDescriptor&) = default;
};

// Cell -> valid-IC map for one sample plus the valid IC array. Cells of
// padding rows hold kNoIC; IC indices are dense in [0, ics.size()).
struct ICIndicator {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<int> cells;
  std::vector<ICDescriptor> ics;

  int at(std::size_t r, std::size_t c) const { return cells[r * cols + c]; }
  std::size_t size() const { return ics.size(); }
};

// Places every IC of `x` in vector space by vectorizing it alone and locating
// its rows in the full input. ICs without a vector counterpart (empty or truncated away)
// are dropped.
ICIndicator build_ic_indicator(const ProblemSample& x, const Vectorizer& vectorizer);

// A sample together with its vector form and IC indicator.
struct PreparedSample {
  ProblemSample sample;
  VectorRep xv;
  ICIndicator indicator;
};

PreparedSample prepare_sample(const ProblemSample& x, const Vectorizer& vectorizer);
std::vector<PreparedSample> prepare_samples(std::span<const ProblemSample> samples,
                                            const Vectorizer& vectorizer);
// 1 for each valid IC that carries ground truth.
std::vector<std::uint8_t> truth_bits(const PreparedSample& p);

// Domain-space ROI (valid IC indices) or feature-space ROI (flat cell indices).
struct ROI {
  enum class Space { kDomain, kFeature };
  Space space = Space::kDomain;
  std::vector<std::size_t> indices;  // sorted ascending

  static ROI domain(std::vector<std::size_t> ics);
  static ROI feature(std::vector<std::size_t> cells);
  bool empty() const { return indices.empty(); }
};

// Binary input-shaped matrix: 1 where the cell belongs to the ROI.
Matrix indicator_mask(const ICIndicator& indicator, const ROI& roi);

struct Selection {
  enum class Mode { kTopK, kTopPercentile };
  Mode mode = Mode::kTopK;
  std::size_t k = 1;
  double percentile = 5.0;

  static Selection top_k(std::size_t k) { return {Mode::kTopK, k, 0.0}; }
  static Selection top_percentile(double p) { return {Mode::kTopPercentile, 0, p}; }
  // Number of items selected out of `n`.
  std::size_t count(std::size_t n) const;
};

// Indices ordered by descending score; ties go to the lower index.
std::vector<std::size_t> rank_descending(std::span<const double> scores);

ROI select_roi(std::span<const double> scores, const Selection& sel);

// Pool of benign ICs used to fill masked regions.
class BaselineSet {
 public:
  BaselineSet() = default;
  static BaselineSet from_samples(std::span<const ProblemSample> samples);

  std::size_t size() const { return ics_.size(); }
  bool empty() const { return ics_.empty(); }
  const TokenSeq& ic(std::size_t i) const { return ics_[i]; }
  std::size_t sample_count() const { return samples_; }

 private:
  std::vector<TokenSeq> ics_;
  std::size_t samples_ = 0;
};

// Replaces ICs of one sample with benign content. Each valid IC gets one
// replacement drawn (from `seed`) when the masker is built, so masking the
// same IC twice always yields the same rows.
class ICMasker {
 public:
  ICMasker(const ProblemSample& x, const VectorRep& xv, const ICIndicator& indicator,
           const Vectorizer& vectorizer, const BaselineSet& pool, std::uint64_t seed);
  ICMasker(const PreparedSample& p, const Vectorizer& vectorizer, const BaselineSet& pool,
           std::uint64_t seed)
      : ICMasker(p.sample, p.xv, p.indicator, vectorizer, pool, seed) {}

  std::size_t num_ics() const { return replacements_.size(); }
  const Matrix& original() const { return original_; }

  Matrix mask(const ROI& roi) const;
  Matrix mask(std::span<const std::size_t> ics) const;
  // `off[j]` selects IC j for replacement.
  Matrix mask_pattern(std::span<const std::uint8_t> off) const;
  Matrix mask_all() const;
  Matrix mask_complement(std::span<const std::size_t> keep) const;

  // Problem-space masking; label and ground truth are carried over from x.
  ProblemSample mask_sample(std::span<const std::size_t> ics) const;

  const TokenSeq& replacement(std::size_t ic) const { return replacements_[ic]; }

 private:
  void apply(Matrix& m, std::size_t ic) const;

  ProblemSample sample_;
  Matrix original_;
  std::vector<ICDescriptor> ics_;
  std::vector<TokenSeq> replacements_;
  std::vector<Matrix> replacement_rows_;
};

}  // namespace finer
