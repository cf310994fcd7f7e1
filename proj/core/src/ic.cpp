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
#include "finer/ic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace finer {

ICIndicator build_ic_indicator(const ProblemSample& x, const Vectorizer& vectorizer) {
  const VectorRep xv = vectorizer.vectorize(x);
  ICIndicator ind;
  ind.rows = xv.matrix.rows;
  ind.cols = xv.matrix.cols;
  ind.cells.assign(ind.rows * ind.cols, kNoIC);
  std::size_t cursor = 0;  // start row of the next IC in the input
  const auto ics = decompose_ics(x);
  for (std::size_t d = 0; d < ics.size(); ++d) {
    const VectorRep dv = vectorizer.vectorize(extract_features(ics[d]));
    const std::size_t len = ics[d].tokens.size();
    std::vector<std::size_t> region;
    for (std::size_t j = 0; j < len && cursor + j < ind.rows; ++j) {
      if (!xv.pad_mask[cursor + j] || j >= dv.matrix.rows) break;
      const auto a = xv.matrix.row(cursor + j);
      const auto b = dv.matrix.row(j);
      if (std::equal(a.begin(), a.end(), b.begin())) region.push_back(cursor + j);
    }
    cursor += len;
    if (region.empty()) continue;
    const int index = static_cast<int>(ind.ics.size());
    for (auto r : region)
      std::fill_n(ind.cells.begin() + static_cast<std::ptrdiff_t>(r * ind.cols), ind.cols, index);
    ind.ics.push_back({d, ics[d].name, region.front(), region.size()});
  }
  return ind;
}

PreparedSample prepare_sample(const ProblemSample& x, const Vectorizer& vectorizer) {
  PreparedSample p{x, vectorizer.vectorize(x), build_ic_indicator(x, vectorizer)};
  return p;
}

std::vector<PreparedSample> prepare_samples(std::span<const ProblemSample> samples,
                                            const Vectorizer& vectorizer) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& x : samples) out.push_back(prepare_sample(x, vectorizer));
  return out;
}

std::vector<std::uint8_t> truth_bits(const PreparedSample& p) {
  std::vector<std::uint8_t> bits(p.indicator.size(), 0);
  const auto& gt = p.sample.ground_truth;
  for (std::size_t j = 0; j < p.indicator.size(); ++j)
    bits[j] = std::binary_search(gt.begin(), gt.end(), p.indicator.ics[j].original_index) ? 1 : 0;
  return bits;
}

ROI ROI::domain(std::vector<std::size_t> ics) {
  std::sort(ics.begin(), ics.end());
  ics.erase(std::unique(ics.begin(), ics.end()), ics.end());
  return {Space::kDomain, std::move(ics)};
}

ROI ROI::feature(std::vector<std::size_t> cells) {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return {Space::kFeature, std::move(cells)};
}

Matrix indicator_mask(const ICIndicator& indicator, const ROI& roi) {
  Matrix out(indicator.rows, indicator.cols);
  if (roi.space == ROI::Space::kFeature) {
    for (auto c : roi.indices) {
      if (c >= out.size()) throw ShapeError("feature ROI cell out of range");
      out.data[c] = 1.0;
    }
    return out;
  }
  std::vector<bool> in_roi(indicator.size(), false);
  for (auto i : roi.indices) {
    if (i >= indicator.size()) throw ShapeError("ROI IC index out of range");
    in_roi[i] = true;
  }
  for (std::size_t c = 0; c < indicator.cells.size(); ++c) {
    const int ic = indicator.cells[c];
    if (ic != kNoIC && in_roi[static_cast<std::size_t>(ic)]) out.data[c] = 1.0;
  }
  return out;
}

std::size_t Selection::count(std::size_t n) const {
  if (mode == Mode::kTopK) {
    if (k < 1) throw ConfigError("top-k selection needs k >= 1");
    return std::min(k, n);
  }
  if (!(percentile > 0.0 && percentile <= 100.0))
    throw ConfigError("top-percentile selection needs p in (0, 100]");
  const double raw = percentile / 100.0 * static_cast<double>(n);
  const auto c = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(n, std::max<std::size_t>(1, c));
}

std::vector<std::size_t> rank_descending(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

ROI select_roi(std::span<const double> scores, const Selection& sel) {
  if (scores.empty()) throw DataError("cannot select an ROI from an empty attribution");
  const auto order = rank_descending(scores);
  const std::size_t c = sel.count(scores.size());
  return ROI::domain(std::vector<std::size_t>(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(c)));
}

BaselineSet BaselineSet::from_samples(std::span<const ProblemSample> samples) {
  BaselineSet b;
  for (const auto& s : samples) {
    if (s.label != 0) throw DataError("baseline pool may only hold non-risk samples");
    for (const auto& ic : s.ics)
      if (!ic.tokens.empty()) b.ics_.push_back(ic.tokens);
  }
  b.samples_ = samples.size();
  return b;
}

ICMasker::ICMasker(const ProblemSample& x, const VectorRep& xv, const ICIndicator& indicator,
                   const Vectorizer& vectorizer, const BaselineSet& pool, std::uint64_t seed)
    : sample_(x), original_(xv.matrix), ics_(indicator.ics) {
  if (pool.empty()) throw DataError("masking needs a non-empty baseline pool");
  replacements_.reserve(ics_.size());
  replacement_rows_.reserve(ics_.size());
  for (std::size_t j = 0; j < ics_.size(); ++j) {
    std::mt19937_64 rng(derive_seed(seed, j));
    const TokenSeq& src =
        pool.ic(std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng));
    const std::size_t len = x.ics[ics_[j].original_index].tokens.size();
    TokenSeq tiled(len);
    for (std::size_t t = 0; t < len; ++t) tiled[t] = src[t % src.size()];
    Matrix rows(ics_[j].row_count, original_.cols);
    for (std::size_t r = 0; r < ics_[j].row_count; ++r) vectorizer.embed_row(rows, r, tiled[r]);
    replacements_.push_back(std::move(tiled));
    replacement_rows_.push_back(std::move(rows));
  }
}

void ICMasker::apply(Matrix& m, std::size_t ic) const {
  if (ic >= ics_.size()) throw ShapeError("mask: IC index out of range");
  const auto& rows = replacement_rows_[ic];
  std::copy(rows.data.begin(), rows.data.end(),
            m.data.begin() + static_cast<std::ptrdiff_t>(ics_[ic].row_begin * m.cols));
}

Matrix ICMasker::mask(std::span<const std::size_t> ics) const {
  Matrix out = original_;
  for (auto j : ics) apply(out, j);
  return out;
}

Matrix ICMasker::mask(const ROI& roi) const {
  if (roi.space != ROI::Space::kDomain) throw ShapeError("IC masking needs a domain-space ROI");
  return mask(std::span<const std::size_t>(roi.indices));
}

Matrix ICMasker::mask_pattern(std::span<const std::uint8_t> off) const {
  if (off.size() != ics_.size()) throw ShapeError("mask pattern length differs from IC count");
  Matrix out = original_;
  for (std::size_t j = 0; j < off.size(); ++j)
    if (off[j]) apply(out, j);
  return out;
}

Matrix ICMasker::mask_all() const {
  Matrix out = original_;
  for (std::size_t j = 0; j < ics_.size(); ++j) apply(out, j);
  return out;
}

Matrix ICMasker::mask_complement(std::span<const std::size_t> keep) const {
  std::vector<std::uint8_t> off(ics_.size(), 1);
  for (auto j : keep) {
    if (j >= off.size()) throw ShapeError("mask: IC index out of range");
    off[j] = 0;
  }
  return mask_pattern(off);
}

ProblemSample ICMasker::mask_sample(std::span<const std::size_t> ics) const {
  ProblemSample out = sample_;
  for (auto j : ics) {
    if (j >= ics_.size()) throw ShapeError("mask: IC index out of range");
    out.ics[ics_[j].original_index].tokens = replacements_[j];
  }
  return out;
}

}  // namespace finer
