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
#include "finer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace finer {

namespace {

double checked(double v, double lo, double hi, const char* what) {
  if (!std::isfinite(v) || v < lo - 1e-12 || v > hi + 1e-12)
    throw Error(std::string(what) + " out of range: " + std::to_string(v));
  return v;
}

}  // namespace

double da_k(const Model& model, const Matrix& xv, const Matrix& cell_scores, std::size_t k) {
  if (k < 1) throw ConfigError("da_k needs k >= 1");
  if (!xv.same_shape(cell_scores)) throw ShapeError("da_k: score matrix shape differs from input");
  const auto order = rank_descending(cell_scores.data);
  Matrix masked = xv;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) masked.data[order[i]] = 0.0;
  return checked(model.predict(masked), 0.0, 1.0, "DA");
}

double mpd_roi(const Model& model, const ICMasker& masker, const ROI& roi) {
  const double before = model.predict(masker.original());
  const double after = model.predict(masker.mask(roi));
  return checked(before - after, -1.0, 1.0, "MPD");
}

double mpd_k(const Model& model, const ICMasker& masker, std::span<const double> scores, std::size_t k) {
  if (k < 1) throw ConfigError("mpd_k needs k >= 1");
  if (scores.size() != masker.num_ics()) throw ShapeError("mpd_k: one score per valid IC expected");
  if (scores.empty()) return 0.0;
  return mpd_roi(model, masker, select_roi(scores, Selection::top_k(k)));
}

double amp(const Model& model, std::span<const ScoredSample> explanations, double percentile) {
  if (explanations.empty()) throw DataError("amp needs at least one explanation");
  double sum = 0.0;
  for (const auto& e : explanations) {
    if (e.scores.empty()) {
      sum += model.predict(e.masker->original());
      continue;
    }
    sum += model.predict(e.masker->mask(select_roi(e.scores, Selection::top_percentile(percentile))));
  }
  return checked(sum / static_cast<double>(explanations.size()), 0.0, 1.0, "AMP");
}

FidelityReport global_fidelity(const Model& model, std::span<const ScoredSample> explanations,
                               std::size_t k, std::string id) {
  FidelityReport r;
  r.id = std::move(id);
  r.k = k;
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    const auto& e = explanations[i];
    if (e.masker->num_ics() <= k) {
      ++r.filtered;
      continue;
    }
    r.values.push_back(mpd_k(model, *e.masker, e.scores, k));
    r.included.push_back(i);
  }
  if (!r.values.empty())
    r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / static_cast<double>(r.values.size());
  return r;
}

double intersection_size(std::span<const double> a, std::span<const double> b, std::size_t k) {
  if (a.size() != b.size()) throw ShapeError("intersection_size: attributions cover different ICs");
  if (k < 1) throw ConfigError("intersection_size needs k >= 1");
  if (a.empty()) return 0.0;
  const std::size_t kk = std::min(k, a.size());
  const auto ra = select_roi(a, Selection::top_k(kk)).indices;
  const auto rb = select_roi(b, Selection::top_k(kk)).indices;
  std::vector<std::size_t> common;
  std::set_intersection(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(common));
  return checked(static_cast<double>(common.size()) / static_cast<double>(kk), 0.0, 1.0, "IS");
}

RocResult roc_auc(std::span<const double> scores, std::span<const std::uint8_t> truth) {
  if (scores.size() != truth.size()) throw ShapeError("roc_auc: scores and truth differ in length");
  RocResult r;
  for (auto t : truth) (t ? r.positives : r.negatives)++;
  if (r.positives == 0 || r.negatives == 0) throw DataError("roc_auc needs both positive and negative items");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  const double P = static_cast<double>(r.positives);
  const double N = static_cast<double>(r.negatives);
  double tp = 0, fp = 0, area = 0;
  r.curve.push_back({0.0, 0.0});
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double dtp = 0, dfp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (truth[order[j]] ? dtp : dfp) += 1;
      ++j;
    }
    area += dfp * (tp + dtp / 2.0);
    tp += dtp;
    fp += dfp;
    r.curve.push_back({fp / N, tp / P});
    i = j;
  }
  r.auc = checked(area / (P * N), 0.0, 1.0, "AUC");
  return r;
}

LocalAuc mean_local_auc(std::span<const std::vector<double>> scores,
                        std::span<const std::vector<std::uint8_t>> truth) {
  if (scores.size() != truth.size()) throw ShapeError("mean_local_auc: scores and truth differ in length");
  LocalAuc out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto pos = std::count(truth[i].begin(), truth[i].end(), std::uint8_t{1});
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(truth[i].size())) {
      ++out.excluded;
      continue;
    }
    out.values.push_back(roc_auc(scores[i], truth[i]).auc);
  }
  out.included = out.values.size();
  if (!out.values.empty())
    out.mean = std::accumulate(out.values.begin(), out.values.end(), 0.0) / static_cast<double>(out.included);
  return out;
}

}  // namespace finer
