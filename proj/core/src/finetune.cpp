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
#include "finer/finetune.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "finer/metrics.hpp"

namespace finer {

void FinetuneConfig::validate() const {
  for (double l : {lambda_sanitized, lambda_variant, lambda_counter})
    if (!std::isfinite(l) || l < 0.0) throw ConfigError("finetune lambdas must be finite and >= 0");
  if (roi.mode == Selection::Mode::kTopK && roi.k < 1) throw ConfigError("finetune ROI needs k >= 1");
  if (roi.mode == Selection::Mode::kTopPercentile && !(roi.percentile > 0.0 && roi.percentile <= 100.0))
    throw ConfigError("finetune ROI percentile must be in (0, 100]");
  if (plateau_epochs < 1) throw ConfigError("plateau window must be at least one epoch");
  train.validate();
}

namespace {

std::vector<double> surrogate_scores(const Model& model, const PreparedSample& p, const ICMasker& masker,
                                     const FinetuneConfig& cfg, std::uint64_t seed) {
  if (cfg.surrogate == ExplainerId::kGradients)
    return ic_aggregate(gradients_explain(model, p.xv.matrix), p.indicator, cfg.surrogate).scores;
  ExplainContext ctx;
  ctx.model = &model;
  ctx.xv = &p.xv.matrix;
  ctx.indicator = &p.indicator;
  ctx.masker = &masker;
  ctx.baseline = masker.mask_all();
  return explain_ic(cfg.surrogate, ctx, cfg.explainer, seed).scores;
}

std::vector<std::size_t> complement(const std::vector<std::size_t>& roi, std::size_t n) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < n; ++j)
    if (!std::binary_search(roi.begin(), roi.end(), j)) out.push_back(j);
  return out;
}

double mean_ce(const Model& model, const std::vector<AugmentedItem>& items) {
  if (items.empty()) return 0.0;
  double s = 0.0;
  for (const auto& it : items) {
    s += cross_entropy_from_logit(model.logit(it.input), it.label);
  }
  return s / static_cast<double>(items.size());
}

}  // namespace

AugmentedBatch augment_batch(const Model& model, const FinetuneData& data,
                             std::span<const std::size_t> batch, const FinetuneConfig& cfg,
                             std::uint64_t seed) {
  if (batch.empty()) throw DataError("augment_batch: empty batch");
  std::vector<int> predicted(batch.size());
  std::vector<ProblemSample> negatives;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& p = data.train[batch[b]];
    predicted[b] = model.predict_label(p.xv.matrix);
    if (predicted[b] == 0 && p.sample.label == 0) negatives.push_back(p.sample);
  }
  AugmentedBatch aug;
  if (std::find(predicted.begin(), predicted.end(), 1) == predicted.end()) return aug;

  BaselineSet pool = BaselineSet::from_samples(negatives);
  if (pool.empty()) {
    if (data.fallback_pool == nullptr || data.fallback_pool->empty())
      throw DataError("augment_batch: no true negatives in the batch and no fallback pool");
    pool = *data.fallback_pool;
    aug.used_fallback_pool = true;
  }

  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (predicted[b] != 1) continue;
    const std::size_t origin = batch[b];
    const auto& p = data.train[origin];
    if (p.indicator.size() == 0) continue;
    const std::uint64_t s = derive_seed(seed, p.sample.id);
    const ICMasker masker(p, *data.vectorizer, pool, s);
    const auto scores = surrogate_scores(model, p, masker, cfg, s);
    const auto roi = select_roi(scores, cfg.roi).indices;
    const auto rest = complement(roi, p.indicator.size());
    if (p.sample.label == 1) {
      aug.sanitized.push_back({masker.mask(roi), 0, origin, roi});
      aug.variant.push_back({masker.mask(std::span<const std::size_t>(rest)), 1, origin, rest});
    } else {
      aug.counter.push_back({masker.mask(roi), 0, origin, roi});
      aug.counter.push_back({masker.mask(std::span<const std::size_t>(rest)), 0, origin, rest});
    }
  }
  return aug;
}

LossBreakdown multitask_loss(const Model& model, std::span<const Matrix> inputs, std::span<const int> labels,
                             const AugmentedBatch& aug, const FinetuneConfig& cfg) {
  if (inputs.size() != labels.size()) throw DataError("multitask_loss: inputs and labels differ in length");
  LossBreakdown l;
  if (!inputs.empty()) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      l.primary += cross_entropy_from_logit(model.logit(inputs[i]), labels[i]);
    }
    l.primary /= static_cast<double>(inputs.size());
  }
  l.sanitized = mean_ce(model, aug.sanitized);
  l.variant = mean_ce(model, aug.variant);
  l.counter = mean_ce(model, aug.counter);
  l.total = l.primary + cfg.lambda_sanitized * l.sanitized + cfg.lambda_variant * l.variant +
            cfg.lambda_counter * l.counter;
  if (!std::isfinite(l.total)) throw TrainingError("multitask loss is not finite");
  return l;
}

double validation_amp(const Model& model, const FinetuneData& data, const FinetuneConfig& cfg,
                      std::uint64_t seed) {
  if (data.validation.empty() || data.fallback_pool == nullptr) return 0.0;
  std::vector<ICMasker> maskers;
  maskers.reserve(data.validation.size());
  std::vector<ScoredSample> scored;
  for (const auto& p : data.validation) {
    if (p.sample.label != 1 || p.indicator.size() == 0) continue;
    maskers.emplace_back(p, *data.vectorizer, *data.fallback_pool, derive_seed(seed, p.sample.id));
  }
  std::size_t m = 0;
  for (const auto& p : data.validation) {
    if (p.sample.label != 1 || p.indicator.size() == 0) continue;
    scored.push_back({&maskers[m], surrogate_scores(model, p, maskers[m], cfg, derive_seed(seed, p.sample.id))});
    ++m;
  }
  if (scored.empty()) return 0.0;
  return amp(model, scored, cfg.validation_percentile);
}

FinetuneResult finetune(Model model, const FinetuneData& data, const FinetuneConfig& cfg) {
  cfg.validate();
  if (data.train.empty()) throw DataError("finetune: empty training set");
  if (!cfg.frozen.empty()) {
    if (cfg.frozen.size() != model.layers().size())
      throw ConfigError("finetune: freeze flags must cover every layer");
    for (std::size_t i = 0; i < cfg.frozen.size(); ++i) model.set_frozen(i, cfg.frozen[i]);
  }
  FinetuneResult result{model, {}, false};
  if (!model.any_trainable()) {
    result.model = model;
    return result;
  }

  const TrainConfig& tc = cfg.train;
  Trainer trainer(model, tc);
  BatchSchedule schedule(data.train.size(), tc.batch_size, derive_seed(tc.seed, "shuffle"));
  const std::uint64_t aug_seed = derive_seed(tc.seed, "augment");
  const std::uint64_t val_seed = derive_seed(tc.seed, "validation");
  const std::array<double, 3> lambdas = {cfg.lambda_sanitized, cfg.lambda_variant, cfg.lambda_counter};
  const bool augment = std::any_of(lambdas.begin(), lambdas.end(), [](double l) { return l != 0.0; });

  std::vector<Matrix> train_inputs;
  std::vector<int> train_labels;
  for (const auto& p : data.train) {
    train_inputs.push_back(p.xv.matrix);
    train_labels.push_back(p.sample.label);
  }
  std::vector<Matrix> val_inputs;
  std::vector<int> val_labels;
  for (const auto& p : data.validation) {
    val_inputs.push_back(p.xv.matrix);
    val_labels.push_back(p.sample.label);
  }

  std::vector<double> amp_history;
  std::vector<WeightedExample> batch;
  for (std::size_t epoch = 0; epoch < tc.max_epochs; ++epoch) {
    EpochReport rep;
    rep.epoch = epoch + 1;
    const auto batches = schedule.next_epoch();
    for (std::size_t b = 0; b < batches.size(); ++b) {
      AugmentedBatch aug;
      if (augment)
        aug = augment_batch(model, data, batches[b], cfg,
                            derive_seed(aug_seed, epoch * batches.size() + b));
      batch.clear();
      const double w0 = 1.0 / static_cast<double>(batches[b].size());
      for (auto i : batches[b]) batch.push_back({&train_inputs[i], train_labels[i], w0});
      const std::array<const std::vector<AugmentedItem>*, 3> sets = {&aug.sanitized, &aug.variant, &aug.counter};
      double aug_loss[3] = {0, 0, 0};
      for (std::size_t s = 0; s < 3; ++s) {
        if (lambdas[s] == 0.0 || sets[s]->empty()) continue;
        const double w = lambdas[s] / static_cast<double>(sets[s]->size());
        for (const auto& it : *sets[s]) batch.push_back({&it.input, it.label, w});
        aug_loss[s] = mean_ce(model, *sets[s]);
      }
      double primary = 0.0;
      for (auto i : batches[b]) {
        primary += cross_entropy_from_logit(model.logit(train_inputs[i]), train_labels[i]);
      }
      primary *= w0;
      const double loss = trainer.step(batch);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
      rep.loss.primary += primary;
      rep.loss.sanitized += aug_loss[0];
      rep.loss.variant += aug_loss[1];
      rep.loss.counter += aug_loss[2];
      rep.loss.total += loss;
      rep.sanitized += aug.sanitized.size();
      rep.variant += aug.variant.size();
      rep.counter += aug.counter.size();
    }
    const double nb = static_cast<double>(batches.size());
    rep.loss.primary /= nb;
    rep.loss.sanitized /= nb;
    rep.loss.variant /= nb;
    rep.loss.counter /= nb;
    rep.loss.total /= nb;
    rep.train_accuracy = accuracy(model, train_inputs, train_labels);
    rep.validation_accuracy = accuracy(model, val_inputs, val_labels);
    rep.validation_amp = validation_amp(model, data, cfg, val_seed);
    result.epochs.push_back(rep);

    amp_history.push_back(rep.validation_amp);
    if (cfg.early_stop && amp_history.size() > cfg.plateau_epochs) {
      bool flat = true;
      for (std::size_t i = amp_history.size() - cfg.plateau_epochs; i < amp_history.size(); ++i) {
        const double prev = amp_history[i - 1];
        const double rel = std::abs(amp_history[i] - prev) / std::max(std::abs(prev), 1e-12);
        if (rel >= cfg.plateau_tolerance) flat = false;
      }
      if (flat) {
        result.stopped_early = true;
        break;
      }
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace finer
