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
#include "finer/tools/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "finer/ensemble.hpp"
#include "finer/finetune.hpp"
#include "finer/json_io.hpp"
#include "finer/metrics.hpp"
#include "finer/tools/io.hpp"

namespace finer::tools {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Data {
  Dataset dataset;
  Vectorizer vectorizer;
  std::vector<PreparedSample> train;
  std::vector<PreparedSample> validation;
  std::vector<PreparedSample> test;
  BaselineSet pool;
  std::unordered_map<std::uint64_t, std::size_t> test_index;
};

fs::path model_path(const fs::path& out, std::string_view name) {
  return out / "models" / (std::string(name) + ".ckpt.json");
}

fs::path records_path(const fs::path& out, std::string_view model, std::string_view scenario) {
  return out / "explanations" / (std::string(model) + "_" + std::string(scenario) + ".jsonl");
}

json provenance(const ExperimentConfig& cfg, const std::string& hash) {
  const Seeds s = Seeds::from(cfg.seed);
  return json{{"config_hash", hash},
              {"seed", s.master},
              {"seeds",
               {{"data", s.data},
                {"embedding", s.embedding},
                {"model", s.model},
                {"train", s.train},
                {"finetune", s.finetune},
                {"explain", s.explain},
                {"eval", s.eval}}}};
}

Data load_data(const fs::path& out, const ExperimentConfig& cfg, const std::string& hash) {
  const fs::path dir = out / "data";
  if (!fs::exists(dir / "manifest.json")) throw DataError("no dataset in " + dir.string() + "; run gen-data first");
  const std::string manifest = read_file(dir / "manifest.json");
  const json mj = json::parse(manifest, nullptr, false);
  if (!mj.is_discarded() && mj.value("config_hash", std::string()) != hash)
    spdlog::warn("dataset was generated with config hash {}, current config is {}",
                 mj.value("config_hash", std::string("?")), hash);
  Data d;
  d.dataset = dataset_from_manifest(manifest);
  d.vectorizer = Vectorizer(d.dataset.spec);
  auto train = samples_from_jsonl(read_file(dir / "train.jsonl"));
  auto test = samples_from_jsonl(read_file(dir / "test.jsonl"));
  const auto n_val = static_cast<std::size_t>(
      std::floor(static_cast<double>(train.size()) * cfg.metrics.validation_fraction));
  const std::span<const ProblemSample> all(train);
  d.train = prepare_samples(all.first(train.size() - n_val), d.vectorizer);
  d.validation = prepare_samples(all.last(n_val), d.vectorizer);
  d.test = prepare_samples(test, d.vectorizer);
  std::vector<ProblemSample> benign;
  for (const auto& p : d.train)
    if (p.sample.label == 0) benign.push_back(p.sample);
  d.pool = BaselineSet::from_samples(benign);
  if (d.pool.empty()) throw DataError("training split has no benign samples for the masking pool");
  for (std::size_t i = 0; i < d.test.size(); ++i) d.test_index[d.test[i].sample.id] = i;
  return d;
}

void save_model(const fs::path& path, const Model& model, std::string_view role, const json& prov) {
  json j = json::parse(save_checkpoint(model));
  j["provenance"] = prov;
  j["provenance"]["role"] = role;
  write_file(path, j.dump(1) + "\n");
}

Model load_model(const fs::path& out, std::string_view name, std::string_view stage) {
  const fs::path path = model_path(out, name);
  if (!fs::exists(path))
    throw DataError("missing model " + path.string() + "; run " + std::string(stage) + " first");
  return load_checkpoint(read_file(path));
}

std::pair<std::vector<Matrix>, std::vector<int>> inputs_of(const std::vector<PreparedSample>& v) {
  std::pair<std::vector<Matrix>, std::vector<int>> out;
  for (const auto& p : v) {
    out.first.push_back(p.xv.matrix);
    out.second.push_back(p.sample.label);
  }
  return out;
}

// Explainers needed by the configured scenarios, in canonical order.
Scenario union_scenario(const std::vector<Scenario>& scenarios) {
  Scenario u{ScenarioId::kUnlimited, {}};
  for (auto id : kAllExplainers)
    for (const auto& s : scenarios)
      if (std::find(s.explainers.begin(), s.explainers.end(), id) != s.explainers.end()) {
        u.explainers.push_back(id);
        break;
      }
  return u;
}

std::vector<ICMasker> eval_maskers(const Data& d, std::uint64_t eval_seed) {
  std::vector<ICMasker> m;
  m.reserve(d.test.size());
  for (const auto& p : d.test) m.emplace_back(p, d.vectorizer, d.pool, derive_seed(eval_seed, p.sample.id));
  return m;
}

// ---- evaluation over stored explanation records --------------------------

struct Method {
  std::string name;
  std::vector<std::size_t> samples;  // test indices
  std::vector<std::vector<double>> scores;
};

struct ModelRecords {
  std::string name;
  Model model;
  std::vector<Method> methods;
  std::vector<std::string> explainer_methods;
};

struct Study {
  const ExperimentConfig* cfg = nullptr;
  Data data;
  std::vector<ICMasker> maskers;
  std::vector<ModelRecords> models;

  const Method& method(std::size_t m, std::string_view name) const {
    for (const auto& x : models[m].methods)
      if (x.name == name) return x;
    throw DataError("no explanation records for method " + std::string(name));
  }

  std::vector<ScoredSample> scored(const Method& method) const {
    std::vector<ScoredSample> out;
    for (std::size_t i = 0; i < method.samples.size(); ++i)
      out.push_back({&maskers[method.samples[i]], method.scores[i]});
    return out;
  }

  FidelityReport fidelity(std::size_t m, std::string_view name, std::size_t k) const {
    const auto s = scored(method(m, name));
    return global_fidelity(models[m].model, s, k, std::string(name));
  }

  LocalAuc local_auc(std::size_t m, std::string_view name) const {
    const Method& x = method(m, name);
    std::vector<std::vector<std::uint8_t>> truth;
    for (auto i : x.samples) truth.push_back(truth_bits(data.test[i]));
    return mean_local_auc(x.scores, truth);
  }

  std::optional<double> pooled_auc(std::size_t m, std::string_view name) const {
    const Method& x = method(m, name);
    std::vector<double> s;
    std::vector<std::uint8_t> t;
    for (std::size_t r = 0; r < x.samples.size(); ++r) {
      const auto bits = truth_bits(data.test[x.samples[r]]);
      s.insert(s.end(), x.scores[r].begin(), x.scores[r].end());
      t.insert(t.end(), bits.begin(), bits.end());
    }
    const auto pos = std::count(t.begin(), t.end(), std::uint8_t{1});
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(t.size())) return std::nullopt;
    return roc_auc(s, t).auc;
  }
};

std::string finer_method(std::string_view scenario) { return "finer:" + std::string(scenario); }
std::string naive_method(std::string_view scenario) { return "naive:" + std::string(scenario); }

Study load_study(const fs::path& out, const ExperimentConfig& cfg, const std::string& hash) {
  Study st;
  st.cfg = &cfg;
  st.data = load_data(out, cfg, hash);
  st.maskers = eval_maskers(st.data, Seeds::from(cfg.seed).eval);
  const auto scenarios = resolved_scenarios(cfg);
  for (auto model_name : {kBaselineModel, kFinetunedModel}) {
    ModelRecords mr;
    mr.name = model_name;
    mr.model = load_model(out, model_name, model_name == kBaselineModel ? "train" : "finetune");
    std::map<std::string, Method> explainer_methods;
    std::map<std::string, std::set<std::size_t>> seen;
    for (const auto& sc : scenarios) {
      const fs::path path = records_path(out, model_name, to_string(sc.id));
      if (!fs::exists(path)) throw DataError("missing explanation records " + path.string() + "; run explain first");
      Method fin{finer_method(to_string(sc.id)), {}, {}};
      Method nav{naive_method(to_string(sc.id)), {}, {}};
      const std::string text = read_file(path);
      std::size_t pos = 0;
      while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const json r = json::parse(text.substr(pos, end - pos));
        pos = end + 1;
        const auto id = r.at("sample_id").get<std::uint64_t>();
        const auto it = st.data.test_index.find(id);
        if (it == st.data.test_index.end()) throw DataError("record for unknown test sample " + std::to_string(id));
        const std::size_t idx = it->second;
        const auto k = r.at("k").get<std::size_t>();
        const auto scores = r.at("scores").get<std::vector<double>>();
        const auto naive_scores = r.at("naive").at("scores").get<std::vector<double>>();
        // Records carry the MPD of their explanation; it must reproduce.
        const double mpd = mpd_k(mr.model, st.maskers[idx], scores, k);
        const double naive_mpd = mpd_k(mr.model, st.maskers[idx], naive_scores, k);
        if (mpd != r.at("mpd").get<double>() || naive_mpd != r.at("naive").at("mpd").get<double>())
          throw DataError("explanation record for sample " + std::to_string(id) + " in " + path.string() +
                          " does not reproduce its MPD");
        fin.samples.push_back(idx);
        fin.scores.push_back(scores);
        nav.samples.push_back(idx);
        nav.scores.push_back(naive_scores);
        for (const auto& e : r.at("explainers")) {
          const auto name = e.at("id").get<std::string>();
          auto& m = explainer_methods[name];
          m.name = name;
          // Scenario files repeat the shared explainers; keep the first copy.
          if (!seen[name].insert(idx).second) continue;
          m.samples.push_back(idx);
          m.scores.push_back(e.at("scores").get<std::vector<double>>());
        }
      }
      mr.methods.push_back(std::move(fin));
      mr.methods.push_back(std::move(nav));
    }
    for (auto id : kAllExplainers) {
      auto it = explainer_methods.find(std::string(to_string(id)));
      if (it == explainer_methods.end()) continue;
      mr.explainer_methods.push_back(it->first);
      mr.methods.push_back(std::move(it->second));
    }
    st.models.push_back(std::move(mr));
  }
  return st;
}

double relative_gain_pct(double before, double after) {
  if (before == 0.0) return after == 0.0 ? 0.0 : std::copysign(INFINITY, after);
  return (after - before) / std::abs(before) * 100.0;
}

}  // namespace

Pipeline::Pipeline(ExperimentConfig cfg)
    : cfg_(std::move(cfg)), seeds_(Seeds::from(cfg_.seed)), out_(cfg_.output_dir), hash_(config_hash(cfg_)) {
  cfg_.validate();
}

void Pipeline::gen_data() {
  const TaskSpec spec = resolved_task(cfg_);
  spdlog::info("generating dataset (seed {})", spec.seed);
  const Dataset d = generate_dataset(spec);
  json manifest = json::parse(dataset_manifest(d));
  manifest["provenance"] = provenance(cfg_, hash_);
  const fs::path dir = out_ / "data";
  write_file(dir / "train.jsonl", samples_to_jsonl(d.train));
  write_file(dir / "test.jsonl", samples_to_jsonl(d.test));
  manifest["config_hash"] = hash_;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_file(out_ / "config.json", dump_config(cfg_));
  spdlog::info("wrote {} train and {} test samples", d.train.size(), d.test.size());
}

void Pipeline::train() {
  const Data d = load_data(out_, cfg_, hash_);
  const auto [inputs, labels] = inputs_of(d.train);
  LabeledSet primary{inputs, labels, 1.0};
  const Model model = fit(build_model(cfg_), primary, resolved_train(cfg_));
  const auto [ti, tl] = inputs_of(d.test);
  spdlog::info("baseline accuracy: train {:.4f}, test {:.4f}", accuracy(model, inputs, labels), accuracy(model, ti, tl));
  save_model(model_path(out_, kBaselineModel), model, kBaselineModel, provenance(cfg_, hash_));
}

void Pipeline::finetune() {
  const Data d = load_data(out_, cfg_, hash_);
  const Model base = load_model(out_, kBaselineModel, "train");
  FinetuneData fd;
  fd.train = d.train;
  fd.validation = d.validation;
  fd.vectorizer = &d.vectorizer;
  fd.fallback_pool = &d.pool;
  const auto t0 = std::chrono::steady_clock::now();
  const FinetuneResult r = finer::finetune(base, fd, resolved_finetune(cfg_));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  spdlog::info("finetune finished after {} epochs in {:.1f}s{}", r.epochs.size(), secs,
               r.stopped_early ? " (plateau)" : "");
  CsvWriter csv({"epoch", "l0", "l1", "l2", "l3", "total", "train_acc", "val_acc", "val_amp", "n_sanitized",
                 "n_variant", "n_counter", "seed", "config_hash"});
  for (const auto& e : r.epochs) {
    csv.cell(e.epoch).cell(e.loss.primary).cell(e.loss.sanitized).cell(e.loss.variant).cell(e.loss.counter);
    csv.cell(e.loss.total).cell(e.train_accuracy).cell(e.validation_accuracy).cell(e.validation_amp);
    csv.cell(e.sanitized).cell(e.variant).cell(e.counter).cell(std::to_string(seeds_.master)).cell(hash_).end_row();
  }
  write_file(out_ / "finetune_report.csv", csv.str());
  save_model(model_path(out_, kFinetunedModel), r.model, kFinetunedModel, provenance(cfg_, hash_));
}

void Pipeline::explain() {
  const Data d = load_data(out_, cfg_, hash_);
  const auto scenarios = resolved_scenarios(cfg_);
  const Scenario all = union_scenario(scenarios);
  const EnsembleConfig ecfg = resolved_ensemble(cfg_);
  const auto maskers = eval_maskers(d, seeds_.eval);
  for (auto model_name : {kBaselineModel, kFinetunedModel}) {
    const Model model = load_model(out_, model_name, model_name == kBaselineModel ? "train" : "finetune");
    std::vector<ScenarioRun> runs(d.test.size());
    parallel_for(d.test.size(), cfg_.jobs, [&](std::size_t i) {
      EnsembleInputs in{&model, &d.test[i], &d.vectorizer, &d.pool};
      runs[i] = run_scenario(in, all, ecfg, derive_seed(seeds_.explain, d.test[i].sample.id));
    });
    for (const auto& sc : scenarios) {
      std::string lines;
      std::size_t count = 0;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        if (!runs[i].risk || runs[i].attributions.empty()) continue;
        const ScenarioRun sub = restrict_run(runs[i], sc);
        const DomainExplanation w = combine_weighted(sub, ecfg.k);
        const DomainExplanation n = combine_naive(sub, ecfg.k);
        const auto& ind = d.test[i].indicator;
        json r;
        r["sample_id"] = w.sample_id;
        r["model"] = model_name;
        r["scenario"] = to_string(sc.id);
        r["k"] = ecfg.k;
        r["config_hash"] = hash_;
        r["seed"] = seeds_.master;
        r["explain_seed"] = derive_seed(seeds_.explain, w.sample_id);
        r["eval_seed"] = derive_seed(seeds_.eval, w.sample_id);
        json names = json::array();
        for (const auto& ic : ind.ics) names.push_back(ic.name);
        r["ics"] = names;
        json ex = json::array();
        for (std::size_t e = 0; e < w.explainers.size(); ++e) {
          ex.push_back({{"id", to_string(w.explainers[e])},
                        {"scores", w.explainer_scores[e]},
                        {"weight", w.weights[e]},
                        {"weight_mpd", sub.weight_mpd[e]},
                        {"forward_passes", w.forward_passes[e]},
                        {"converged", sub.attributions[e].converged}});
        }
        r["explainers"] = ex;
        r["scores"] = w.scores;
        r["roi"] = w.roi.indices;
        json roi_names = json::array();
        for (auto j : w.roi.indices) roi_names.push_back(ind.ics[j].name);
        r["roi_names"] = roi_names;
        r["mpd"] = mpd_k(model, maskers[i], w.scores, ecfg.k);
        r["naive"] = {{"scores", n.scores},
                      {"roi", n.roi.indices},
                      {"mpd", mpd_k(model, maskers[i], n.scores, ecfg.k)}};
        lines += r.dump() + "\n";
        ++count;
      }
      write_file(records_path(out_, model_name, to_string(sc.id)), lines);
      spdlog::info("{} / {}: {} explanation records", model_name, to_string(sc.id), count);
    }
  }
}

void Pipeline::eval() {
  const Study st = load_study(out_, cfg_, hash_);
  const std::string seed = std::to_string(seeds_.master);
  const std::size_t k = cfg_.metrics.k;
  const fs::path dir = out_ / "eval";
  const auto scenarios = resolved_scenarios(cfg_);

  // Fidelity improvement from updating, one row per explainer.
  CsvWriter t4({"explainer", "k", "mpd_without", "mpd_with", "improvement_pct", "n_without", "n_with", "seed",
                "config_hash"});
  for (const auto& name : st.models[1].explainer_methods) {
    const auto a = st.fidelity(0, name, k);
    const auto b = st.fidelity(1, name, k);
    t4.cell(name).cell(k).cell(a.mean).cell(b.mean).cell(relative_gain_pct(a.mean, b.mean), 2);
    t4.cell(a.values.size()).cell(b.values.size()).cell(seed).cell(hash_).end_row();
  }
  write_file(dir / "table4_m1.csv", t4.str());

  // Fidelity improvement from weighting, one row per scenario and model.
  CsvWriter t5({"scenario", "model", "k", "naive_mpd", "finer_mpd", "improvement_pct", "best_single",
                "best_single_mpd", "n", "seed", "config_hash"});
  for (const auto& sc : scenarios)
    for (std::size_t m = 0; m < st.models.size(); ++m) {
      const auto nv = st.fidelity(m, naive_method(to_string(sc.id)), k);
      const auto fi = st.fidelity(m, finer_method(to_string(sc.id)), k);
      std::string best;
      double best_mpd = -INFINITY;
      for (auto e : sc.explainers) {
        const double v = st.fidelity(m, to_string(e), k).mean;
        if (v > best_mpd) {
          best_mpd = v;
          best = to_string(e);
        }
      }
      t5.cell(to_string(sc.id)).cell(st.models[m].name).cell(k).cell(nv.mean).cell(fi.mean);
      t5.cell(relative_gain_pct(nv.mean, fi.mean), 2).cell(best).cell(best_mpd).cell(fi.values.size());
      t5.cell(seed).cell(hash_).end_row();
    }
  write_file(dir / "table5_m2.csv", t5.str());

  // Explanation cost: IC-level against feature-level perturbation.
  CsvWriter t6({"sample_id", "n_ics", "feature_rows", "lime_ic_forward", "lime_feature_forward", "lime_ratio",
                "lime_is", "shapley_ic_mode", "shapley_ic_forward", "shapley_feature", "seed", "config_hash"});
  {
    const Model& model = st.models[1].model;
    const ExplainerConfig xc = resolved_explainers(cfg_);
    std::size_t done = 0;
    for (std::size_t i = 0; i < st.data.test.size() && done < cfg_.metrics.cost_samples; ++i) {
      const auto& p = st.data.test[i];
      const std::size_t n_ics = p.indicator.size();
      const std::size_t rows = p.xv.matrix.rows;
      if (n_ics == 0 || rows < 10 * n_ics || model.predict_label(p.xv.matrix) != 1) continue;
      ++done;
      const std::uint64_t s = derive_seed(derive_seed(seeds_.explain, "cost"), p.sample.id);
      const ICMasker masker(p, st.data.vectorizer, st.data.pool, s);
      NeighborhoodOptions ic_opts = xc.lime;
      ic_opts.seed = derive_seed(s, "lime");
      const BlackBox f_ic = BlackBox::of(model);
      const ICAttribution ic_lime = lime_explain(f_ic, masker, ic_opts);
      NeighborhoodOptions feat_opts = ic_opts;
      const double per_dim = static_cast<double>(ic_opts.n_neighbors) / static_cast<double>(n_ics + 1);
      feat_opts.n_neighbors = neighbors_for_adequacy(rows, per_dim);
      const BlackBox f_feat = BlackBox::of(model);
      const ICAttribution feat_lime = lime_feature_explain(f_feat, p.xv.matrix, rows, feat_opts);
      std::vector<double> per_ic(n_ics, 0.0);
      for (std::size_t j = 0; j < n_ics; ++j) {
        const auto& ic = p.indicator.ics[j];
        for (std::size_t r = ic.row_begin; r < ic.row_begin + ic.row_count; ++r)
          per_ic[j] += std::abs(feat_lime.scores[r]);
      }
      const double is = intersection_size(ic_lime.scores, per_ic, k);
      ShapleyOptions sh = xc.shapley;
      sh.seed = derive_seed(s, "shapley");
      const BlackBox f_sh = BlackBox::of(model);
      const ICAttribution ic_sh = shapley_explain(f_sh, masker, sh);
      const bool exact = n_ics <= sh.exact_cap;
      std::string feature_status = "completed";
      try {
        shapley_feature_explain(BlackBox::of(model), p.xv.matrix, sh);
      } catch (const InfeasibleError&) {
        feature_status = "infeasible";
      }
      t6.cell(std::to_string(p.sample.id)).cell(n_ics).cell(rows).cell(f_ic.forward_count());
      t6.cell(f_feat.forward_count()).cell(static_cast<double>(f_ic.forward_count()) /
                                           static_cast<double>(f_feat.forward_count()));
      t6.cell(is).cell(exact ? "exact" : "sampled").cell(f_sh.forward_count()).cell(feature_status);
      t6.cell(seed).cell(hash_).end_row();
    }
  }
  write_file(dir / "table6_cost.csv", t6.str());

  CsvWriter t7({"model", "train_accuracy", "validation_accuracy", "test_accuracy", "seed", "config_hash"});
  for (const auto& m : st.models) {
    const auto [a, al] = inputs_of(st.data.train);
    const auto [b, bl] = inputs_of(st.data.validation);
    const auto [c, cl] = inputs_of(st.data.test);
    t7.cell(m.name).cell(accuracy(m.model, a, al)).cell(accuracy(m.model, b, bl)).cell(accuracy(m.model, c, cl));
    t7.cell(seed).cell(hash_).end_row();
  }
  write_file(dir / "table7_accuracy.csv", t7.str());

  CsvWriter t8({"model", "method", "mean_local_auc", "pooled_auc", "n_included", "n_excluded", "seed",
                "config_hash"});
  for (std::size_t m = 0; m < st.models.size(); ++m)
    for (const auto& x : st.models[m].methods) {
      const auto la = st.local_auc(m, x.name);
      const auto pooled = st.pooled_auc(m, x.name);
      t8.cell(st.models[m].name).cell(x.name).cell(la.mean).cell(pooled ? num(*pooled) : "nan");
      t8.cell(la.included).cell(la.excluded).cell(seed).cell(hash_).end_row();
    }
  write_file(dir / "table8_auc.csv", t8.str());

  // MPD against the number of masked ICs.
  CsvWriter f5({"model", "method", "k", "mean_mpd", "n", "seed", "config_hash"});
  std::vector<Series> f5_series;
  for (std::size_t m = 0; m < st.models.size(); ++m)
    for (const auto& x : st.models[m].methods) {
      if (x.name.rfind("naive:", 0) == 0) continue;
      Series s{x.name, {}, {}};
      for (auto kk : cfg_.metrics.k_grid) {
        const auto r = st.fidelity(m, x.name, kk);
        f5.cell(st.models[m].name).cell(x.name).cell(kk).cell(r.has_data() ? num(r.mean) : "nan");
        f5.cell(r.values.size()).cell(seed).cell(hash_).end_row();
        s.x.push_back(static_cast<double>(kk));
        s.y.push_back(r.has_data() ? r.mean : NAN);
      }
      if (m == 1) f5_series.push_back(std::move(s));
    }
  write_file(dir / "fig5_k_mpd.csv", f5.str());
  write_file(dir / "fig5_k_mpd.svg",
             line_chart_svg("MPD by number of masked ICs (finetuned model)", "masked ICs (k)", "mean MPD",
                            f5_series, "config_hash=" + hash_ + " seed=" + seed));

  // AMP over every explainer's explanations against the masked percentile.
  CsvWriter f7({"model", "p", "amp", "pairs", "seed", "config_hash"});
  std::vector<Series> f7_series;
  for (std::size_t m = 0; m < st.models.size(); ++m) {
    std::vector<ScoredSample> pairs;
    for (const auto& name : st.models[m].explainer_methods) {
      const auto s = st.scored(st.method(m, name));
      pairs.insert(pairs.end(), s.begin(), s.end());
    }
    Series s{st.models[m].name, {}, {}};
    for (double p : cfg_.metrics.p_grid) {
      const double v = pairs.empty() ? NAN : amp(st.models[m].model, pairs, p);
      f7.cell(st.models[m].name).cell(p, 1).cell(v).cell(pairs.size()).cell(seed).cell(hash_).end_row();
      s.x.push_back(p);
      s.y.push_back(v);
    }
    f7_series.push_back(std::move(s));
  }
  write_file(dir / "fig7_amp.csv", f7.str());
  write_file(dir / "fig7_amp.svg", line_chart_svg("AMP by masked percentile", "masked ICs (%)", "AMP",
                                                  f7_series, "config_hash=" + hash_ + " seed=" + seed));
  spdlog::info("evaluation written to {}", dir.string());
}

void Pipeline::ablate() {
  const Study st = load_study(out_, cfg_, hash_);
  const std::string seed = std::to_string(seeds_.master);
  const std::size_t k = cfg_.metrics.k;
  CsvWriter csv({"study", "subject", "model", "variant", "k", "mean_mpd", "n", "seed", "config_hash"});
  // With and without explanation-guided updating.
  std::vector<std::string> subjects = st.models[1].explainer_methods;
  for (const auto& sc : cfg_.scenarios) subjects.push_back(finer_method(sc));
  for (const auto& subject : subjects)
    for (std::size_t m = 0; m < st.models.size(); ++m) {
      const auto r = st.fidelity(m, subject, k);
      csv.cell("updating").cell(subject).cell(st.models[m].name).cell(m == 0 ? "w/o" : "w/").cell(k);
      csv.cell(r.mean).cell(r.values.size()).cell(seed).cell(hash_).end_row();
    }
  // With and without MPD weighting, against the best single explainer.
  for (const auto& sc : resolved_scenarios(cfg_))
    for (std::size_t m = 0; m < st.models.size(); ++m) {
      const std::string name(to_string(sc.id));
      const auto nv = st.fidelity(m, naive_method(name), k);
      const auto fi = st.fidelity(m, finer_method(name), k);
      csv.cell("ensembling").cell(name).cell(st.models[m].name).cell("naive").cell(k);
      csv.cell(nv.mean).cell(nv.values.size()).cell(seed).cell(hash_).end_row();
      csv.cell("ensembling").cell(name).cell(st.models[m].name).cell("weighted").cell(k);
      csv.cell(fi.mean).cell(fi.values.size()).cell(seed).cell(hash_).end_row();
      for (auto e : sc.explainers) {
        const auto r = st.fidelity(m, to_string(e), k);
        csv.cell("ensembling").cell(name).cell(st.models[m].name).cell("single:" + std::string(to_string(e)));
        csv.cell(k).cell(r.mean).cell(r.values.size()).cell(seed).cell(hash_).end_row();
      }
    }
  write_file(out_ / "ablation.csv", csv.str());
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
    } else if (c == '\n') {
      row.push_back(std::move(cell));
      cell.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else {
      cell += c;
    }
  }
  return rows;
}

std::string markdown_table(const fs::path& csv_path) {
  if (!fs::exists(csv_path)) return "_missing: " + csv_path.filename().string() + "_\n";
  const auto rows = parse_csv(read_file(csv_path));
  if (rows.empty()) return "_empty_\n";
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < rows[0].size(); ++c)
    if (rows[0][c] != "seed" && rows[0][c] != "config_hash") keep.push_back(c);
  std::string md;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    md += "|";
    for (auto c : keep) md += " " + (c < rows[r].size() ? rows[r][c] : std::string()) + " |";
    md += "\n";
    if (r == 0) {
      md += "|";
      for (std::size_t i = 0; i < keep.size(); ++i) md += " --- |";
      md += "\n";
    }
  }
  return md;
}

}  // namespace

void Pipeline::report() {
  const fs::path eval_dir = out_ / "eval";
  if (!fs::exists(eval_dir / "table4_m1.csv")) throw DataError("no evaluation outputs; run eval first");
  std::string md;
  md += "# FINER experiment report\n\n";
  md += "- config hash: `" + hash_ + "`\n";
  md += "- master seed: " + std::to_string(seeds_.master) + "\n";
  md += "- canonical k: " + std::to_string(cfg_.metrics.k) + "\n\n";
  const std::pair<const char*, fs::path> sections[] = {
      {"Fidelity with and without updating (MPD@k)", eval_dir / "table4_m1.csv"},
      {"Weighted ensemble against the naive sum (MPD@k)", eval_dir / "table5_m2.csv"},
      {"Explanation cost, IC level against feature level", eval_dir / "table6_cost.csv"},
      {"Accuracy", eval_dir / "table7_accuracy.csv"},
      {"Ground-truth localization (AUC)", eval_dir / "table8_auc.csv"},
      {"Ablation pairs", out_ / "ablation.csv"},
      {"Finetune epochs", out_ / "finetune_report.csv"},
  };
  for (const auto& [title, path] : sections) md += "## " + std::string(title) + "\n\n" + markdown_table(path) + "\n";
  md += "## Curves\n\n";
  md += "- MPD by masked IC count: `eval/fig5_k_mpd.csv`, `eval/fig5_k_mpd.svg`\n";
  md += "- AMP by masked percentile: `eval/fig7_amp.csv`, `eval/fig7_amp.svg`\n";
  write_file(out_ / "report.md", md);
}

void Pipeline::run_all() {
  gen_data();
  train();
  finetune();
  explain();
  eval();
  ablate();
  report();
}

}  // namespace finer::tools
