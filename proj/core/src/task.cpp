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
#include "finer/task.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

#include "finer/json_io.hpp"

namespace finer {

void TaskSpec::validate() const {
  auto check_range = [](const Range& r, const char* name, std::size_t lower) {
    if (r.min > r.max) throw ConfigError(std::string(name) + ": min > max");
    if (r.min < lower)
      throw ConfigError(std::string(name) + ": min must be >= " + std::to_string(lower));
  };
  check_range(motif_length, "motif_length", 1);
  check_range(ics_per_sample, "ics_per_sample", 1);
  check_range(ic_length, "ic_length", 1);
  check_range(planted, "planted", 0);
  if (motif_vocab == 0 || motif_vocab >= vocab_size)
    throw ConfigError("motif_vocab must be in [1, vocab_size) so filler tokens exist");
  if (motif_length.max > ic_length.max)
    throw ConfigError("infeasible task: motif length " + std::to_string(motif_length.max) +
                      " exceeds max IC length " + std::to_string(ic_length.max));
  if (bias_motifs > benign_motifs) throw ConfigError("bias_motifs exceeds benign_motifs");
  if ((train_risk > 0 || test_risk > 0) && (planted.min == 0 || malicious_motifs == 0))
    throw ConfigError("risk samples need planted.min >= 1 and a malicious motif pool");
  if (planted.min > ics_per_sample.max)
    throw ConfigError("infeasible task: planted.min exceeds ics_per_sample.max");
  for (double p : {motif_rate, bias_rate_risk, bias_rate_benign})
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("rates must be in [0, 1]");
  if (max_len == 0 || embed_dim == 0) throw ConfigError("max_len and embed_dim must be >= 1");
  // Enough distinct n-grams for both pools.
  double space = 0;
  for (std::size_t l = motif_length.min; l <= motif_length.max; ++l) {
    double s = 1;
    for (std::size_t i = 0; i < l && s < 1e12; ++i) s *= static_cast<double>(motif_vocab);
    space += s;
  }
  if (space < 2.0 * static_cast<double>(benign_motifs + malicious_motifs))
    throw ConfigError("infeasible task: motif space too small for the requested pools");
}

namespace {

bool contains(const TokenSeq& hay, const TokenSeq& needle) {
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

bool contains_any(const TokenSeq& hay, std::span<const TokenSeq> motifs) {
  return std::any_of(motifs.begin(), motifs.end(),
                     [&](const TokenSeq& m) { return contains(hay, m); });
}

template <class T>
T uniform(std::mt19937_64& rng, T lo, T hi) {
  return std::uniform_int_distribution<T>(lo, hi)(rng);
}

class Generator {
 public:
  explicit Generator(const TaskSpec& spec) : spec_(spec), rng_(derive_seed(spec.seed, "task")) {}

  void make_motifs(Dataset& d) {
    std::set<TokenSeq> seen;
    auto draw = [&] {
      TokenSeq m(uniform(rng_, spec_.motif_length.min, spec_.motif_length.max));
      for (auto& t : m) t = uniform<Token>(rng_, 0, static_cast<Token>(spec_.motif_vocab) - 1);
      return m;
    };
    while (d.benign_motifs.size() < spec_.benign_motifs) {
      TokenSeq m = draw();
      if (seen.insert(m).second) d.benign_motifs.push_back(std::move(m));
    }
    while (d.malicious_motifs.size() < spec_.malicious_motifs) {
      TokenSeq m = draw();
      if (seen.count(m) != 0) continue;
      bool overlaps = false;
      for (const auto& b : d.benign_motifs) overlaps = overlaps || contains(b, m) || contains(m, b);
      if (overlaps) continue;
      seen.insert(m);
      d.malicious_motifs.push_back(std::move(m));
    }
    benign_ = d.benign_motifs;
    malicious_ = d.malicious_motifs;
  }

  TokenSeq backbone_ic(std::size_t len, double bias_rate) {
    for (;;) {
      TokenSeq out;
      while (out.size() < len) {
        std::bernoulli_distribution take_motif(spec_.motif_rate);
        if (!benign_.empty() && take_motif(rng_)) {
          const std::size_t nb = spec_.bias_motifs;
          const bool use_bias =
              nb > 0 && (nb == benign_.size() || std::bernoulli_distribution(bias_rate)(rng_));
          const std::size_t idx = use_bias ? uniform<std::size_t>(rng_, 0, nb - 1)
                                           : uniform<std::size_t>(rng_, nb, benign_.size() - 1);
          for (Token t : benign_[idx]) {
            if (out.size() == len) break;
            out.push_back(t);
          }
        } else {
          out.push_back(uniform<Token>(rng_, static_cast<Token>(spec_.motif_vocab),
                                       static_cast<Token>(spec_.vocab_size) - 1));
        }
      }
      if (!contains_any(out, malicious_)) return out;
    }
  }

  ProblemSample sample(int label) {
    for (;;) {
      ProblemSample x;
      x.label = label;
      const std::size_t n_ics = uniform(rng_, spec_.ics_per_sample.min, spec_.ics_per_sample.max);
      const double bias_rate = label == 1 ? spec_.bias_rate_risk : spec_.bias_rate_benign;
      for (std::size_t i = 0; i < n_ics; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "fn_%03zu", i);
        x.ics.push_back({name, backbone_ic(uniform(rng_, spec_.ic_length.min, spec_.ic_length.max),
                                           bias_rate)});
      }
      if (label == 1 && !plant(x)) continue;
      if (!boundaries_clean(x)) continue;
      if (find_motif_ics(x, malicious_) != x.ground_truth) continue;
      return x;
    }
  }

 private:
  bool plant(ProblemSample& x) {
    const std::size_t count = uniform(rng_, spec_.planted.min, spec_.planted.max);
    std::vector<TokenSeq> chosen(count);
    for (auto& m : chosen) m = malicious_[uniform<std::size_t>(rng_, 0, malicious_.size() - 1)];
    std::vector<std::size_t> order(x.ics.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<std::size_t> planted;
    for (const auto& motif : chosen) {
      bool placed = false;
      for (std::size_t k = 0; k < order.size() && !placed; ++k) {
        const std::size_t i = order[k];
        auto& toks = x.ics[i].tokens;
        if (toks.size() < motif.size() ||
            std::find(planted.begin(), planted.end(), i) != planted.end())
          continue;
        const std::size_t pos = uniform<std::size_t>(rng_, 0, toks.size() - motif.size());
        std::copy(motif.begin(), motif.end(), toks.begin() + static_cast<std::ptrdiff_t>(pos));
        planted.push_back(i);
        placed = true;
      }
      if (!placed) return false;
    }
    std::sort(planted.begin(), planted.end());
    x.ground_truth = planted;
    return true;
  }

  // No malicious n-gram may straddle an IC boundary in the flat sequence.
  bool boundaries_clean(const ProblemSample& x) const {
    const FeatureRep f = extract_features(x);
    for (const auto& m : malicious_) {
      auto it = f.tokens.begin();
      while ((it = std::search(it, f.tokens.end(), m.begin(), m.end())) != f.tokens.end()) {
        const auto start = static_cast<std::size_t>(it - f.tokens.begin());
        const bool inside = std::any_of(f.ic_spans.begin(), f.ic_spans.end(), [&](const Span& s) {
          return start >= s.start && start + m.size() <= s.start + s.length;
        });
        if (!inside) return false;
        ++it;
      }
    }
    return true;
  }

  const TaskSpec& spec_;
  std::mt19937_64 rng_;
  std::vector<TokenSeq> benign_;
  std::vector<TokenSeq> malicious_;
};

}  // namespace

Dataset generate_dataset(const TaskSpec& spec) {
  spec.validate();
  Dataset d;
  d.spec = spec;
  Generator gen(spec);
  gen.make_motifs(d);
  std::mt19937_64 order_rng(derive_seed(spec.seed, "order"));
  auto make_split = [&](std::size_t benign, std::size_t risk, std::uint64_t first_id) {
    std::vector<ProblemSample> out;
    for (std::size_t i = 0; i < benign; ++i) out.push_back(gen.sample(0));
    for (std::size_t i = 0; i < risk; ++i) out.push_back(gen.sample(1));
    std::shuffle(out.begin(), out.end(), order_rng);
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = first_id + i;
    return out;
  };
  d.train = make_split(spec.train_benign, spec.train_risk, 0);
  d.test = make_split(spec.test_benign, spec.test_risk, d.train.size());
  return d;
}

FeatureRep extract_features(const ProblemSample& x) {
  FeatureRep f;
  for (const auto& ic : x.ics) {
    f.ic_spans.push_back({f.tokens.size(), ic.tokens.size()});
    f.tokens.insert(f.tokens.end(), ic.tokens.begin(), ic.tokens.end());
  }
  return f;
}

FeatureRep extract_features(const IC& ic) {
  FeatureRep f;
  f.tokens = ic.tokens;
  f.ic_spans.push_back({0, ic.tokens.size()});
  return f;
}

std::vector<IC> decompose_ics(const ProblemSample& x) { return x.ics; }

std::vector<std::size_t> find_motif_ics(const ProblemSample& x, std::span<const TokenSeq> motifs) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < x.ics.size(); ++i)
    if (contains_any(x.ics[i].tokens, motifs)) out.push_back(i);
  return out;
}

Vectorizer::Vectorizer(std::size_t vocab_size, std::size_t max_len, std::size_t embed_dim,
                       std::uint64_t embedding_seed)
    : table_(vocab_size, embed_dim), max_len_(max_len) {
  std::mt19937_64 rng(embedding_seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& v : table_.data) v = dist(rng);
}

void Vectorizer::embed_row(Matrix& m, std::size_t row, Token token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= table_.rows)
    throw DataError("token " + std::to_string(token) + " outside vocabulary");
  auto src = table_.row(static_cast<std::size_t>(token));
  std::copy(src.begin(), src.end(), m.row(row).begin());
}

VectorRep Vectorizer::vectorize(const FeatureRep& f) const {
  VectorRep v;
  v.matrix = Matrix(max_len_, table_.cols);
  v.pad_mask.assign(max_len_, false);
  const std::size_t n = std::min(f.tokens.size(), max_len_);
  for (std::size_t i = 0; i < n; ++i) {
    embed_row(v.matrix, i, f.tokens[i]);
    v.pad_mask[i] = true;
  }
  v.truncated = f.tokens.size() - n;
  return v;
}

std::string samples_to_jsonl(std::span<const ProblemSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    out += nlohmann::json(s).dump();
    out += '\n';
  }
  return out;
}

std::vector<ProblemSample> samples_from_jsonl(std::string_view text) {
  std::vector<ProblemSample> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line).get<ProblemSample>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto& s = out.back();
    for (auto g : s.ground_truth)
      if (g >= s.ics.size())
        throw DataError("dataset line " + std::to_string(line_no) + ": ground truth index out of range");
    if ((s.label == 1) != !s.ground_truth.empty())
      throw DataError("dataset line " + std::to_string(line_no) + ": label/ground truth mismatch");
  }
  return out;
}

std::string dataset_manifest(const Dataset& d) {
  nlohmann::json j;
  j["format"] = "finer-dataset";
  j["version"] = 1;
  j["spec"] = d.spec;
  j["seed"] = d.spec.seed;
  j["embedding_seed"] = d.spec.embedding_seed;
  j["benign_motifs"] = d.benign_motifs;
  j["malicious_motifs"] = d.malicious_motifs;
  j["train_count"] = d.train.size();
  j["test_count"] = d.test.size();
  return j.dump(2) + "\n";
}

Dataset dataset_from_manifest(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text.begin(), text.end());
    if (j.value("format", "") != "finer-dataset") throw DataError("not a finer dataset manifest");
    Dataset d;
    d.spec = j.at("spec").get<TaskSpec>();
    d.benign_motifs = j.at("benign_motifs").get<std::vector<TokenSeq>>();
    d.malicious_motifs = j.at("malicious_motifs").get<std::vector<TokenSeq>>();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace finer
