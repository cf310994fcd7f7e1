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

namespace finer {

using Token = int;
using TokenSeq = std::vector<Token>;

struct Range {
  std::size_t min = 0;
  std::size_t max = 0;
  friend bool operator==(const Range&, const Range&) = default;
};

// Parameters of the planted-ground-truth risk detection task. Tokens in
// [0, motif_vocab) form motifs; the remaining tokens are filler.
struct TaskSpec {
  std::size_t vocab_size = 64;
  std::size_t motif_vocab = 40;
  std::size_t benign_motifs = 12;
  std::size_t malicious_motifs = 4;
  Range motif_length{3, 3};
  Range ics_per_sample{4, 16};
  Range ic_length{3, 12};
  Range planted{1, 3};
  // Per-slot probability that a backbone IC continues with a benign motif
  // instead of a filler token.
  double motif_rate = 0.15;
  // The first `bias_motifs` benign motifs are over-represented in the
  // backbones of risk samples: a spurious but label-correlated signal.
  std::size_t bias_motifs = 3;
  double bias_rate_risk = 0.6;
  double bias_rate_benign = 0.15;
  std::size_t train_benign = 600;
  std::size_t train_risk = 400;
  std::size_t test_benign = 150;
  std::size_t test_risk = 100;
  std::size_t max_len = 256;   // input rows
  std::size_t embed_dim = 8;   // input columns
  std::uint64_t seed = 1;
  std::uint64_t embedding_seed = 2;

  void validate() const;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct IC {
  std::string name;
  TokenSeq tokens;
  friend bool operator==(const IC&, const IC&) = default;
};

struct ProblemSample {
  std::uint64_t id = 0;
  std::vector<IC> ics;
  int label = 0;
  std::vector<std::size_t> ground_truth;  // indices into ics, sorted

  friend bool operator==(const ProblemSample&, const ProblemSample&) = default;
};

struct Span {
  std::size_t start = 0;
  std::size_t length = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct FeatureRep {
  TokenSeq tokens;
  std::vector<Span> ic_spans;
};

struct VectorRep {
  Matrix matrix;               // max_len x embed_dim
  std::vector<bool> pad_mask;  // true for rows that hold a token
  std::size_t truncated = 0;   // tokens dropped beyond m
};

struct Dataset {
  TaskSpec spec;
  std::vector<TokenSeq> benign_motifs;
  std::vector<TokenSeq> malicious_motifs;
  std::vector<ProblemSample> train;
  std::vector<ProblemSample> test;
};

Dataset generate_dataset(const TaskSpec& spec);

// Problem -> feature space: concatenation of the IC token sequences.
FeatureRep extract_features(const ProblemSample& x);
FeatureRep extract_features(const IC& ic);

// Problem -> domain space: the ordered IC list.
std::vector<IC> decompose_ics(const ProblemSample& x);

// Indices of ICs that contain at least one of `motifs` as a contiguous n-gram.
std::vector<std::size_t> find_motif_ics(const ProblemSample& x, std::span<const TokenSeq> motifs);

// Feature -> vector space through a frozen random embedding table.
class Vectorizer {
 public:
  Vectorizer() = default;
  Vectorizer(std::size_t vocab_size, std::size_t max_len, std::size_t embed_dim,
             std::uint64_t embedding_seed);
  explicit Vectorizer(const TaskSpec& spec)
      : Vectorizer(spec.vocab_size, spec.max_len, spec.embed_dim, spec.embedding_seed) {}

  VectorRep vectorize(const FeatureRep& f) const;
  VectorRep vectorize(const ProblemSample& x) const { return vectorize(extract_features(x)); }

  // Writes the embedding of `token` into row `row` of `m`.
  void embed_row(Matrix& m, std::size_t row, Token token) const;

  const Matrix& table() const { return table_; }
  std::size_t max_len() const { return max_len_; }
  std::size_t embed_dim() const { return table_.cols; }

 private:
  Matrix table_;
  std::size_t max_len_ = 0;
};

// Line-delimited dataset records and the sidecar manifest.
std::string samples_to_jsonl(std::span<const ProblemSample> samples);
std::vector<ProblemSample> samples_from_jsonl(std::string_view text);
std::string dataset_manifest(const Dataset& d);
// Restores spec and motif pools from a manifest (samples are left empty).
Dataset dataset_from_manifest(std::string_view text);

}  // namespace finer
