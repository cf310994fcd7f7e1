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
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "finer/explainers.hpp"
#include "helpers.hpp"

using namespace finer;
using namespace finer::testing;

namespace {

double sum(const Matrix& m) { return std::accumulate(m.data.begin(), m.data.end(), 0.0); }

// A hand-built sample whose ICs use tokens that never occur in the pool.
struct Planted {
  Vectorizer vectorizer{30, 40, 3, 17};
  ProblemSample sample;
  PreparedSample prepared;
  BaselineSet pool;
  explicit Planted(std::size_t n_ics) {
    for (std::size_t j = 0; j < n_ics; ++j)
      sample.ics.push_back({"ic" + std::to_string(j), TokenSeq(1 + j % 3, static_cast<Token>(1 + j))});
    prepared = prepare_sample(sample, vectorizer);
    ProblemSample benign;
    benign.ics = {{"b", {25, 26}}};
    pool = BaselineSet::from_samples(std::span(&benign, 1));
  }
  ICMasker masker(std::uint64_t seed = 1) const { return ICMasker(prepared, vectorizer, pool, seed); }
  // Which ICs of `m` still hold their original rows.
  std::vector<bool> intact(const Matrix& m) const {
    std::vector<bool> out;
    for (const auto& d : prepared.indicator.ics) {
      bool same = true;
      for (std::size_t r = d.row_begin; r < d.row_begin + d.row_count && same; ++r)
        for (std::size_t c = 0; c < m.cols && same; ++c) same = m(r, c) == prepared.xv.matrix(r, c);
      out.push_back(same);
    }
    return out;
  }
};

// Shapley values by averaging marginal contributions over every ordering.
std::vector<double> brute_force_shapley(std::size_t p, const std::function<double(const std::vector<bool>&)>& v) {
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<double> phi(p, 0.0);
  double count = 0;
  do {
    std::vector<bool> keep(p, false);
    double prev = v(keep);
    for (auto j : perm) {
      keep[j] = true;
      const double cur = v(keep);
      phi[j] += cur - prev;
      prev = cur;
    }
    count += 1;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (auto& x : phi) x /= count;
  return phi;
}

std::vector<Model> benchmark_nets() {
  std::vector<Model> nets;
  for (std::uint64_t s = 0; s < 3; ++s) {
    nets.push_back(small_cnn(64, 8, 10 + s, 16, 3));
    nets.push_back(deep_cnn(32, 4, 20 + s));
    nets.push_back(small_mlp(16, 4, 30 + s, 16));
  }
  return nets;
}

}  // namespace

TEST_CASE("explainer ids round trip and families") {
  for (auto id : kAllExplainers) CHECK(parse_explainer(to_string(id)) == id);
  CHECK_THROWS_AS(parse_explainer("saliency"), ConfigError);
  CHECK(is_gradient_family(ExplainerId::kGradients));
  CHECK(is_gradient_family(ExplainerId::kIG));
  CHECK(is_gradient_family(ExplainerId::kDeepLift));
  CHECK_FALSE(is_gradient_family(ExplainerId::kLime));
  CHECK_FALSE(is_gradient_family(ExplainerId::kLemna));
  CHECK_FALSE(is_gradient_family(ExplainerId::kShapley));
}

TEST_CASE("gradient times input on a logistic model has the closed form") {
  const std::vector<double> w = {0.3, -0.7, 1.1, 0.2, -0.4, 0.9};
  const Model m = logistic_model(3, 2, w, -0.2);
  const Matrix x = random_matrix(3, 2, 1);
  const double p = m.predict(x);
  const Attribution e = gradients_explain(m, x);
  CHECK(e.forward_passes == 1);
  for (std::size_t i = 0; i < w.size(); ++i) CHECK(e.values.data[i] == doctest::Approx(p * (1 - p) * w[i] * x.data[i]));
}

TEST_CASE("integrated gradients on a logistic model distributes the output change along the weights") {
  const std::vector<double> w = {0.3, -0.7, 1.1, 0.2, -0.4, 0.9};
  const Model m = logistic_model(3, 2, w, -0.2);
  const Matrix x = random_matrix(3, 2, 2, -2, 2);
  const Matrix b(3, 2);
  const Attribution e = ig_explain(m, x, b, 2000);
  double dz = 0;
  for (std::size_t i = 0; i < w.size(); ++i) dz += w[i] * x.data[i];
  const double delta = m.predict(x) - m.predict(b);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(e.values.data[i] == doctest::Approx(delta * w[i] * x.data[i] / dz).epsilon(1e-6));
  CHECK(e.forward_passes == 2000);
}

TEST_CASE("integrated gradients completeness on benchmark nets") {
  for (const Model& m : benchmark_nets()) {
    const Shape s = m.input_shape();
    const Matrix x = random_matrix(s.rows, s.cols, 5);
    const Matrix b = random_matrix(s.rows, s.cols, 6, -0.1, 0.1);
    const double delta = m.predict(x) - m.predict(b);
    double prev = 1e300;
    for (std::size_t steps : {16, 64, 256}) {
      const double err = std::abs(sum(ig_explain(m, x, b, steps).values) - delta);
      if (steps == 64) CHECK(err <= 5e-3);
      CHECK(err < prev);
      prev = err;
    }
  }
}

TEST_CASE("integrated gradients rejects mismatched shapes and zero steps") {
  const Model m = small_mlp(4, 2, 1);
  CHECK_THROWS_AS(ig_explain(m, Matrix(4, 2), Matrix(4, 3), 8), ShapeError);
  CHECK_THROWS_AS(ig_explain(m, Matrix(4, 2), Matrix(4, 2), 0), ConfigError);
}

TEST_CASE("DeepLIFT sums to the output difference") {
  std::uint64_t seed = 100;
  for (const Model& m : benchmark_nets()) {
    for (int rep = 0; rep < 5; ++rep) {
      const Shape s = m.input_shape();
      const Matrix x = random_matrix(s.rows, s.cols, ++seed, -2, 2);
      const Matrix b = rep == 0 ? Matrix(s.rows, s.cols) : random_matrix(s.rows, s.cols, ++seed);
      const Attribution e = deeplift_explain(m, x, b);
      CHECK(std::abs(sum(e.values) - (m.predict(x) - m.predict(b))) <= 1e-6);
      CHECK(e.forward_passes == 2);
    }
  }
}

TEST_CASE("DeepLIFT on a logistic model scales the linear contributions") {
  const std::vector<double> w = {0.5, -1.5, 0.25, 2.0};
  const Model m = logistic_model(2, 2, w, 0.3);
  const Matrix x = random_matrix(2, 2, 7, -2, 2);
  const Matrix b = random_matrix(2, 2, 8, -2, 2);
  double dz = 0;
  for (std::size_t i = 0; i < w.size(); ++i) dz += w[i] * (x.data[i] - b.data[i]);
  const double delta = m.predict(x) - m.predict(b);
  const Attribution e = deeplift_explain(m, x, b);
  for (std::size_t i = 0; i < w.size(); ++i)
    CHECK(e.values.data[i] == doctest::Approx(delta * w[i] * (x.data[i] - b.data[i]) / dz).epsilon(1e-12));
}

TEST_CASE("DeepLIFT with the input as baseline attributes nothing") {
  const Model m = deep_cnn(12, 3, 4);
  const Matrix x = random_matrix(12, 3, 9);
  for (double v : deeplift_explain(m, x, x).values.data) CHECK(v == 0.0);
}

TEST_CASE("IC aggregation is the L1 norm over each IC's cells") {
  ICIndicator ind;
  ind.rows = 3;
  ind.cols = 2;
  ind.cells = {0, 0, kNoIC, kNoIC, 1, 1};
  ind.ics = {{0, "a", 0, 1}, {2, "b", 2, 1}};
  Attribution e{Matrix(3, 2), 7};
  e.values.data = {0.5, -1.5, 100.0, 100.0, -0.25, 0.0};
  const ICAttribution a = ic_aggregate(e, ind, ExplainerId::kIG);
  CHECK(a.scores == std::vector<double>{2.0, 0.25});
  CHECK(a.forward_passes == 7);
  CHECK(a.explainer == ExplainerId::kIG);
  e.values = Matrix(2, 2);
  CHECK_THROWS_AS(ic_aggregate(e, ind, ExplainerId::kIG), ShapeError);
}

TEST_CASE("neighborhoods start from the unperturbed instance and weight by distance") {
  const Planted pl(6);
  const ICMasker masker = pl.masker();
  const BlackBox f([](const Matrix& m) { return m(0, 0); });
  NeighborhoodOptions o;
  o.n_neighbors = 200;
  o.seed = 3;
  const Neighborhood nb = sample_neighborhood(f, masker, o);
  CHECK(f.forward_count() == 200);
  REQUIRE(nb.size() == 200);
  for (std::size_t j = 0; j < 6; ++j) CHECK(nb.on[j] == 1);
  CHECK(nb.kernel[0] == 1.0);
  const double width = neighborhood_kernel_width(6, o.kernel_width_scale);
  for (std::size_t i = 0; i < nb.size(); ++i) {
    double off = 0;
    for (std::size_t j = 0; j < 6; ++j) off += nb.on[i * 6 + j] ? 0 : 1;
    CHECK(nb.kernel[i] == doctest::Approx(std::sqrt(std::exp(-off * off / (width * width)))));
  }
  const Neighborhood again = sample_neighborhood(f, masker, o);
  CHECK(again.on == nb.on);
  o.n_neighbors = 6;
  CHECK_THROWS_AS(sample_neighborhood(f, masker, o), ConfigError);
}

TEST_CASE("LIME recovers a planted additive IC model") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Planted pl(8);
    const ICMasker masker = pl.masker(seed);
    std::vector<double> w(8);
    for (std::size_t j = 0; j < 8; ++j) w[j] = std::sin(static_cast<double>(j * 7 + seed)) * 2;
    const BlackBox f([&](const Matrix& m) {
      const auto keep = pl.intact(m);
      double out = 0.1;
      for (std::size_t j = 0; j < keep.size(); ++j) out += keep[j] ? w[j] : 0.0;
      return out;
    });
    NeighborhoodOptions o;
    o.seed = seed;
    const ICAttribution a = lime_explain(f, masker, o);
    CHECK(pearson(a.scores, w) >= 0.99);
    for (std::size_t j = 0; j < 8; ++j) CHECK(a.scores[j] == doctest::Approx(w[j]).epsilon(1e-6));
    CHECK(a.forward_passes == o.n_neighbors);
    CHECK(f.forward_count() == o.n_neighbors);
  }
}

TEST_CASE("LEMNA with one component and no penalty matches LIME on shared neighbours") {
  const TaskSpec t = tiny_spec(4);
  const Dataset d = generate_dataset(t);
  const Vectorizer v(t);
  std::vector<ProblemSample> benign;
  for (const auto& s : d.train)
    if (s.label == 0) benign.push_back(s);
  const BaselineSet pool = BaselineSet::from_samples(benign);
  const Model m = small_cnn(t.max_len, t.embed_dim, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    const PreparedSample p = prepare_sample(d.test[i], v);
    const ICMasker masker(p, v, pool, i);
    LemnaOptions lo;
    lo.components = 1;
    lo.penalty = 0.0;
    lo.neighborhood.n_neighbors = 300;
    lo.neighborhood.seed = i;
    const Neighborhood nb = sample_neighborhood(BlackBox::of(m), masker, lo.neighborhood);
    const ICAttribution lemna = lemna_fit(nb, lo);
    const ICAttribution lime = lime_fit(nb, lo.neighborhood.ridge);
    REQUIRE(lemna.scores.size() == lime.scores.size());
    for (std::size_t j = 0; j < lime.scores.size(); ++j) CHECK(std::abs(lemna.scores[j] - lime.scores[j]) <= 1e-3);
  }
}

TEST_CASE("LEMNA picks the regime of the unperturbed instance") {
  const Planted pl(5);
  const ICMasker masker = pl.masker();
  // Two additive regimes switched by whether IC 0 is intact.
  const BlackBox f([&](const Matrix& m) {
    const auto keep = pl.intact(m);
    double out = 0;
    for (std::size_t j = 1; j < keep.size(); ++j) out += keep[j] ? (keep[0] ? 1.0 * j : -2.0) : 0.0;
    return out;
  });
  LemnaOptions o;
  o.components = 2;
  o.penalty = 0.0;
  o.neighborhood.seed = 5;
  const ICAttribution a = lemna_explain(f, masker, o);
  for (std::size_t j = 2; j < 5; ++j) CHECK(a.scores[j] > a.scores[j - 1]);
  CHECK(a.forward_passes == o.neighborhood.n_neighbors);
  CHECK_THROWS_AS(lemna_fit(Neighborhood{}, LemnaOptions{{}, 0}), ConfigError);
}

TEST_CASE("exact Shapley agrees with brute force over orderings and satisfies the axioms") {
  const Planted pl(6);
  const ICMasker masker = pl.masker();
  // Players 1 and 2 are symmetric, player 5 is a dummy.
  auto game = [](const std::vector<bool>& k) {
    double v = 0.2 * k[0] + 0.5 * (k[1] && k[2]) + 0.3 * (k[1] || k[2]) - 0.4 * k[3] * k[4] + 0.1 * k[4];
    return v * v + 0.05;
  };
  const BlackBox f([&](const Matrix& m) { return game(pl.intact(m)); });
  ShapleyOptions o;
  const ICAttribution a = shapley_explain(f, masker, o);
  CHECK(f.forward_count() == 64);
  CHECK(a.forward_passes == 64);
  const auto want = brute_force_shapley(6, game);
  for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(a.scores[j] - want[j]) <= 1e-12);
  const double total = std::accumulate(a.scores.begin(), a.scores.end(), 0.0);
  CHECK(std::abs(total - (game(std::vector<bool>(6, true)) - game(std::vector<bool>(6, false)))) <= 1e-9);
  CHECK(std::abs(a.scores[1] - a.scores[2]) <= 1e-9);
  CHECK(std::abs(a.scores[5]) <= 1e-9);
}

TEST_CASE("sampled Shapley is efficient and approaches the exact values") {
  const Planted pl(7);
  const ICMasker masker = pl.masker();
  const BlackBox f([&](const Matrix& m) {
    const auto k = pl.intact(m);
    return 0.3 * k[0] + 0.6 * (k[1] && k[3]) + 0.2 * k[6] - 0.1 * k[2];
  });
  ShapleyOptions exact;
  const auto e = shapley_explain(f, masker, exact).scores;
  ShapleyOptions sampled;
  sampled.mode = ShapleyOptions::Mode::kSampled;
  sampled.permutations = 4000;
  sampled.seed = 9;
  const BlackBox g = f;
  const std::size_t before = g.forward_count();
  const ICAttribution s = shapley_explain(g, masker, sampled);
  CHECK(g.forward_count() - before == s.forward_passes);
  CHECK(s.forward_passes == 2 + sampled.permutations * 6);
  CHECK(std::accumulate(s.scores.begin(), s.scores.end(), 0.0) ==
        doctest::Approx(std::accumulate(e.begin(), e.end(), 0.0)).epsilon(1e-12));
  for (std::size_t j = 0; j < 7; ++j) CHECK(std::abs(s.scores[j] - e[j]) < 0.02);
}

TEST_CASE("Shapley enumeration caps") {
  const Planted pl(5);
  const ICMasker masker = pl.masker();
  const BlackBox f([](const Matrix&) { return 0.0; });
  ShapleyOptions o;
  o.exact_cap = 4;
  o.mode = ShapleyOptions::Mode::kExact;
  CHECK_THROWS_AS(shapley_explain(f, masker, o), InfeasibleError);
  o.mode = ShapleyOptions::Mode::kAuto;
  o.permutations = 3;
  CHECK(shapley_explain(f, masker, o).forward_passes == 2 + 3 * 4);
  o.exact_cap = 12;
  CHECK_THROWS_AS(shapley_feature_explain(f, Matrix(4, 4), o), InfeasibleError);
  const ICAttribution small = shapley_feature_explain(f, Matrix(3, 2), o);
  CHECK(small.forward_passes == 64);
}

TEST_CASE("feature-level Shapley on a logistic model satisfies efficiency") {
  const std::vector<double> w = {0.5, -1.0, 0.25, 2.0};
  const Model m = logistic_model(2, 2, w, 0.1);
  const Matrix x = random_matrix(2, 2, 3);
  const ICAttribution a = shapley_feature_explain(BlackBox::of(m), x, {});
  const double total = std::accumulate(a.scores.begin(), a.scores.end(), 0.0);
  CHECK(total == doctest::Approx(m.predict(x) - m.predict(Matrix(2, 2))).epsilon(1e-12));
}

TEST_CASE("feature-level LIME zeroes rows and counts every query") {
  const Model m = small_cnn(20, 3, 5);
  const Matrix x = random_matrix(20, 3, 6);
  NeighborhoodOptions o;
  o.n_neighbors = neighbors_for_adequacy(20, 10.0);
  CHECK(o.n_neighbors == 210);
  const BlackBox f = BlackBox::of(m);
  const ICAttribution a = lime_feature_explain(f, x, 20, o);
  CHECK(a.scores.size() == 20);
  CHECK(f.forward_count() == 210);
  CHECK_THROWS_AS(lime_feature_explain(f, x, 21, o), ShapeError);
  CHECK(neighbors_for_adequacy(4, 1.5) == 8);
}

TEST_CASE("explain_ic dispatches and is deterministic in the seed") {
  const TaskSpec t = tiny_spec(8);
  const Dataset d = generate_dataset(t);
  const Vectorizer v(t);
  std::vector<ProblemSample> benign;
  for (const auto& s : d.train)
    if (s.label == 0) benign.push_back(s);
  const BaselineSet pool = BaselineSet::from_samples(benign);
  const Model m = small_cnn(t.max_len, t.embed_dim, 3);
  const PreparedSample p = prepare_sample(d.test.back(), v);
  const ICMasker masker(p, v, pool, 2);
  ExplainContext ctx{&m, &p.xv.matrix, &p.indicator, &masker, masker.mask_all()};
  ExplainerConfig cfg;
  cfg.lime.n_neighbors = 100;
  cfg.lemna.neighborhood.n_neighbors = 100;
  cfg.shapley.permutations = 5;
  for (auto id : kAllExplainers) {
    const ICAttribution a = explain_ic(id, ctx, cfg, 42);
    const ICAttribution b = explain_ic(id, ctx, cfg, 42);
    CHECK(a.explainer == id);
    CHECK(a.scores == b.scores);
    CHECK(a.scores.size() == p.indicator.size());
  }
  CHECK(explain_ic(ExplainerId::kGradients, ctx, cfg, 1).scores ==
        ic_aggregate(gradients_explain(m, p.xv.matrix), p.indicator, ExplainerId::kGradients).scores);
  CHECK(explain_ic(ExplainerId::kDeepLift, ctx, cfg, 1).scores ==
        ic_aggregate(deeplift_explain(m, p.xv.matrix, ctx.baseline), p.indicator, ExplainerId::kDeepLift).scores);
  CHECK(explain_ic(ExplainerId::kLime, ctx, cfg, 1).scores != explain_ic(ExplainerId::kLime, ctx, cfg, 2).scores);
}

TEST_CASE("black-box explainers only need an output function") {
  const Planted pl(4);
  const ICMasker masker = pl.masker();
  const BlackBox f([&](const Matrix& m) {
    const auto k = pl.intact(m);
    return 0.7 * k[2] + 0.1;
  });
  NeighborhoodOptions o;
  o.n_neighbors = 50;
  const auto lime = lime_explain(f, masker, o).scores;
  const auto shap = shapley_explain(f, masker, {}).scores;
  CHECK(rank_descending(lime).front() == 2);
  CHECK(shap[2] == doctest::Approx(0.7));
  CHECK(f.forward_count() == 50 + 16);
}
