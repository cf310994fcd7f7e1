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

#include <cmath>
#include <random>

#include "finer/surrogate.hpp"
#include "helpers.hpp"

using namespace finer;
using namespace finer::testing;

namespace {

Design random_design(std::size_t n, std::size_t p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Design d{n, p, std::vector<double>(n * p)};
  for (auto& v : d.x) v = g(rng);
  return d;
}

// Solves the weighted normal equations with an intercept column by Gaussian
// elimination with partial pivoting.
std::vector<double> normal_equations(const Design& d, const std::vector<double>& y, const std::vector<double>& w) {
  const std::size_t q = d.p + 1;
  std::vector<std::vector<double>> a(q, std::vector<double>(q + 1, 0.0));
  for (std::size_t i = 0; i < d.n; ++i) {
    std::vector<double> row(q);
    row[0] = 1.0;
    for (std::size_t j = 0; j < d.p; ++j) row[j + 1] = d.at(i, j);
    for (std::size_t r = 0; r < q; ++r) {
      for (std::size_t c = 0; c < q; ++c) a[r][c] += w[i] * row[r] * row[c];
      a[r][q] += w[i] * row[r] * y[i];
    }
  }
  for (std::size_t col = 0; col < q; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < q; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < q; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= q; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> out(q);
  for (std::size_t r = 0; r < q; ++r) out[r] = a[r][q] / a[r][r];
  return out;
}

double fused_objective(const Design& d, const std::vector<double>& y, const std::vector<double>& w, double penalty,
                       double b0, const std::vector<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < d.n; ++i) {
    double pred = b0;
    for (std::size_t j = 0; j < d.p; ++j) pred += d.at(i, j) * b[j];
    s += w[i] * (y[i] - pred) * (y[i] - pred);
  }
  for (std::size_t j = 1; j < b.size(); ++j) s += penalty * std::abs(b[j] - b[j - 1]);
  return s;
}

double total_variation(const std::vector<double>& b) {
  double s = 0;
  for (std::size_t j = 1; j < b.size(); ++j) s += std::abs(b[j] - b[j - 1]);
  return s;
}

}  // namespace

TEST_CASE("weighted least squares matches Gaussian elimination") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Design d = random_design(60, 5, s);
    std::vector<double> y(d.n), w(d.n);
    for (std::size_t i = 0; i < d.n; ++i) {
      y[i] = u(rng) * 3 - 1;
      w[i] = u(rng);
    }
    const LinearFit fit = weighted_least_squares(d, y, w, 1e-3);
    const auto want = normal_equations(d, y, w);
    CHECK_FALSE(fit.ridge_used);
    CHECK(fit.intercept == doctest::Approx(want[0]).epsilon(1e-9));
    for (std::size_t j = 0; j < d.p; ++j) CHECK(fit.coef[j] == doctest::Approx(want[j + 1]).epsilon(1e-9));
  }
}

TEST_CASE("weighted least squares falls back to ridge on rank deficiency") {
  Design d = random_design(20, 3, 1);
  for (std::size_t i = 0; i < d.n; ++i) d.x[i * 3 + 2] = d.x[i * 3 + 1];
  std::vector<double> y(d.n, 1.0), w(d.n, 1.0);
  const LinearFit fit = weighted_least_squares(d, y, w, 1e-3);
  CHECK(fit.ridge_used);
  for (double c : fit.coef) CHECK(std::isfinite(c));
  CHECK(fit.coef[1] == doctest::Approx(fit.coef[2]).epsilon(1e-9));
}

TEST_CASE("TV denoising satisfies the optimality conditions") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0, 2);
  for (double lambda : {0.0, 0.05, 0.5, 2.0, 50.0}) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> y(1 + rep * 3);
      for (auto& v : y) v = g(rng);
      const auto x = tv_denoise(y, lambda);
      REQUIRE(x.size() == y.size());
      // z_k = sum_{i<=k} (x_i - y_i) must equal lambda * sign(x_{k+1} - x_k)
      // on jumps and lie in [-lambda, lambda] on flats; the total is 0.
      double z = 0;
      for (std::size_t k = 0; k + 1 < x.size(); ++k) {
        z += x[k] - y[k];
        CHECK(std::abs(z) <= lambda + 1e-9);
        const double jump = x[k + 1] - x[k];
        if (std::abs(jump) > 1e-9) CHECK(z == doctest::Approx(lambda * (jump > 0 ? 1 : -1)).epsilon(1e-7));
      }
      z += x.back() - y.back();
      CHECK(std::abs(z) < 1e-9);
    }
  }
}

TEST_CASE("TV denoising limits") {
  const std::vector<double> y = {1.0, 3.0, -2.0, 4.0};
  CHECK(tv_denoise(y, 0.0) == y);
  const auto flat = tv_denoise(y, 1e6);
  for (double v : flat) CHECK(v == doctest::Approx(1.5));
  CHECK(tv_denoise(std::vector<double>{}, 1.0).empty());
}

TEST_CASE("fused lasso with zero penalty equals weighted least squares") {
  const Design d = random_design(50, 4, 2);
  std::vector<double> y(d.n), w(d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    y[i] = std::sin(static_cast<double>(i));
    w[i] = 0.5 + static_cast<double>(i % 3);
  }
  const LinearFit a = fused_lasso_regression(d, y, w, 0.0, 1e-3);
  const LinearFit b = weighted_least_squares(d, y, w, 1e-3);
  CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-9));
  for (std::size_t j = 0; j < d.p; ++j) CHECK(a.coef[j] == doctest::Approx(b.coef[j]).epsilon(1e-9));
}

TEST_CASE("fused lasso is optimal against perturbations and shrinks variation with the penalty") {
  const Design d = random_design(80, 6, 3);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 0.1);
  const std::vector<double> truth = {1.0, 1.0, 1.2, -0.5, -0.5, 0.3};
  std::vector<double> y(d.n), w(d.n, 1.0);
  for (std::size_t i = 0; i < d.n; ++i) {
    y[i] = 0.2 + g(rng);
    for (std::size_t j = 0; j < d.p; ++j) y[i] += d.at(i, j) * truth[j];
  }
  double prev_tv = 1e300;
  for (double pen : {0.0, 0.5, 2.0, 10.0, 100.0, 1e4}) {
    const LinearFit fit = fused_lasso_regression(d, y, w, pen, 1e-3);
    const double best = fused_objective(d, y, w, pen, fit.intercept, fit.coef);
    for (int rep = 0; rep < 30; ++rep) {
      auto b = fit.coef;
      for (auto& v : b) v += g(rng) * 0.1;
      CHECK(fused_objective(d, y, w, pen, fit.intercept + g(rng) * 0.1, b) >= best - 1e-9);
    }
    const double tv = total_variation(fit.coef);
    CHECK(tv <= prev_tv + 1e-6);
    prev_tv = tv;
  }
  CHECK(prev_tv < 1e-4);
}

TEST_CASE("single-component mixture reduces to the weighted fit") {
  const Design d = random_design(40, 3, 5);
  std::vector<double> y(d.n), w(d.n, 1.0);
  for (std::size_t i = 0; i < d.n; ++i) y[i] = d.at(i, 0) - 2 * d.at(i, 2) + 0.05 * std::cos(static_cast<double>(i));
  MixtureOptions opts;
  opts.components = 1;
  opts.penalty = 0.0;
  const MixtureFit m = mixture_regression(d, y, w, opts);
  const LinearFit b = weighted_least_squares(d, y, w, opts.ridge);
  REQUIRE(m.components.size() == 1);
  CHECK(m.mixing[0] == doctest::Approx(1.0));
  for (std::size_t j = 0; j < d.p; ++j) CHECK(m.components[0].coef[j] == doctest::Approx(b.coef[j]).epsilon(1e-6));
}

TEST_CASE("mixture regression separates two planted regimes") {
  const Design d = random_design(200, 2, 6);
  std::vector<double> y(d.n), w(d.n, 1.0);
  for (std::size_t i = 0; i < d.n; ++i)
    y[i] = i % 2 == 0 ? 3 * d.at(i, 0) + 0.01 * d.at(i, 1) : -3 * d.at(i, 1) + 0.01 * d.at(i, 0);
  MixtureOptions opts;
  opts.components = 2;
  opts.penalty = 0.0;
  opts.seed = 1;
  const MixtureFit m = mixture_regression(d, y, w, opts);
  CHECK(m.converged);
  bool a = false, b = false;
  for (const auto& c : m.components) {
    a = a || (std::abs(c.coef[0] - 3) < 0.1 && std::abs(c.coef[1]) < 0.1);
    b = b || (std::abs(c.coef[1] + 3) < 0.1 && std::abs(c.coef[0]) < 0.1);
  }
  CHECK(a);
  CHECK(b);
  for (const auto& r : m.responsibilities) {
    double s = 0;
    for (double v : r) s += v;
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("mixture regression is deterministic in its seed") {
  const Design d = random_design(60, 3, 7);
  std::vector<double> y(d.n), w(d.n, 1.0);
  for (std::size_t i = 0; i < d.n; ++i) y[i] = d.at(i, 1) * (i % 3 == 0 ? 2.0 : -1.0);
  MixtureOptions opts;
  opts.seed = 42;
  const MixtureFit a = mixture_regression(d, y, w, opts);
  const MixtureFit b = mixture_regression(d, y, w, opts);
  CHECK(a.log_likelihood == b.log_likelihood);
  CHECK(a.components[0].coef == b.components[0].coef);
}
