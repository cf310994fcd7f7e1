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

// Local surrogate models fitted on perturbation neighborhoods.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace finer {

// Exact solution of min_x 0.5*||x - y||^2 + lambda * sum_k |x_{k+1} - x_k|
// (direct 1-D total-variation denoising, Condat 2013).
std::vector<double> tv_denoise(std::span<const double> y, double lambda);

// Row-major design matrix with n rows of p features.
struct Design {
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> x;

  double at(std::size_t i, std::size_t j) const { return x[i * p + j]; }
};

struct LinearFit {
  double intercept = 0.0;
  std::vector<double> coef;
  bool ridge_used = false;
};

// Weighted least squares with an unpenalized intercept. Falls back to a ridge
// of strength `ridge` on the coefficients when the normal equations are
// rank deficient.
LinearFit weighted_least_squares(const Design& d, std::span<const double> y,
                                 std::span<const double> w, double ridge);

struct FusedLassoOptions {
  std::size_t max_iter = 20000;
  double tol = 1e-12;
};

// min sum_i w_i (y_i - b0 - x_i.b)^2 + penalty * sum_j |b_j - b_{j-1}|,
// solved by accelerated proximal gradient warm-started from the WLS fit.
LinearFit fused_lasso_regression(const Design& d, std::span<const double> y,
                                 std::span<const double> w, double penalty, double ridge,
                                 const FusedLassoOptions& opts = {});

struct MixtureOptions {
  std::size_t components = 3;
  double penalty = 1e-2;
  double ridge = 1e-3;
  std::size_t max_iter = 200;
  double tol = 1e-5;
  std::uint64_t seed = 0;
};

struct MixtureFit {
  std::vector<LinearFit> components;
  std::vector<double> mixing;
  std::vector<double> sigma2;
  std::vector<std::vector<double>> responsibilities;  // n x K
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

// Mixture of K linear regressions fitted by EM; the M-step of each component
// is a fused-lasso regression weighted by sample weight times responsibility.
MixtureFit mixture_regression(const Design& d, std::span<const double> y,
                              std::span<const double> w, const MixtureOptions& opts);

}  // namespace finer
