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
#include "finer/surrogate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "finer/common.hpp"

namespace finer {

namespace {

// Weighted normal equations with an intercept column in front.
struct Normal {
  Eigen::MatrixXd ata;
  Eigen::VectorXd aty;
};

Normal normal_equations(const Design& d, std::span<const double> y, std::span<const double> w) {
  const Eigen::Index q = static_cast<Eigen::Index>(d.p) + 1;
  Normal ne{Eigen::MatrixXd::Zero(q, q), Eigen::VectorXd::Zero(q)};
  Eigen::VectorXd row(q);
  for (std::size_t i = 0; i < d.n; ++i) {
    if (w[i] == 0.0) continue;
    row(0) = 1.0;
    for (std::size_t j = 0; j < d.p; ++j) row(static_cast<Eigen::Index>(j) + 1) = d.at(i, j);
    ne.ata.noalias() += w[i] * row * row.transpose();
    ne.aty.noalias() += (w[i] * y[i]) * row;
  }
  return ne;
}

LinearFit unpack(const Eigen::VectorXd& beta, bool ridge_used) {
  LinearFit fit;
  fit.intercept = beta(0);
  fit.coef.assign(beta.data() + 1, beta.data() + beta.size());
  fit.ridge_used = ridge_used;
  return fit;
}

void check_inputs(const Design& d, std::span<const double> y, std::span<const double> w) {
  if (y.size() != d.n || w.size() != d.n || d.x.size() != d.n * d.p)
    throw ShapeError("surrogate fit: inconsistent design, target and weight sizes");
}

double residual(const Design& d, std::span<const double> y, const LinearFit& f, std::size_t i) {
  double pred = f.intercept;
  for (std::size_t j = 0; j < d.p; ++j) pred += f.coef[j] * d.at(i, j);
  return y[i] - pred;
}

}  // namespace

LinearFit weighted_least_squares(const Design& d, std::span<const double> y,
                                 std::span<const double> w, double ridge) {
  check_inputs(d, y, w);
  Normal ne = normal_equations(d, y, w);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ne.ata);
  lu.setThreshold(1e-10);
  if (lu.rank() == ne.ata.rows()) return unpack(lu.solve(ne.aty), false);
  for (Eigen::Index j = 1; j < ne.ata.rows(); ++j) ne.ata(j, j) += ridge;
  // The intercept stays unpenalized; add a tiny jitter in case every weight is zero.
  if (ne.ata(0, 0) <= 0.0) ne.ata(0, 0) = ridge;
  return unpack(ne.ata.ldlt().solve(ne.aty), true);
}

LinearFit fused_lasso_regression(const Design& d, std::span<const double> y,
                                 std::span<const double> w, double penalty, double ridge,
                                 const FusedLassoOptions& opts) {
  LinearFit start = weighted_least_squares(d, y, w, ridge);
  if (penalty <= 0.0 || d.p == 0) return start;

  const Normal ne = normal_equations(d, y, w);
  Eigen::MatrixXd hess = 2.0 * ne.ata;
  if (start.ridge_used)
    for (Eigen::Index j = 1; j < hess.rows(); ++j) hess(j, j) += 2.0 * ridge;
  const double lipschitz =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(hess, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
  if (!(lipschitz > 0.0)) return start;
  const double step = 1.0 / lipschitz;
  const Eigen::VectorXd lin = 2.0 * ne.aty;

  const Eigen::Index q = hess.rows();
  Eigen::VectorXd beta(q);
  beta(0) = start.intercept;
  for (std::size_t j = 0; j < d.p; ++j) beta(static_cast<Eigen::Index>(j) + 1) = start.coef[j];
  Eigen::VectorXd momentum = beta;
  double t = 1.0;
  std::vector<double> tail(d.p);
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    // gradient of beta' A'WA beta - 2 beta' A'Wy (+ ridge)
    const Eigen::VectorXd grad = hess * momentum - lin;
    Eigen::VectorXd next = momentum - step * grad;
    for (std::size_t j = 0; j < d.p; ++j) tail[j] = next(static_cast<Eigen::Index>(j) + 1);
    const auto prox = tv_denoise(tail, penalty * step);
    for (std::size_t j = 0; j < d.p; ++j) next(static_cast<Eigen::Index>(j) + 1) = prox[j];
    const double change = (next - beta).lpNorm<Eigen::Infinity>();
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    momentum = next + ((t - 1.0) / t_next) * (next - beta);
    beta = next;
    t = t_next;
    if (change < opts.tol) break;
  }
  return unpack(beta, start.ridge_used);
}

MixtureFit mixture_regression(const Design& d, std::span<const double> y,
                              std::span<const double> w, const MixtureOptions& opts) {
  check_inputs(d, y, w);
  const std::size_t n = d.n;
  const std::size_t K = std::max<std::size_t>(1, opts.components);
  MixtureFit fit;
  fit.responsibilities.assign(n, std::vector<double>(K, 1.0 / static_cast<double>(K)));
  if (K > 1) {
    std::mt19937_64 rng(opts.seed);
    std::gamma_distribution<double> gamma(1.0, 1.0);
    for (auto& r : fit.responsibilities) {
      double s = 0;
      for (auto& v : r) s += (v = gamma(rng) + 1e-12);
      for (auto& v : r) v /= s;
    }
  }

  double wsum = 0, ymean = 0;
  for (std::size_t i = 0; i < n; ++i) {
    wsum += w[i];
    ymean += w[i] * y[i];
  }
  ymean = wsum > 0 ? ymean / wsum : 0.0;
  double yvar = 0;
  for (std::size_t i = 0; i < n; ++i) yvar += w[i] * (y[i] - ymean) * (y[i] - ymean);
  yvar = wsum > 0 ? yvar / wsum : 0.0;
  const double sigma_floor = 1e-8 * yvar + 1e-12;

  fit.components.resize(K);
  fit.mixing.assign(K, 1.0 / static_cast<double>(K));
  fit.sigma2.assign(K, std::max(yvar, sigma_floor));

  MixtureFit best;
  double best_ll = -std::numeric_limits<double>::infinity();
  double prev_ll = -std::numeric_limits<double>::infinity();
  std::vector<double> cw(n);
  std::vector<std::vector<double>> logp(n, std::vector<double>(K));
  for (std::size_t iter = 0; iter < opts.max_iter; ++iter) {
    // M-step
    for (std::size_t k = 0; k < K; ++k) {
      double rsum = 0, cwsum = 0;
      for (std::size_t i = 0; i < n; ++i) {
        cw[i] = w[i] * fit.responsibilities[i][k];
        rsum += fit.responsibilities[i][k];
        cwsum += cw[i];
      }
      fit.mixing[k] = std::max(rsum / static_cast<double>(n), 1e-12);
      if (cwsum < 1e-12) {
        fit.components[k] = fused_lasso_regression(d, y, w, opts.penalty, opts.ridge);
        fit.sigma2[k] = std::max(yvar, sigma_floor);
        continue;
      }
      fit.components[k] = fused_lasso_regression(d, y, cw, opts.penalty, opts.ridge);
      double ss = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = residual(d, y, fit.components[k], i);
        ss += cw[i] * r * r;
      }
      fit.sigma2[k] = std::max(ss / cwsum, sigma_floor);
    }
    // E-step and kernel-weighted log likelihood
    double ll = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < K; ++k) {
        const double r = residual(d, y, fit.components[k], i);
        logp[i][k] = std::log(fit.mixing[k]) - 0.5 * std::log(2.0 * std::numbers::pi * fit.sigma2[k]) -
                     r * r / (2.0 * fit.sigma2[k]);
        mx = std::max(mx, logp[i][k]);
      }
      double s = 0;
      for (std::size_t k = 0; k < K; ++k) s += std::exp(logp[i][k] - mx);
      for (std::size_t k = 0; k < K; ++k) fit.responsibilities[i][k] = std::exp(logp[i][k] - mx) / s;
      ll += w[i] * (mx + std::log(s));
    }
    fit.log_likelihood = ll;
    fit.iterations = iter + 1;
    if (ll > best_ll) {
      best_ll = ll;
      best = fit;
    }
    if (std::abs(ll - prev_ll) < opts.tol) {
      fit.converged = true;
      return fit;
    }
    prev_ll = ll;
  }
  best.converged = false;
  return best;
}

}  // namespace finer
