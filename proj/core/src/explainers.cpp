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
#include "finer/explainers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "finer/surrogate.hpp"

namespace finer {

std::string_view to_string(ExplainerId id) {
  switch (id) {
    case ExplainerId::kGradients: return "gradients";
    case ExplainerId::kIG: return "ig";
    case ExplainerId::kDeepLift: return "deeplift";
    case ExplainerId::kLime: return "lime";
    case ExplainerId::kLemna: return "lemna";
    case ExplainerId::kShapley: return "shapley";
  }
  return "unknown";
}

ExplainerId parse_explainer(std::string_view name) {
  for (auto id : kAllExplainers)
    if (to_string(id) == name) return id;
  throw ConfigError("unknown explainer '" + std::string(name) + "'");
}

bool is_gradient_family(ExplainerId id) {
  return id == ExplainerId::kGradients || id == ExplainerId::kIG || id == ExplainerId::kDeepLift;
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": baseline shape " + std::to_string(b.rows) + "x" +
                     std::to_string(b.cols) + " differs from input " + std::to_string(a.rows) +
                     "x" + std::to_string(a.cols));
}

}  // namespace

Attribution gradients_explain(const Model& model, const Matrix& xv) {
  Attribution e{model.input_gradient(xv), 1};
  for (std::size_t i = 0; i < e.values.size(); ++i) e.values.data[i] *= xv.data[i];
  return e;
}

Attribution ig_explain(const Model& model, const Matrix& xv, const Matrix& bv, std::size_t steps) {
  check_same_shape(xv, bv, "ig");
  if (steps < 1) throw ConfigError("ig needs at least one interpolation step");
  Matrix sum(xv.rows, xv.cols);
  Matrix point(xv.rows, xv.cols);
  for (std::size_t s = 0; s < steps; ++s) {
    const double alpha = (static_cast<double>(s) + 0.5) / static_cast<double>(steps);
    for (std::size_t i = 0; i < xv.size(); ++i)
      point.data[i] = bv.data[i] + alpha * (xv.data[i] - bv.data[i]);
    const Matrix g = model.input_gradient(point);
    for (std::size_t i = 0; i < g.size(); ++i) sum.data[i] += g.data[i];
  }
  Attribution e{Matrix(xv.rows, xv.cols), steps};
  for (std::size_t i = 0; i < xv.size(); ++i)
    e.values.data[i] = sum.data[i] / static_cast<double>(steps) * (xv.data[i] - bv.data[i]);
  return e;
}

Attribution deeplift_explain(const Model& model, const Matrix& xv, const Matrix& bv) {
  check_same_shape(xv, bv, "deeplift");
  const ForwardTrace tx = model.forward(xv);
  const ForwardTrace tb = model.forward(bv);
  const auto& layers = model.layers();
  constexpr double kEps = 1e-12;

  Matrix mult(1, 1, 1.0);  // d(output)/d(output)
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& layer = layers[li];
    const Matrix& in_x = li == 0 ? xv : tx.activations[li - 1];
    const Matrix& in_b = li == 0 ? bv : tb.activations[li - 1];
    const Matrix& out_x = tx.activations[li];
    const Matrix& out_b = tb.activations[li];
    switch (layer.spec.kind) {
      case LayerKind::kDense:
      case LayerKind::kConv1d:
        mult = linear_backward(layer, mult);
        break;
      case LayerKind::kRelu:
      case LayerKind::kSigmoidHead: {
        Matrix next(in_x.rows, in_x.cols);
        for (std::size_t i = 0; i < in_x.size(); ++i) {
          const double dx = in_x.data[i] - in_b.data[i];
          double m;
          if (std::abs(dx) > kEps) {
            m = (out_x.data[i] - out_b.data[i]) / dx;
          } else if (layer.spec.kind == LayerKind::kRelu) {
            m = in_x.data[i] > 0 ? 1.0 : 0.0;
          } else {
            m = out_x.data[i] * (1.0 - out_x.data[i]);
          }
          next.data[i] = mult.data[i] * m;
        }
        mult = std::move(next);
        break;
      }
      case LayerKind::kGlobalMaxPool: {
        // The positive part of the output change is credited to the input's
        // argmax row, the negative part to the baseline's argmax row; the
        // multipliers then sum exactly to the pooled difference.
        Matrix next(in_x.rows, in_x.cols);
        for (std::size_t c = 0; c < in_x.cols; ++c) {
          std::size_t ax = 0, ab = 0;
          for (std::size_t r = 1; r < in_x.rows; ++r) {
            if (in_x(r, c) > in_x(ax, c)) ax = r;
            if (in_b(r, c) > in_b(ab, c)) ab = r;
          }
          const double dy = out_x.data[c] - out_b.data[c];
          auto credit = [&](std::size_t r, double share) {
            const double dx = in_x(r, c) - in_b(r, c);
            if (std::abs(dx) > kEps) next(r, c) += mult.data[c] * share / dx;
          };
          credit(ax, std::max(0.0, dy));
          credit(ab, std::min(0.0, dy));
        }
        mult = std::move(next);
        break;
      }
      default:
        throw ShapeError("deeplift: unsupported layer kind " + std::string(to_string(layer.spec.kind)));
    }
  }
  Attribution e{Matrix(xv.rows, xv.cols), 2};
  for (std::size_t i = 0; i < xv.size(); ++i) e.values.data[i] = mult.data[i] * (xv.data[i] - bv.data[i]);
  return e;
}

ICAttribution ic_aggregate(const Attribution& e, const ICIndicator& indicator, ExplainerId id) {
  if (e.values.rows != indicator.rows || e.values.cols != indicator.cols)
    throw ShapeError("ic_aggregate: attribution and indicator shapes differ");
  ICAttribution out;
  out.explainer = id;
  out.forward_passes = e.forward_passes;
  out.scores.assign(indicator.size(), 0.0);
  for (std::size_t c = 0; c < indicator.cells.size(); ++c) {
    const int ic = indicator.cells[c];
    if (ic != kNoIC) out.scores[static_cast<std::size_t>(ic)] += std::abs(e.values.data[c]);
  }
  return out;
}

double neighborhood_kernel_width(std::size_t n_ics, double scale) {
  return std::sqrt(static_cast<double>(n_ics)) * scale;
}

namespace {

void check_neighbors(std::size_t n_neighbors, std::size_t dims) {
  if (n_neighbors < dims + 1)
    throw ConfigError("neighborhood of " + std::to_string(n_neighbors) + " samples is too small for " +
                      std::to_string(dims) + " features (need >= " + std::to_string(dims + 1) + ")");
}

// Samples on/off patterns with row 0 all-on and weights them by an
// exponential kernel over the number of switched-off features.
template <class Eval>
Neighborhood sample_patterns(std::size_t dims, const NeighborhoodOptions& opts, Eval&& eval) {
  check_neighbors(opts.n_neighbors, dims);
  Neighborhood nb;
  nb.n_ics = dims;
  nb.on.assign(opts.n_neighbors * dims, 1);
  std::mt19937_64 rng(opts.seed);
  std::bernoulli_distribution off(opts.off_probability);
  for (std::size_t i = 1; i < opts.n_neighbors; ++i)
    for (std::size_t j = 0; j < dims; ++j) nb.on[i * dims + j] = off(rng) ? 0 : 1;
  const double width = neighborhood_kernel_width(dims, opts.kernel_width_scale);
  nb.outputs.resize(opts.n_neighbors);
  nb.kernel.resize(opts.n_neighbors);
  std::vector<std::uint8_t> off_pattern(dims);
  for (std::size_t i = 0; i < opts.n_neighbors; ++i) {
    std::size_t distance = 0;
    for (std::size_t j = 0; j < dims; ++j) {
      off_pattern[j] = nb.on[i * dims + j] ? 0 : 1;
      distance += off_pattern[j];
    }
    const double dd = static_cast<double>(distance);
    nb.kernel[i] = width > 0 ? std::sqrt(std::exp(-dd * dd / (width * width))) : 1.0;
    nb.outputs[i] = eval(off_pattern);
  }
  return nb;
}

Design design_from(const Neighborhood& nb) {
  Design d;
  d.n = nb.size();
  d.p = nb.n_ics;
  d.x.assign(nb.on.begin(), nb.on.end());
  return d;
}

}  // namespace

Neighborhood sample_neighborhood(const BlackBox& f, const ICMasker& masker,
                                 const NeighborhoodOptions& opts) {
  return sample_patterns(masker.num_ics(), opts,
                         [&](std::span<const std::uint8_t> off) { return f(masker.mask_pattern(off)); });
}

ICAttribution lime_fit(const Neighborhood& nb, double ridge) {
  const LinearFit fit = weighted_least_squares(design_from(nb), nb.outputs, nb.kernel, ridge);
  ICAttribution out;
  out.explainer = ExplainerId::kLime;
  out.scores = fit.coef;
  out.forward_passes = nb.size();
  return out;
}

ICAttribution lime_explain(const BlackBox& f, const ICMasker& masker, const NeighborhoodOptions& opts) {
  if (masker.num_ics() == 0) throw DataError("lime: sample has no valid ICs");
  return lime_fit(sample_neighborhood(f, masker, opts), opts.ridge);
}

ICAttribution lemna_fit(const Neighborhood& nb, const LemnaOptions& opts) {
  if (opts.components < 1) throw ConfigError("lemna needs at least one mixture component");
  MixtureOptions mo;
  mo.components = opts.components;
  mo.penalty = opts.penalty;
  mo.ridge = opts.neighborhood.ridge;
  mo.max_iter = opts.max_iter;
  mo.tol = opts.tol;
  mo.seed = derive_seed(opts.neighborhood.seed, "lemna-em");
  const MixtureFit fit = mixture_regression(design_from(nb), nb.outputs, nb.kernel, mo);
  // Component most responsible for the unperturbed instance (row 0).
  const auto& r0 = fit.responsibilities.front();
  const std::size_t best = static_cast<std::size_t>(std::max_element(r0.begin(), r0.end()) - r0.begin());
  ICAttribution out;
  out.explainer = ExplainerId::kLemna;
  out.scores = fit.components[best].coef;
  out.forward_passes = nb.size();
  out.converged = fit.converged;
  return out;
}

ICAttribution lemna_explain(const BlackBox& f, const ICMasker& masker, const LemnaOptions& opts) {
  if (masker.num_ics() == 0) throw DataError("lemna: sample has no valid ICs");
  return lemna_fit(sample_neighborhood(f, masker, opts.neighborhood), opts);
}

namespace {

// Exact Shapley values from a full table v[S], where bit j of S keeps player j.
std::vector<double> shapley_from_table(const std::vector<double>& v, std::size_t p) {
  // weight(s) = s! (p - s - 1)! / p!
  std::vector<double> weight(p);
  for (std::size_t s = 0; s < p; ++s) {
    double lg = std::lgamma(static_cast<double>(s) + 1) + std::lgamma(static_cast<double>(p - s)) -
                std::lgamma(static_cast<double>(p) + 1);
    weight[s] = std::exp(lg);
  }
  std::vector<double> phi(p, 0.0);
  const std::size_t full = std::size_t{1} << p;
  for (std::size_t S = 0; S < full; ++S) {
    const auto size = static_cast<std::size_t>(std::popcount(S));
    if (size == p) continue;
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t bit = std::size_t{1} << j;
      if (S & bit) continue;
      phi[j] += weight[size] * (v[S | bit] - v[S]);
    }
  }
  return phi;
}

template <class Value>
ICAttribution shapley_game(std::size_t p, const ShapleyOptions& opts, Value&& value) {
  ICAttribution out;
  out.explainer = ExplainerId::kShapley;
  bool exact = opts.mode == ShapleyOptions::Mode::kExact ||
               (opts.mode == ShapleyOptions::Mode::kAuto && p <= opts.exact_cap);
  if (exact && p > opts.exact_cap)
    throw InfeasibleError("exact Shapley over " + std::to_string(p) + " players exceeds the cap of " +
                          std::to_string(opts.exact_cap) + "; use sampled mode");
  if (p == 0) return out;
  if (exact) {
    const std::size_t full = std::size_t{1} << p;
    std::vector<double> v(full);
    std::vector<std::uint8_t> off(p);
    for (std::size_t S = 0; S < full; ++S) {
      for (std::size_t j = 0; j < p; ++j) off[j] = (S >> j) & 1U ? 0 : 1;
      v[S] = value(off);
    }
    out.scores = shapley_from_table(v, p);
    out.forward_passes = full;
    return out;
  }
  if (opts.permutations < 1) throw ConfigError("sampled Shapley needs at least one permutation");
  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> perm(p);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::vector<std::uint8_t> off(p, 1);
  const double v_empty = value(off);
  std::fill(off.begin(), off.end(), 0);
  const double v_full = value(off);
  std::size_t calls = 2;
  out.scores.assign(p, 0.0);
  for (std::size_t t = 0; t < opts.permutations; ++t) {
    std::shuffle(perm.begin(), perm.end(), rng);
    std::fill(off.begin(), off.end(), 1);
    double prev = v_empty;
    for (std::size_t k = 0; k < p; ++k) {
      off[perm[k]] = 0;
      double cur;
      if (k + 1 == p) {
        cur = v_full;
      } else {
        cur = value(off);
        ++calls;
      }
      out.scores[perm[k]] += cur - prev;
      prev = cur;
    }
  }
  for (auto& s : out.scores) s /= static_cast<double>(opts.permutations);
  out.forward_passes = calls;
  return out;
}

}  // namespace

ICAttribution shapley_explain(const BlackBox& f, const ICMasker& masker, const ShapleyOptions& opts) {
  return shapley_game(masker.num_ics(), opts,
                      [&](std::span<const std::uint8_t> off) { return f(masker.mask_pattern(off)); });
}

ICAttribution lime_feature_explain(const BlackBox& f, const Matrix& xv, std::size_t features,
                                   const NeighborhoodOptions& opts) {
  if (features > xv.rows) throw ShapeError("lime_feature_explain: more features than rows");
  Matrix buf = xv;
  const Neighborhood nb = sample_patterns(features, opts, [&](std::span<const std::uint8_t> off) {
    buf = xv;
    for (std::size_t r = 0; r < features; ++r)
      if (off[r]) std::fill(buf.row(r).begin(), buf.row(r).end(), 0.0);
    return f(buf);
  });
  return lime_fit(nb, opts.ridge);
}

ICAttribution shapley_feature_explain(const BlackBox& f, const Matrix& xv, const ShapleyOptions& opts) {
  const std::size_t players = xv.size();
  if (players > opts.exact_cap)
    throw InfeasibleError("feature-level exact Shapley needs 2^" + std::to_string(players) +
                          " coalitions (cap 2^" + std::to_string(opts.exact_cap) + ")");
  ShapleyOptions exact = opts;
  exact.mode = ShapleyOptions::Mode::kExact;
  Matrix buf = xv;
  return shapley_game(players, exact, [&](std::span<const std::uint8_t> off) {
    for (std::size_t i = 0; i < players; ++i) buf.data[i] = off[i] ? 0.0 : xv.data[i];
    return f(buf);
  });
}

std::size_t neighbors_for_adequacy(std::size_t dimensions, double per_dimension) {
  return static_cast<std::size_t>(std::ceil(per_dimension * static_cast<double>(dimensions + 1)));
}

ICAttribution explain_ic(ExplainerId id, const ExplainContext& ctx, const ExplainerConfig& cfg,
                         std::uint64_t seed) {
  const std::uint64_t s = derive_seed(seed, to_string(id));
  switch (id) {
    case ExplainerId::kGradients:
      return ic_aggregate(gradients_explain(*ctx.model, *ctx.xv), *ctx.indicator, id);
    case ExplainerId::kIG:
      return ic_aggregate(ig_explain(*ctx.model, *ctx.xv, ctx.baseline, cfg.ig_steps), *ctx.indicator, id);
    case ExplainerId::kDeepLift:
      return ic_aggregate(deeplift_explain(*ctx.model, *ctx.xv, ctx.baseline), *ctx.indicator, id);
    default:
      break;
  }
  // Black-box explainers only ever see the output of the model.
  const BlackBox f = BlackBox::of(*ctx.model);
  switch (id) {
    case ExplainerId::kLime: {
      NeighborhoodOptions o = cfg.lime;
      o.seed = s;
      return lime_explain(f, *ctx.masker, o);
    }
    case ExplainerId::kLemna: {
      LemnaOptions o = cfg.lemna;
      o.neighborhood.seed = s;
      return lemna_explain(f, *ctx.masker, o);
    }
    case ExplainerId::kShapley: {
      ShapleyOptions o = cfg.shapley;
      o.seed = s;
      return shapley_explain(f, *ctx.masker, o);
    }
    default:
      throw ConfigError("unhandled explainer");
  }
}

}  // namespace finer
