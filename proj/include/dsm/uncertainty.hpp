/*
* Copyright 2026 The DSM Authors.
*
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
* ============================================================================
*/
// Residual variance, the analytic matching variance, and wild-bootstrap
// intervals with Mammen two-point multipliers.
//
// Multipliers are keyed by (seed, replicate, unit). Sample-A unit i uses
// unit id i and sample-B unit i uses id N_A + i, so the three interval
// procedures see the same multiplier for the same unit and replicate.

#ifndef DSM_UNCERTAINTY_HPP_
#define DSM_UNCERTAINTY_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dsm/estimators.hpp"
#include "dsm/glm_scores.hpp"
#include "dsm/matcher.hpp"
#include "dsm/parallel.hpp"
#include "dsm/rng.hpp"
#include "dsm/types.hpp"

namespace dsm {

struct BootstrapSpec {
  Index replicates = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: worker_count()

  void validate() const {
    if (replicates < 2) throw Error(ErrorCode::kInvalidArgument, "bootstrap needs at least 2 replicates");
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must lie in (0, 1)");
  }
};

struct IntervalReport {
  double point = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  double q_lo = 0.0;  // alpha/2 quantile of the residual draws
  double q_hi = 0.0;  // 1 - alpha/2 quantile
  std::vector<double> draws;

  bool contains(double value) const { return lo < value && value < hi; }
};

inline const double kSqrt5 = std::sqrt(5.0);
inline const double kMammenLow = -(kSqrt5 - 1.0) / 2.0;
inline const double kMammenHigh = (kSqrt5 + 1.0) / 2.0;
inline const double kMammenLowProbability = (kSqrt5 + 1.0) / (2.0 * kSqrt5);

template <typename Urbg>
double mammen_draw(Urbg& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < kMammenLowProbability ? kMammenLow : kMammenHigh;
}

// Counter-based multiplier for one unit in the replicate keyed by `key`.
inline double mammen_weight(std::uint64_t key, std::uint64_t unit) {
  return bits_to_unit(counter_bits(key, unit)) < kMammenLowProbability ? kMammenLow : kMammenHigh;
}

inline double mammen_weight(std::uint64_t seed, std::uint64_t replicate, std::uint64_t unit) {
  return mammen_weight(stream_key(seed, replicate), unit);
}

// Type-7 (linear interpolation) quantile of an ascending sample.
inline double quantile_type7(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// draws[b] = sum_u coefficients[u] * w_u^(b).
inline std::vector<double> wild_bootstrap_draws(std::span<const double> coefficients, const BootstrapSpec& spec) {
  spec.validate();
  std::vector<double> draws(static_cast<std::size_t>(spec.replicates));
  parallel_for(
      draws.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t b = begin; b < end; ++b) {
          const std::uint64_t key = stream_key(spec.seed, b);
          double acc = 0.0;
          for (std::size_t u = 0; u < coefficients.size(); ++u) {
            acc += coefficients[u] * mammen_weight(key, u);
          }
          draws[b] = acc;
        }
      },
      spec.threads);
  return draws;
}

// Basic-bootstrap orientation: [point - q_{1-alpha/2}, point - q_{alpha/2}].
inline IntervalReport basic_interval(double point, std::vector<double> draws, double alpha) {
  IntervalReport r;
  r.point = point;
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  r.q_lo = quantile_type7(sorted, alpha / 2.0);
  r.q_hi = quantile_type7(sorted, 1.0 - alpha / 2.0);
  r.lo = point - r.q_hi;
  r.hi = point - r.q_lo;
  r.draws = std::move(draws);
  return r;
}

inline double sigma2_unit(const InnerNeighbors& inner, const Vector& y_a, Index i) {
  double s = 0.0;
  for (Index l : inner.l_set(i)) s += y_a(l);
  const double j = static_cast<double>(inner.j);
  const double r = y_a(i) - s / j;
  return j / (j + 1.0) * r * r;
}

inline Vector sigma2_all(const InnerNeighbors& inner, const Vector& y_a) {
  if (y_a.size() != inner.n_a) throw Error(ErrorCode::kShapeMismatch, "outcome length differs from N_A");
  Vector out(inner.n_a);
  for (Index i = 0; i < inner.n_a; ++i) out(i) = sigma2_unit(inner, y_a, i);
  return out;
}

// Pooled residual variance: the average of sigma2 over the donors of the B
// rows, i.e. the K_M-weighted mean of the per-unit values.
inline double sigma2_homoskedastic(const InnerNeighbors& inner, const MatchPlan& plan, const Vector& y_a) {
  const Vector s2 = sigma2_all(inner, y_a);
  double num = 0.0;
  double den = 0.0;
  for (Index i = 0; i < plan.n_a; ++i) {
    const auto k = static_cast<double>(plan.k_counts[static_cast<std::size_t>(i)]);
    num += k * s2(i);
    den += k;
  }
  return num / den;
}

// V = (1/N_B) sum_B (y_hat_i - mu)^2 + (1/N_B) sum_A K(K-1)/M^2 sigma2_i.
// The standard error of mu_B is sqrt(V / N_B).
inline double analytic_variance(const MatchPlan& plan, const Vector& y_a, double mu_b_hat,
                                const InnerNeighbors& inner, bool homoskedastic = false) {
  const Vector y_hat = impute(plan, y_a);
  const double n_b = static_cast<double>(plan.n_b);
  const double m2 = static_cast<double>(plan.m) * static_cast<double>(plan.m);
  const double heterogeneity = (y_hat.array() - mu_b_hat).square().sum() / n_b;
  const Vector s2 = sigma2_all(inner, y_a);
  const double pooled = homoskedastic ? sigma2_homoskedastic(inner, plan, y_a) : 0.0;
  double conditional = 0.0;
  for (Index i = 0; i < plan.n_a; ++i) {
    const auto k = static_cast<double>(plan.k_counts[static_cast<std::size_t>(i)]);
    conditional += k * (k - 1.0) / m2 * (homoskedastic ? pooled : s2(i));
  }
  return heterogeneity + conditional / n_b;
}

inline double analytic_std_error(double variance, Index n_b) {
  return std::sqrt(variance / static_cast<double>(n_b));
}

// Plain interval: A-units only, residuals centred at the point estimate.
inline IntervalReport bootstrap_ci_plain(const MatchPlan& plan, const Vector& y_a, double mu_b_hat,
                                         const BootstrapSpec& spec) {
  if (y_a.size() != plan.n_a) throw Error(ErrorCode::kShapeMismatch, "outcome length differs from N_A");
  const double scale = 1.0 / (static_cast<double>(plan.m) * static_cast<double>(plan.n_b));
  std::vector<double> coef(static_cast<std::size_t>(plan.n_a));
  for (Index i = 0; i < plan.n_a; ++i) {
    coef[static_cast<std::size_t>(i)] =
        static_cast<double>(plan.k_counts[static_cast<std::size_t>(i)]) * (y_a(i) - mu_b_hat) * scale;
  }
  return basic_interval(mu_b_hat, wild_bootstrap_draws(coef, spec), spec.alpha);
}

namespace detail {

// Coefficients for the residual-form bootstraps: A units carry
// count_i (y_i - g_i) / (M * norm), B units carry weight_i (g_i - point) / norm.
inline std::vector<double> debiased_coefficients(const MatchPlan& plan, const Vector& counts,
                                                 const Vector& weights_b, double norm, const Vector& y_a,
                                                 const Vector& g_a, const Vector& g_b, double point) {
  std::vector<double> coef(static_cast<std::size_t>(plan.n_a + plan.n_b));
  const double m = static_cast<double>(plan.m);
  for (Index i = 0; i < plan.n_a; ++i) {
    coef[static_cast<std::size_t>(i)] = counts(i) * (y_a(i) - g_a(i)) / (m * norm);
  }
  for (Index i = 0; i < plan.n_b; ++i) {
    coef[static_cast<std::size_t>(plan.n_a + i)] = weights_b(i) * (g_b(i) - point) / norm;
  }
  return coef;
}

}  // namespace detail

// De-biased residuals for the probability-sample mean.
inline IntervalReport bootstrap_ci_debiased(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a,
                                            const SampleB& b, double mu_b_d, const BootstrapSpec& spec) {
  detail::check_plan(plan, a, b);
  Vector counts(plan.n_a);
  for (Index i = 0; i < plan.n_a; ++i) counts(i) = static_cast<double>(plan.k_counts[static_cast<std::size_t>(i)]);
  const auto coef = detail::debiased_coefficients(plan, counts, Vector::Ones(plan.n_b),
                                                  static_cast<double>(plan.n_b), a.y,
                                                  predict_prognostic(fit, a.x), predict_prognostic(fit, b.x), mu_b_d);
  return basic_interval(mu_b_d, wild_bootstrap_draws(coef, spec), spec.alpha);
}

// Design-weighted de-biased residuals for the population mean.
inline IntervalReport bootstrap_ci_population(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a,
                                              const SampleB& b, double mu_dsm_d, const BootstrapSpec& spec) {
  detail::check_plan(plan, a, b);
  const auto coef = detail::debiased_coefficients(plan, plan.k_weighted, b.d, b.d.sum(), a.y,
                                                  predict_prognostic(fit, a.x), predict_prognostic(fit, b.x),
                                                  mu_dsm_d);
  return basic_interval(mu_dsm_d, wild_bootstrap_draws(coef, spec), spec.alpha);
}

}  // namespace dsm

#endif  // DSM_UNCERTAINTY_HPP_
