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
// Point estimators built on a match plan: the probability-sample mean, the
// design-weighted (Hajek) population mean, their model-based de-biased
// versions, and the doubly robust AIPW benchmark.

#ifndef DSM_ESTIMATORS_HPP_
#define DSM_ESTIMATORS_HPP_

#include <algorithm>
#include <limits>

#include "dsm/glm_scores.hpp"
#include "dsm/matcher.hpp"
#include "dsm/types.hpp"

namespace dsm {

namespace detail {

inline void check_plan(const MatchPlan& plan, const SampleA& a, const SampleB& b) {
  if (plan.n_a != a.size() || plan.n_b != b.size()) {
    throw Error(ErrorCode::kShapeMismatch, "match plan does not fit the samples");
  }
}

// Average over B rows of (1/M) sum_m (g(x_{j_m}) - g(x_i)), optionally d-weighted.
inline double matching_discrepancy(const MatchPlan& plan, const Vector& g_a, const Vector& g_b,
                                   const Vector* weights) {
  double total = 0.0;
  double norm = 0.0;
  for (Index i = 0; i < plan.n_b; ++i) {
    double s = 0.0;
    for (Index j : plan.j_set(i)) s += g_a(j) - g_b(i);
    const double w = weights ? (*weights)(i) : 1.0;
    total += w * s / static_cast<double>(plan.m);
    norm += w;
  }
  return total / norm;
}

}  // namespace detail

// Mean of the imputed B outcomes.
inline double mu_b(const MatchPlan& plan, const Vector& y_a) { return impute(plan, y_a).mean(); }

// Same quantity through the donor counts: (1/N_B) sum_A (K_M / M) y_i.
inline double mu_b_dual(const MatchPlan& plan, const Vector& y_a) {
  if (y_a.size() != plan.n_a) throw Error(ErrorCode::kShapeMismatch, "outcome length differs from N_A");
  double s = 0.0;
  for (Index i = 0; i < plan.n_a; ++i) {
    s += static_cast<double>(plan.k_counts[static_cast<std::size_t>(i)]) * y_a(i);
  }
  return s / (static_cast<double>(plan.m) * static_cast<double>(plan.n_b));
}

// Predicted matching bias: matched-donor prediction minus own prediction.
inline double bias_hat(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a, const SampleB& b) {
  detail::check_plan(plan, a, b);
  return detail::matching_discrepancy(plan, predict_prognostic(fit, a.x), predict_prognostic(fit, b.x),
                                      nullptr);
}

inline double mu_b_debiased(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a,
                            const SampleB& b) {
  return mu_b(plan, a.y) - bias_hat(plan, fit, a, b);
}

// Residual form: (1/N_B) sum_A (K_M/M)(y_i - g_i) + (1/N_B) sum_B g_i.
inline double mu_b_debiased_residual_form(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a,
                                          const SampleB& b) {
  detail::check_plan(plan, a, b);
  const Vector g_a = predict_prognostic(fit, a.x);
  const Vector g_b = predict_prognostic(fit, b.x);
  double s = 0.0;
  for (Index i = 0; i < plan.n_a; ++i) {
    s += static_cast<double>(plan.k_counts[static_cast<std::size_t>(i)]) * (a.y(i) - g_a(i));
  }
  const double n_b = static_cast<double>(plan.n_b);
  return s / (static_cast<double>(plan.m) * n_b) + g_b.sum() / n_b;
}

// Hajek mean of the imputations: (1/N_hat) sum_B d_i y_hat_i.
inline double mu_dsm(const MatchPlan& plan, const Vector& y_a, const SampleB& b) {
  if (plan.n_b != b.size()) throw Error(ErrorCode::kShapeMismatch, "match plan does not fit sample B");
  const Vector y_hat = impute(plan, y_a);
  return b.d.dot(y_hat) / b.d.sum();
}

// Design-weighted matching bias, oriented like bias_hat (matched minus own)
// so that equal weights reproduce the unweighted correction.
inline double bias_hat_weighted(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a,
                                const SampleB& b) {
  detail::check_plan(plan, a, b);
  return detail::matching_discrepancy(plan, predict_prognostic(fit, a.x), predict_prognostic(fit, b.x),
                                      &b.d);
}

inline double mu_dsm_debiased(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a,
                              const SampleB& b) {
  return mu_dsm(plan, a.y, b) - bias_hat_weighted(plan, fit, a, b);
}

// (1/N_hat) sum_A (Kbar_M/M)(y_i - g_i) + (1/N_hat) sum_B d_i g_i.
inline double mu_dsm_debiased_residual_form(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a,
                                            const SampleB& b) {
  detail::check_plan(plan, a, b);
  const Vector g_a = predict_prognostic(fit, a.x);
  const Vector g_b = predict_prognostic(fit, b.x);
  const double n_hat = b.d.sum();
  const double a_term = plan.k_weighted.dot(a.y - g_a) / static_cast<double>(plan.m);
  return (a_term + b.d.dot(g_b)) / n_hat;
}

struct DreResult {
  double value = 0.0;
  double min_propensity = 0.0;
  bool extreme_propensity = false;  // some sample-A propensity below 1e-6
};

inline constexpr double kExtremePropensity = 1e-6;

// AIPW: (1/N_hat_A) sum_A (y_i - g_i)/f_i + (1/N_hat) sum_B d_i g_i with
// N_hat_A = sum_A 1/f_i and N_hat = sum_B d_i.
inline DreResult dre_estimate(const ScoreFit& fit, const SampleA& a, const SampleB& b) {
  validate(a, b);
  const Vector f_a = predict_propensity(fit, a.x);
  const Vector g_a = predict_prognostic(fit, a.x);
  const Vector g_b = predict_prognostic(fit, b.x);
  const Vector inv_f = f_a.cwiseInverse();
  DreResult r;
  r.min_propensity = f_a.minCoeff();
  r.extreme_propensity = r.min_propensity < kExtremePropensity;
  r.value = inv_f.dot(a.y - g_a) / inv_f.sum() + b.d.dot(g_b) / b.d.sum();
  return r;
}

struct PointEstimates {
  double mu_B = 0.0;
  double mu_B_debiased = 0.0;
  double bias_hat = 0.0;
  double mu_psi_dsm = 0.0;
  double mu_dsm_debiased = 0.0;
  double bias_hat_weighted = 0.0;
  double n_hat = 0.0;
};

inline PointEstimates point_estimates(const MatchPlan& plan, const ScoreFit& fit, const SampleA& a,
                                      const SampleB& b) {
  PointEstimates e;
  e.mu_B = mu_b(plan, a.y);
  e.bias_hat = bias_hat(plan, fit, a, b);
  e.mu_B_debiased = e.mu_B - e.bias_hat;
  e.mu_psi_dsm = mu_dsm(plan, a.y, b);
  e.bias_hat_weighted = bias_hat_weighted(plan, fit, a, b);
  e.mu_dsm_debiased = e.mu_psi_dsm - e.bias_hat_weighted;
  e.n_hat = b.d.sum();
  return e;
}

}  // namespace dsm

#endif  // DSM_ESTIMATORS_HPP_
