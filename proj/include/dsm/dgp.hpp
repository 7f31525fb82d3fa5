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
// Simulation populations: the four-covariate chain, outcome and propensity
// calibrations, Poisson and systematic PPS sampling, and the analyst's
// (possibly transformed, possibly incomplete) covariate views.

#ifndef DSM_DGP_HPP_
#define DSM_DGP_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dsm/glm_scores.hpp"
#include "dsm/types.hpp"

namespace dsm {

// First letter: prognostic model; second letter: propensity model.
// F-models omit the third covariate.
enum class Scenario { kTT, kFT, kTF, kFF };

inline constexpr std::array<Scenario, 4> kAllScenarios = {Scenario::kTT, Scenario::kFT, Scenario::kTF,
                                                          Scenario::kFF};

inline std::string_view scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kTT: return "TT";
    case Scenario::kFT: return "FT";
    case Scenario::kTF: return "TF";
    case Scenario::kFF: return "FF";
  }
  return "??";
}

inline bool prognostic_correct(Scenario s) { return s == Scenario::kTT || s == Scenario::kTF; }
inline bool propensity_correct(Scenario s) { return s == Scenario::kTT || s == Scenario::kFT; }

enum class Nonlinearity {
  kNone,       // analyst sees x1..x4
  kCubic,      // x1, x2^2, x3^3, x4^2
  kAppendixB,  // x1, x2^1.15, x3^-0.85, x4^-1.15
};

struct PopulationSpec {
  Index size = 20000;
  double n_a = 500.0;   // expected Poisson sample size
  double n_b = 1000.0;  // fixed PPS sample size
  double rho = 0.3;     // target corr(y, E[y|x])
  double pps_ratio = 50.0;
};

struct PopulationFrame {
  Matrix x;      // N x 4
  Matrix z_raw;  // N x 4 latent draws
  Vector noise;  // standard normal errors
  Vector y;
  Vector cond_mean;
  Vector pi_a;
  Vector pi_b;
  double sigma = 0.0;
  double theta0 = 0.0;
  double c_pps = 0.0;

  Index size() const { return x.rows(); }
};

inline constexpr std::array<double, 4> kPropensitySlopes = {0.1, 0.2, 0.1, 0.2};

// sigma such that corr(m + sigma * eps, m) = rho for an independent unit-variance eps.
inline double calibrate_sigma(const Vector& cond_mean, double rho) {
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(ErrorCode::kRhoOutOfRange, "rho must lie in (0, 1]");
  const double n = static_cast<double>(cond_mean.size());
  const double mean = cond_mean.mean();
  const double sd = std::sqrt((cond_mean.array() - mean).square().sum() / (n - 1.0));
  return sd * std::sqrt(1.0 / (rho * rho) - 1.0);
}

inline double calibrate_sigma(const PopulationFrame& pop, double rho) { return calibrate_sigma(pop.cond_mean, rho); }

inline Vector propensity_linear_predictor(const Matrix& x) {
  Vector lin = Vector::Zero(x.rows());
  for (Index j = 0; j < 4; ++j) lin += kPropensitySlopes[static_cast<std::size_t>(j)] * x.col(j);
  return lin;
}

// Intercept theta0 with sum_i logistic(theta0 + lin_i) = target, by bisection.
inline double calibrate_theta0(const Matrix& x, double target) {
  const double n = static_cast<double>(x.rows());
  if (!(target > 0.0 && target < n)) throw Error(ErrorCode::kBracketFailure, "target must lie in (0, N)");
  const Vector lin = propensity_linear_predictor(x);
  auto total = [&](double theta0) {
    double s = 0.0;
    for (Index i = 0; i < lin.size(); ++i) s += logistic(theta0 + lin(i));
    return s;
  };
  double lo = -1.0;
  double hi = 1.0;
  while (total(lo) > target) {
    lo *= 2.0;
    if (lo < -1e4) throw Error(ErrorCode::kBracketFailure, "no lower bracket for theta0");
  }
  while (total(hi) < target) {
    hi *= 2.0;
    if (hi > 1e4) throw Error(ErrorCode::kBracketFailure, "no upper bracket for theta0");
  }
  double mid = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double v = total(mid);
    if (std::abs(v - target) <= 1e-9 * std::max(1.0, target)) break;
    (v < target ? lo : hi) = mid;
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mid))) break;
  }
  return mid;
}

inline double calibrate_theta0(const PopulationFrame& pop, double target) { return calibrate_theta0(pop.x, target); }

struct PpsCalibration {
  double c = 0.0;
  Vector pi;
};

// pi_i proportional to c + x3_i with max/min size ratio `ratio`, summing to
// `target`. Probabilities above one are fixed at one and the rest rescaled.
inline PpsCalibration calibrate_pps(const Vector& x3, double target, double ratio = 50.0) {
  if (!(ratio > 1.0)) throw Error(ErrorCode::kInfeasibleRatio, "size ratio must exceed 1");
  const double lo = x3.minCoeff();
  const double hi = x3.maxCoeff();
  PpsCalibration out;
  out.c = (hi - ratio * lo) / (ratio - 1.0);
  if (!(out.c + lo > 0.0)) throw Error(ErrorCode::kInfeasibleRatio, "sizes c + x3 are not all positive");
  if (!(target > 0.0 && target <= static_cast<double>(x3.size()))) {
    throw Error(ErrorCode::kInvalidArgument, "PPS target must lie in (0, N]");
  }
  const Vector size = x3.array() + out.c;
  std::vector<bool> fixed(static_cast<std::size_t>(x3.size()), false);
  out.pi.resize(x3.size());
  for (int pass = 0; pass <= x3.size(); ++pass) {
    double free_size = 0.0;
    double n_fixed = 0.0;
    for (Index i = 0; i < x3.size(); ++i) {
      if (fixed[static_cast<std::size_t>(i)]) {
        n_fixed += 1.0;
      } else {
        free_size += size(i);
      }
    }
    const double remaining = target - n_fixed;
    bool clipped = false;
    for (Index i = 0; i < x3.size(); ++i) {
      if (fixed[static_cast<std::size_t>(i)]) {
        out.pi(i) = 1.0;
        continue;
      }
      out.pi(i) = remaining * size(i) / free_size;
      if (out.pi(i) > 1.0) {
        fixed[static_cast<std::size_t>(i)] = true;
        clipped = true;
      }
    }
    if (!clipped) break;
  }
  return out;
}

inline PopulationFrame gen_population(const PopulationSpec& spec, std::mt19937_64& rng) {
  if (spec.size < 1) throw Error(ErrorCode::kInvalidArgument, "population size must be positive");
  const Index n = spec.size;
  std::bernoulli_distribution z1(0.5);
  std::uniform_real_distribution<double> z2(0.0, 2.0);
  std::exponential_distribution<double> z3(1.0);
  std::chi_squared_distribution<double> z4(4.0);
  std::normal_distribution<double> eps(0.0, 1.0);

  PopulationFrame pop;
  pop.z_raw.resize(n, 4);
  pop.x.resize(n, 4);
  pop.noise.resize(n);
  for (Index i = 0; i < n; ++i) {
    pop.z_raw(i, 0) = z1(rng) ? 1.0 : 0.0;
    pop.z_raw(i, 1) = z2(rng);
    pop.z_raw(i, 2) = z3(rng);
    pop.z_raw(i, 3) = z4(rng);
    pop.noise(i) = eps(rng);
    const double x1 = pop.z_raw(i, 0);
    const double x2 = pop.z_raw(i, 1) + 0.3 * x1;
    const double x3 = pop.z_raw(i, 2) + 0.2 * (x1 + x2);
    const double x4 = pop.z_raw(i, 3) + 0.1 * (x1 + x2 + x3);
    pop.x.row(i) << x1, x2, x3, x4;
  }
  pop.cond_mean = (2.0 + pop.x.rowwise().sum().array()).matrix();
  pop.sigma = calibrate_sigma(pop.cond_mean, spec.rho);
  pop.y = pop.cond_mean + pop.sigma * pop.noise;

  pop.theta0 = calibrate_theta0(pop.x, spec.n_a);
  const Vector lin = propensity_linear_predictor(pop.x);
  pop.pi_a = (lin.array() + pop.theta0).unaryExpr([](double e) { return logistic(e); }).matrix();

  PpsCalibration pps = calibrate_pps(pop.x.col(2), spec.n_b, spec.pps_ratio);
  pop.c_pps = pps.c;
  pop.pi_b = std::move(pps.pi);
  return pop;
}

// Independent Bernoulli(pi_i) inclusion; returns ascending unit indices.
inline std::vector<Index> poisson_sample(const Vector& pi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Index> out;
  for (Index i = 0; i < pi.size(); ++i) {
    if (unit(rng) < pi(i)) out.push_back(i);
  }
  return out;
}

// Systematic PPS on a uniformly permuted frame: fixed size n_b with
// first-order inclusion probabilities pi_b. Returns ascending unit indices.
inline std::vector<Index> pps_sample(const Vector& pi_b, Index n_b, std::mt19937_64& rng) {
  const double total = pi_b.sum();
  if (std::abs(total - static_cast<double>(n_b)) > 1e-6) {
    throw Error(ErrorCode::kInvalidArgument, "inclusion probabilities must sum to the sample size");
  }
  if (pi_b.size() > 0 && (pi_b.maxCoeff() > 1.0 + 1e-12 || pi_b.minCoeff() < 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "inclusion probabilities must lie in [0, 1]");
  }
  std::vector<Index> order(static_cast<std::size_t>(pi_b.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double start = unit(rng);
  // Rescale so the cumulative total is exactly n_b.
  const double scale = static_cast<double>(n_b) / total;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(n_b));
  double cumulative = 0.0;
  Index next = 0;  // index of the next selection point start + next
  for (Index unit_id : order) {
    cumulative += pi_b(unit_id) * scale;
    if (next < n_b && start + static_cast<double>(next) < cumulative) {
      out.push_back(unit_id);
      ++next;
    }
  }
  // Floating-point shortfall at the very end of the frame.
  while (next < n_b) {
    for (auto it = order.rbegin(); it != order.rend() && next < n_b; ++it) {
      if (std::find(out.begin(), out.end(), *it) == out.end()) {
        out.push_back(*it);
        ++next;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct AnalystViews {
  Matrix x;  // transformed covariates, four columns
  std::vector<Index> propensity_columns;
  std::vector<Index> prognostic_columns;
};

namespace detail {

inline void transform_column(Eigen::Ref<Vector> col, double exponent) {
  const bool integer = exponent == std::round(exponent);
  for (Index i = 0; i < col.size(); ++i) {
    const double v = col(i);
    if ((exponent < 0.0 && !(v > 0.0)) || (!integer && v < 0.0)) {
      throw Error(ErrorCode::kDomainError, "covariate base invalid for exponent " + std::to_string(exponent));
    }
    col(i) = std::pow(v, exponent);
  }
}

}  // namespace detail

inline std::array<double, 4> view_exponents(Nonlinearity mode) {
  switch (mode) {
    case Nonlinearity::kNone: return {1.0, 1.0, 1.0, 1.0};
    case Nonlinearity::kCubic: return {1.0, 2.0, 3.0, 2.0};
    case Nonlinearity::kAppendixB: return {1.0, 1.15, -0.85, -1.15};
  }
  return {1.0, 1.0, 1.0, 1.0};
}

inline AnalystViews apply_scenario_views(const Matrix& x, Nonlinearity mode, Scenario scenario,
                                         Index omitted_column = 3) {
  if (x.cols() != 4) throw Error(ErrorCode::kShapeMismatch, "scenario views expect four covariates");
  AnalystViews v;
  v.x = x;
  const auto exps = view_exponents(mode);
  for (Index j = 0; j < 4; ++j) {
    if (exps[static_cast<std::size_t>(j)] != 1.0) detail::transform_column(v.x.col(j), exps[static_cast<std::size_t>(j)]);
  }
  if (omitted_column < 0 || omitted_column > 3) {
    throw Error(ErrorCode::kInvalidArgument, "omitted column must be one of the four covariates");
  }
  const std::vector<Index> full = {0, 1, 2, 3};
  std::vector<Index> omitted;
  for (Index j : full) {
    if (j != omitted_column) omitted.push_back(j);
  }
  v.prognostic_columns = prognostic_correct(scenario) ? full : omitted;
  v.propensity_columns = propensity_correct(scenario) ? full : omitted;
  return v;
}

}  // namespace dsm

#endif  // DSM_DGP_HPP_
