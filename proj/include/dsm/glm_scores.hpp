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
// Propensity (weighted logistic) and prognostic (least squares) score models,
// and the normalized two-column score matrix used as the matching metric.

#ifndef DSM_GLM_SCORES_HPP_
#define DSM_GLM_SCORES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "dsm/types.hpp"

namespace dsm {

struct FitOptions {
  double tol = 1e-8;  // max-norm of the per-unit-weight gradient
  int max_iter = 100;
  // Covariate columns entering each model; empty selects all columns.
  std::vector<Index> propensity_columns;
  std::vector<Index> prognostic_columns;
};

namespace detail {

inline std::vector<Index> resolve_columns(const std::vector<Index>& requested, Index k) {
  if (requested.empty()) {
    std::vector<Index> all(static_cast<std::size_t>(k));
    std::iota(all.begin(), all.end(), Index{0});
    return all;
  }
  std::vector<Index> sorted = requested;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error(ErrorCode::kInvalidArgument, "duplicate model column");
  }
  for (Index c : requested) {
    if (c < 0 || c >= k) throw Error(ErrorCode::kInvalidArgument, "model column out of range");
  }
  return requested;
}

inline Matrix select_columns(const Matrix& x, const std::vector<Index>& cols) {
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = x.col(cols[j]);
  return out;
}

// Centers and scales covariates before fitting; coefficients are mapped back
// to the raw parameterization afterwards.
struct Standardizer {
  Vector center;
  Vector scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const double n = static_cast<double>(x.rows());
    s.center = x.colwise().mean().transpose();
    s.scale.resize(x.cols());
    for (Index j = 0; j < x.cols(); ++j) {
      const double ss = (x.col(j).array() - s.center(j)).square().sum();
      const double sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
      if (!(sd > 1e-12 * std::max(1.0, std::abs(s.center(j))))) {
        throw Error(ErrorCode::kRankDeficient,
                    "covariate column " + std::to_string(j) + " is constant");
      }
      s.scale(j) = sd;
    }
    return s;
  }

  Matrix design(const Matrix& x) const {
    Matrix z(x.rows(), x.cols() + 1);
    z.col(0).setOnes();
    for (Index j = 0; j < x.cols(); ++j) {
      z.col(j + 1) = (x.col(j).array() - center(j)) / scale(j);
    }
    return z;
  }

  Vector to_raw(const Vector& theta) const {
    Vector raw(theta.size());
    raw(0) = theta(0);
    for (Index j = 0; j < center.size(); ++j) {
      raw(j + 1) = theta(j + 1) / scale(j);
      raw(0) -= raw(j + 1) * center(j);
    }
    return raw;
  }
};

inline Matrix raw_design(const Matrix& x) {
  Matrix z(x.rows(), x.cols() + 1);
  z.col(0).setOnes();
  z.rightCols(x.cols()) = x;
  return z;
}

inline void require_full_rank(const Matrix& design, const char* what) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < design.cols()) {
    throw Error(ErrorCode::kRankDeficient, std::string(what) + " design matrix is rank deficient");
  }
}

// log(1 + exp(eta)) without overflow.
inline double log1pexp(double eta) {
  return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

}  // namespace detail

inline double logistic(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

struct PropensityFit {
  Vector theta;  // raw coefficients, intercept first
  int iterations = 0;
  double gradient_norm = 0.0;
  std::vector<double> objective_trace;  // per-unit-weight objective after each accepted step
};

// Maximizes sum_A log(f / (1 - f)) + sum_B d_i log(1 - f), f = logistic(x'theta),
// by Newton-Raphson with step halving. Convergence is tested on the gradient
// divided by the total weight N_A + sum(d).
inline PropensityFit fit_propensity(const SampleA& a, const SampleB& b, const FitOptions& opts = {}) {
  validate(a, b);
  const auto cols = detail::resolve_columns(opts.propensity_columns, a.x.cols());
  const Matrix xa = detail::select_columns(a.x, cols);
  const Matrix xb = detail::select_columns(b.x, cols);
  Matrix pooled(xa.rows() + xb.rows(), xa.cols());
  pooled << xa, xb;

  const detail::Standardizer stdz = detail::Standardizer::fit(pooled);
  const Matrix za = stdz.design(xa);
  const Matrix zb = stdz.design(xb);
  detail::require_full_rank(stdz.design(pooled), "propensity");

  const double n_a = static_cast<double>(a.size());
  const double d_sum = b.d.sum();
  const double total = n_a + d_sum;
  const Vector a_part = za.colwise().sum().transpose() / total;

  auto objective = [&](const Vector& theta) {
    const Vector eta = zb * theta;
    double s = 0.0;
    for (Index i = 0; i < eta.size(); ++i) s += b.d(i) * detail::log1pexp(eta(i));
    return a_part.dot(theta) - s / total;
  };

  const Index p = za.cols();
  Vector theta = Vector::Zero(p);
  const double f0 = std::clamp(n_a / d_sum, 1e-6, 1.0 - 1e-6);
  theta(0) = std::log(f0 / (1.0 - f0));

  PropensityFit out;
  double current = objective(theta);
  out.objective_trace.push_back(current);
  bool converged = false;
  for (int iter = 0;; ++iter) {
    const Vector eta = zb * theta;
    Vector wf(eta.size());
    Vector wh(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
      const double f = logistic(eta(i));
      wf(i) = b.d(i) * f;
      wh(i) = b.d(i) * f * (1.0 - f);
    }
    const Vector grad = a_part - zb.transpose() * wf / total;
    out.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    out.iterations = iter;
    if (out.gradient_norm <= opts.tol) {
      converged = true;
      break;
    }
    if (iter >= opts.max_iter) break;

    const Matrix info = zb.transpose() * wh.asDiagonal() * zb / total;
    Eigen::LDLT<Matrix> ldlt(info);
    Vector step;
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) step = ldlt.solve(grad);
    if (step.size() != p || !step.allFinite()) {
      throw Error(ErrorCode::kSeparation, "propensity information matrix is singular");
    }

    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const Vector cand = theta + t * step;
      const double value = objective(cand);
      if (std::isfinite(value) && value >= current) {
        theta = cand;
        current = value;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no ascent direction left at machine precision
    out.objective_trace.push_back(current);
    if (stdz.to_raw(theta).norm() > 1e6) {
      throw Error(ErrorCode::kSeparation, "propensity coefficients diverge");
    }
  }

  out.theta = stdz.to_raw(theta);
  const Vector eta_all = stdz.design(pooled) * theta;
  for (Index i = 0; i < eta_all.size(); ++i) {
    const double f = logistic(eta_all(i));
    if (f < 1e-12 || f > 1.0 - 1e-12) {
      throw Error(ErrorCode::kSeparation, "fitted propensities pinned at 0 or 1");
    }
  }
  if (!converged) {
    throw Error(ErrorCode::kNonConvergence,
                "propensity Newton iterations did not reach tolerance (gradient " +
                    std::to_string(out.gradient_norm) + ")");
  }
  return out;
}

struct PrognosticFit {
  Vector theta;  // raw coefficients, intercept first
  double rss = 0.0;
};

// Unweighted least squares of y on the selected covariates of sample A.
inline PrognosticFit fit_prognostic(const SampleA& a, const FitOptions& opts = {}) {
  validate(a);
  const auto cols = detail::resolve_columns(opts.prognostic_columns, a.x.cols());
  const Matrix xa = detail::select_columns(a.x, cols);
  if (a.size() < xa.cols() + 1) {
    throw Error(ErrorCode::kRankDeficient, "sample A has fewer rows than prognostic parameters");
  }
  const detail::Standardizer stdz = detail::Standardizer::fit(xa);
  const Matrix za = stdz.design(xa);
  Eigen::ColPivHouseholderQR<Matrix> qr(za);
  qr.setThreshold(1e-10);
  if (qr.rank() < za.cols()) {
    throw Error(ErrorCode::kRankDeficient, "prognostic design matrix is rank deficient");
  }
  const Vector theta = qr.solve(a.y);
  PrognosticFit out;
  out.theta = stdz.to_raw(theta);
  out.rss = (a.y - za * theta).squaredNorm();
  return out;
}

// Fitted propensity and prognostic models plus the pooled score SDs.
struct ScoreFit {
  Vector theta_r;
  Vector theta_y;
  std::vector<Index> propensity_columns;
  std::vector<Index> prognostic_columns;
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  double sd_f = 0.0;
  double sd_g = 0.0;
};

inline Vector predict_propensity(const ScoreFit& fit, const Matrix& x) {
  const Vector eta = detail::raw_design(detail::select_columns(x, fit.propensity_columns)) * fit.theta_r;
  return eta.unaryExpr([](double e) { return logistic(e); });
}

inline Vector predict_prognostic(const ScoreFit& fit, const Matrix& x) {
  return detail::raw_design(detail::select_columns(x, fit.prognostic_columns)) * fit.theta_y;
}

namespace detail {

inline double sample_sd(const Vector& v) {
  if (v.size() < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
}

inline Vector pooled(const Vector& first, const Vector& second) {
  Vector out(first.size() + second.size());
  out << first, second;
  return out;
}

}  // namespace detail

inline ScoreFit fit_scores(const SampleA& a, const SampleB& b, const FitOptions& opts = {}) {
  ScoreFit fit;
  const PropensityFit prop = fit_propensity(a, b, opts);
  const PrognosticFit prog = fit_prognostic(a, opts);
  fit.theta_r = prop.theta;
  fit.theta_y = prog.theta;
  fit.propensity_columns = detail::resolve_columns(opts.propensity_columns, a.x.cols());
  fit.prognostic_columns = detail::resolve_columns(opts.prognostic_columns, a.x.cols());
  fit.converged = true;
  fit.iterations = prop.iterations;
  fit.gradient_norm = prop.gradient_norm;
  fit.sd_f = detail::sample_sd(detail::pooled(predict_propensity(fit, a.x), predict_propensity(fit, b.x)));
  fit.sd_g = detail::sample_sd(detail::pooled(predict_prognostic(fit, a.x), predict_prognostic(fit, b.x)));
  return fit;
}

// Rows 0..N_A-1 hold sample A, rows N_A..N_A+N_B-1 hold sample B.
struct ScoreMatrix {
  Matrix z;
  std::vector<std::uint8_t> membership;  // 1 = sample A
  Index n_a = 0;
  Index n_b = 0;
};

inline ScoreMatrix build_score_matrix(const SampleA& a, const SampleB& b, const ScoreFit& fit) {
  if (!fit.converged) throw Error(ErrorCode::kInvalidArgument, "score fit has not converged");
  validate(a, b);
  const Vector f = detail::pooled(predict_propensity(fit, a.x), predict_propensity(fit, b.x));
  const Vector g = detail::pooled(predict_prognostic(fit, a.x), predict_prognostic(fit, b.x));
  const double sd_f = detail::sample_sd(f);
  const double sd_g = detail::sample_sd(g);
  auto degenerate = [](double sd, const Vector& v) {
    return !(sd > 1e-10 * std::max(1.0, v.cwiseAbs().maxCoeff()));
  };
  if (degenerate(sd_f, f)) throw Error(ErrorCode::kDegenerateScore, "propensity score has zero spread");
  if (degenerate(sd_g, g)) throw Error(ErrorCode::kDegenerateScore, "prognostic score has zero spread");

  ScoreMatrix s;
  s.n_a = a.size();
  s.n_b = b.size();
  s.z.resize(f.size(), 2);
  s.z.col(0) = f / sd_f;
  s.z.col(1) = g / sd_g;
  s.membership.assign(static_cast<std::size_t>(s.n_a), 1);
  s.membership.resize(static_cast<std::size_t>(s.n_a + s.n_b), 0);
  return s;
}

}  // namespace dsm

#endif  // DSM_GLM_SCORES_HPP_
