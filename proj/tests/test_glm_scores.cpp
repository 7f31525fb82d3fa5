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
#include <cmath>
#include <limits>
#include <random>

#include "catch_amalgamated.hpp"
#include "dsm/glm_scores.hpp"
#include "test_support.hpp"

using Catch::Approx;
using dsm::Error;
using dsm::ErrorCode;
using dsm::Index;
using dsm::Matrix;
using dsm::Vector;

namespace {

dsm::SampleA make_a(std::initializer_list<double> x, std::initializer_list<double> y) {
  dsm::SampleA a;
  a.x = Eigen::Map<const Vector>(x.begin(), static_cast<Index>(x.size()));
  a.y = Eigen::Map<const Vector>(y.begin(), static_cast<Index>(y.size()));
  return a;
}

dsm::SampleB make_b(std::initializer_list<double> x, std::initializer_list<double> d) {
  dsm::SampleB b;
  b.x = Eigen::Map<const Vector>(x.begin(), static_cast<Index>(x.size()));
  b.d = Eigen::Map<const Vector>(d.begin(), static_cast<Index>(d.size()));
  return b;
}

double objective(const dsm::SampleA& a, const dsm::SampleB& b, double t0, double t1) {
  double s = 0.0;
  for (Index i = 0; i < a.size(); ++i) s += t0 + t1 * a.x(i, 0);
  for (Index i = 0; i < b.size(); ++i) s -= b.d(i) * std::log1p(std::exp(t0 + t1 * b.x(i, 0)));
  return s;
}

// Coarse-to-fine grid maximisation of the pseudo log-likelihood.
std::pair<double, double> grid_oracle(const dsm::SampleA& a, const dsm::SampleB& b) {
  double c0 = 0.0, c1 = 0.0, half = 10.0;
  while (half > 1e-8) {
    const int n = 40;
    double best = -std::numeric_limits<double>::infinity();
    double b0 = c0, b1 = c1;
    for (int i = -n; i <= n; ++i) {
      for (int j = -n; j <= n; ++j) {
        const double t0 = c0 + half * i / n;
        const double t1 = c1 + half * j / n;
        const double v = objective(a, b, t0, t1);
        if (v > best) {
          best = v;
          b0 = t0;
          b1 = t1;
        }
      }
    }
    c0 = b0;
    c1 = b1;
    half *= 0.2;
  }
  return {c0, c1};
}

}  // namespace

TEST_CASE("logistic matches the closed form and stays finite") {
  CHECK(dsm::logistic(0.0) == 0.5);
  CHECK(dsm::logistic(2.0) == Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
  CHECK(dsm::logistic(-800.0) >= 0.0);
  CHECK(dsm::logistic(800.0) <= 1.0);
  CHECK(std::isfinite(dsm::detail::log1pexp(800.0)));
  CHECK(dsm::detail::log1pexp(800.0) == Approx(800.0));
}

TEST_CASE("propensity MLE agrees with a grid-search oracle") {
  const auto a = make_a({0.3, 1.1, 1.9}, {0, 0, 0});
  const auto b = make_b({0.0, 0.8, 2.4}, {3.0, 2.0, 4.0});
  const auto fit = dsm::fit_propensity(a, b);
  const auto [t0, t1] = grid_oracle(a, b);
  REQUIRE(fit.theta.size() == 2);
  CHECK(std::abs(fit.theta(0) - t0) < 1e-4);
  CHECK(std::abs(fit.theta(1) - t1) < 1e-4);
  CHECK(fit.gradient_norm <= 1e-8);
}

TEST_CASE("propensity objective trace never decreases") {
  const auto fx = dsm::test::linear_fixture(11);
  const auto fit = dsm::fit_propensity(fx.a, fx.b);
  REQUIRE(fit.objective_trace.size() >= 2);
  for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
    CHECK(fit.objective_trace[i] >= fit.objective_trace[i - 1]);
  }
}

TEST_CASE("propensity score equation holds at the solution") {
  const auto fx = dsm::test::linear_fixture(12);
  const auto fit = dsm::fit_propensity(fx.a, fx.b);
  // sum_A x = sum_B d f(x) x for every design column
  Matrix xa(fx.a.size(), 5), xb(fx.b.size(), 5);
  xa << Vector::Ones(fx.a.size()), fx.a.x;
  xb << Vector::Ones(fx.b.size()), fx.b.x;
  const Vector f = (xb * fit.theta).unaryExpr([](double e) { return dsm::logistic(e); });
  const Vector lhs = xa.colwise().sum().transpose();
  const Vector rhs = xb.transpose() * (fx.b.d.array() * f.array()).matrix();
  for (Index k = 0; k < 5; ++k) CHECK(lhs(k) == Approx(rhs(k)).epsilon(1e-6));
}

TEST_CASE("complete separation is reported") {
  const auto a = make_a({10.0, 11.0}, {0, 0});
  const auto b = make_b({0.0, 1.0}, {1.0, 1.0});
  try {
    dsm::fit_propensity(a, b);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSeparation);
  }
}

TEST_CASE("rank problems are reported") {
  dsm::SampleA a;
  a.x.resize(6, 2);
  a.x << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;
  a.y = Vector::LinSpaced(6, 0, 5);
  dsm::SampleB b;
  b.x = a.x;
  b.d = Vector::Constant(6, 2.0);
  SECTION("collinear columns") {
    try {
      dsm::fit_prognostic(a);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kRankDeficient);
    }
    try {
      dsm::fit_propensity(a, b);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kRankDeficient);
    }
  }
  SECTION("constant column") {
    a.x.col(1).setConstant(3.0);
    CHECK_THROWS_AS(dsm::fit_prognostic(a), Error);
  }
  SECTION("too few rows") {
    dsm::SampleA tiny;
    tiny.x = a.x.topRows(2);
    tiny.y = a.y.head(2);
    try {
      dsm::fit_prognostic(tiny);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kRankDeficient);
    }
  }
}

TEST_CASE("least squares reproduces a hand-solved line") {
  const auto a = make_a({0.0, 1.0, 2.0}, {1.0, 3.0, 4.0});
  const auto fit = dsm::fit_prognostic(a);
  CHECK(fit.theta(0) == Approx(7.0 / 6.0).epsilon(1e-12));
  CHECK(fit.theta(1) == Approx(1.5).epsilon(1e-12));
  CHECK(fit.rss == Approx(1.0 / 6.0).epsilon(1e-10));
}

TEST_CASE("least squares normal equations hold on random data") {
  const auto fx = dsm::test::linear_fixture(13);
  const auto fit = dsm::fit_prognostic(fx.a);
  Matrix xa(fx.a.size(), 5);
  xa << Vector::Ones(fx.a.size()), fx.a.x;
  const Vector resid = fx.a.y - xa * fit.theta;
  const Vector ne = xa.transpose() * resid;
  CHECK(ne.lpNorm<Eigen::Infinity>() < 1e-8 * fx.a.y.cwiseAbs().sum());
}

TEST_CASE("column subsets fit only the chosen covariates") {
  const auto fx = dsm::test::linear_fixture(14);
  dsm::FitOptions opts;
  opts.propensity_columns = {0, 1, 2};
  opts.prognostic_columns = {1, 3};
  const auto fit = dsm::fit_scores(fx.a, fx.b, opts);
  CHECK(fit.theta_r.size() == 4);
  CHECK(fit.theta_y.size() == 3);
  const Vector g = dsm::predict_prognostic(fit, fx.b.x);
  CHECK(g(0) == Approx(fit.theta_y(0) + fit.theta_y(1) * fx.b.x(0, 1) + fit.theta_y(2) * fx.b.x(0, 3)));

  opts.prognostic_columns = {7};
  CHECK_THROWS_AS(dsm::fit_scores(fx.a, fx.b, opts), Error);
}

TEST_CASE("score matrix is standardised and ordered A then B") {
  const auto fx = dsm::test::linear_fixture(15);
  const auto fit = dsm::fit_scores(fx.a, fx.b);
  const auto s = dsm::build_score_matrix(fx.a, fx.b, fit);
  REQUIRE(s.z.rows() == fx.a.size() + fx.b.size());
  CHECK(s.n_a == fx.a.size());
  CHECK(s.membership.front() == 1);
  CHECK(s.membership.back() == 0);
  for (Index c = 0; c < 2; ++c) {
    const Vector col = s.z.col(c);
    const double sd = std::sqrt((col.array() - col.mean()).square().sum() / (col.size() - 1));
    CHECK(sd == Approx(1.0).epsilon(1e-12));
  }
  const Vector f = dsm::predict_propensity(fit, fx.a.x);
  CHECK(s.z(0, 0) == Approx(f(0) / fit.sd_f).epsilon(1e-14));
  CHECK((f.array() > 0.0).all());
  CHECK((f.array() < 1.0).all());
}

TEST_CASE("constant prognostic score is degenerate") {
  auto fx = dsm::test::linear_fixture(16);
  fx.a.y.setConstant(4.0);
  const auto fit = dsm::fit_scores(fx.a, fx.b);
  try {
    dsm::build_score_matrix(fx.a, fx.b, fit);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDegenerateScore);
  }
}

TEST_CASE("input validation") {
  auto fx = dsm::test::linear_fixture(17);
  SECTION("covariate count mismatch") {
    dsm::SampleB b = fx.b;
    b.x = b.x.leftCols(3).eval();
    CHECK_THROWS_AS(dsm::fit_propensity(fx.a, b), Error);
  }
  SECTION("nonpositive weight") {
    fx.b.d(3) = 0.0;
    try {
      dsm::fit_propensity(fx.a, fx.b);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNonpositiveWeight);
    }
  }
  SECTION("non-finite input") {
    fx.a.y(0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(dsm::fit_prognostic(fx.a), Error);
  }
  SECTION("iteration budget") {
    dsm::FitOptions opts;
    opts.max_iter = 0;
    try {
      dsm::fit_propensity(fx.a, fx.b, opts);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNonConvergence);
    }
  }
}
