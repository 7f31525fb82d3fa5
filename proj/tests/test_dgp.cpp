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
#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "catch_amalgamated.hpp"
#include "dsm/dgp.hpp"
#include "dsm/rng.hpp"

using Catch::Approx;
using dsm::Error;
using dsm::ErrorCode;
using dsm::Index;
using dsm::Vector;

namespace {

double corr(const Vector& a, const Vector& b) {
  const Vector ca = a.array() - a.mean();
  const Vector cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

dsm::PopulationFrame population(std::uint64_t seed, dsm::PopulationSpec spec = {}) {
  std::mt19937_64 rng = dsm::make_engine(seed, 0);
  return dsm::gen_population(spec, rng);
}

}  // namespace

TEST_CASE("population mean of E[y|x] follows the covariate chain") {
  // E z = (0.5, 1, 1, 4) propagated through the chain
  const double x1 = 0.5;
  const double x2 = 1.0 + 0.3 * x1;
  const double x3 = 1.0 + 0.2 * (x1 + x2);
  const double x4 = 4.0 + 0.1 * (x1 + x2 + x3);
  const double analytic = 2.0 + x1 + x2 + x3 + x4;
  CHECK(analytic == Approx(9.278).margin(1e-12));

  dsm::PopulationSpec spec;
  spec.size = 400000;
  spec.n_b = 20000;
  spec.n_a = 10000;
  const auto pop = population(1, spec);
  const Vector& m = pop.cond_mean;
  const double sd = std::sqrt((m.array() - m.mean()).square().sum() / (m.size() - 1));
  CHECK(std::abs(m.mean() - analytic) < 4.0 * sd / std::sqrt(static_cast<double>(m.size())));
  CHECK(pop.z_raw.col(0).minCoeff() >= 0.0);
  CHECK(pop.z_raw.col(1).maxCoeff() <= 2.0);
  CHECK(pop.z_raw.col(3).mean() == Approx(4.0).epsilon(0.02));
}

TEST_CASE("noise scale hits the target correlation", "[property]") {
  for (std::uint64_t seed : {2u, 3u, 4u}) {
    const auto pop = population(seed);
    CHECK(std::abs(corr(pop.y, pop.cond_mean) - 0.3) < 0.01);
    const double sd = std::sqrt((pop.cond_mean.array() - pop.cond_mean.mean()).square().sum() /
                                (pop.size() - 1));
    CHECK(pop.sigma == Approx(sd * std::sqrt(1.0 / 0.09 - 1.0)).epsilon(1e-12));
  }
  CHECK(dsm::calibrate_sigma(Vector::LinSpaced(10, 0, 1), 1.0) == 0.0);
  for (double rho : {0.0, -0.2, 1.5}) {
    try {
      dsm::calibrate_sigma(Vector::LinSpaced(10, 0, 1), rho);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kRhoOutOfRange);
    }
  }
}

TEST_CASE("propensity intercept hits the expected sample size", "[property]") {
  const auto pop = population(5);
  CHECK(std::abs(pop.pi_a.sum() - 500.0) <= 1e-6 * 500.0);
  const double t = dsm::calibrate_theta0(pop.x, 2000.0);
  double s = 0.0;
  const Vector lin = dsm::propensity_linear_predictor(pop.x);
  for (Index i = 0; i < lin.size(); ++i) s += 1.0 / (1.0 + std::exp(-(t + lin(i))));
  CHECK(s == Approx(2000.0).epsilon(1e-8));
  for (double bad : {0.0, -5.0, 20000.0, 30000.0}) {
    try {
      dsm::calibrate_theta0(pop.x, bad);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kBracketFailure);
    }
  }
}

TEST_CASE("PPS sizes have the requested ratio and total", "[property]") {
  const auto pop = population(6);
  const Vector size = pop.x.col(2).array() + pop.c_pps;
  CHECK(size.maxCoeff() / size.minCoeff() == Approx(50.0).epsilon(1e-10));
  CHECK(pop.pi_b.sum() == Approx(1000.0).epsilon(1e-10));
  CHECK(pop.pi_b.maxCoeff() / pop.pi_b.minCoeff() == Approx(50.0).epsilon(1e-10));
  const Vector x3 = pop.x.col(2);
  CHECK(pop.c_pps == Approx((x3.maxCoeff() - 50.0 * x3.minCoeff()) / 49.0));

  // forced clipping keeps the total and caps at one
  const Vector skew{{0.0, 0.1, 0.2, 0.3, 10.0}};
  const auto clip = dsm::calibrate_pps(skew, 2.0, 20.0);
  CHECK(clip.pi.maxCoeff() == 1.0);
  CHECK(clip.pi.sum() == Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(dsm::calibrate_pps(skew, 2.0, 1.0), Error);
  try {
    dsm::calibrate_pps(Vector{{2.0, 2.0}}, 1.0, 5.0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleRatio);
  }
}

TEST_CASE("systematic PPS reproduces first-order inclusion probabilities") {
  const Vector x3 = Vector::LinSpaced(20, 0.0, 3.0);
  const auto cal = dsm::calibrate_pps(x3, 5.0, 8.0);
  std::mt19937_64 rng(77);
  const int reps = 40000;
  Vector hits = Vector::Zero(20);
  for (int r = 0; r < reps; ++r) {
    const auto s = dsm::pps_sample(cal.pi, 5, rng);
    REQUIRE(s.size() == 5);
    REQUIRE(std::set<Index>(s.begin(), s.end()).size() == 5);
    REQUIRE(std::is_sorted(s.begin(), s.end()));
    for (Index i : s) hits(i) += 1.0;
  }
  for (Index i = 0; i < 20; ++i) {
    const double p = cal.pi(i);
    CHECK(std::abs(hits(i) / reps - p) < 4.0 * std::sqrt(p * (1.0 - p) / reps) + 1e-9);
  }
  CHECK_THROWS_AS(dsm::pps_sample(cal.pi, 4, rng), Error);
}

TEST_CASE("Poisson sample size concentrates on the expected total") {
  const auto pop = population(8);
  std::mt19937_64 rng(9);
  double total = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    const auto s = dsm::poisson_sample(pop.pi_a, rng);
    REQUIRE(std::is_sorted(s.begin(), s.end()));
    total += static_cast<double>(s.size());
  }
  const double var = (pop.pi_a.array() * (1.0 - pop.pi_a.array())).sum();
  CHECK(std::abs(total / reps - 500.0) < 4.0 * std::sqrt(var / reps));
}

TEST_CASE("population draws are deterministic per seed") {
  const auto a = population(10);
  const auto b = population(10);
  const auto c = population(11);
  CHECK(a.y == b.y);
  CHECK(a.pi_b == b.pi_b);
  CHECK(a.y != c.y);
}

TEST_CASE("analyst views") {
  dsm::Matrix x(2, 4);
  x << 1.0, 2.0, 3.0, 4.0, 0.0, 0.5, 1.5, 2.5;
  const auto none = dsm::apply_scenario_views(x, dsm::Nonlinearity::kNone, dsm::Scenario::kTT);
  CHECK(none.x == x);
  CHECK(none.prognostic_columns.size() == 4);

  const auto cubic = dsm::apply_scenario_views(x, dsm::Nonlinearity::kCubic, dsm::Scenario::kFT);
  CHECK(cubic.x(0, 1) == Approx(4.0));
  CHECK(cubic.x(0, 2) == Approx(27.0));
  CHECK(cubic.x(0, 3) == Approx(16.0));
  CHECK(cubic.prognostic_columns == std::vector<Index>{0, 1, 2});
  CHECK(cubic.propensity_columns.size() == 4);

  const auto ab = dsm::apply_scenario_views(x, dsm::Nonlinearity::kAppendixB, dsm::Scenario::kTF, 1);
  CHECK(ab.x(0, 0) == 1.0);
  CHECK(ab.x(0, 1) == Approx(std::pow(2.0, 1.15)).epsilon(1e-15));
  CHECK(ab.x(0, 2) == Approx(std::pow(3.0, -0.85)).epsilon(1e-15));
  CHECK(ab.x(0, 3) == Approx(std::pow(4.0, -1.15)).epsilon(1e-15));
  CHECK(ab.x(1, 1) == Approx(std::pow(0.5, 1.15)));
  CHECK(ab.propensity_columns == std::vector<Index>{0, 2, 3});
  CHECK(ab.prognostic_columns.size() == 4);

  dsm::Matrix bad = x;
  bad(1, 3) = 0.0;
  try {
    dsm::apply_scenario_views(bad, dsm::Nonlinearity::kAppendixB, dsm::Scenario::kTT);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDomainError);
  }
  CHECK_THROWS_AS(dsm::apply_scenario_views(x, dsm::Nonlinearity::kNone, dsm::Scenario::kFF, 4), Error);
  CHECK_THROWS_AS(dsm::apply_scenario_views(x.leftCols(3), dsm::Nonlinearity::kNone, dsm::Scenario::kFF),
                  Error);
  CHECK(dsm::scenario_name(dsm::Scenario::kFT) == "FT");
  CHECK(dsm::prognostic_correct(dsm::Scenario::kTF));
  CHECK_FALSE(dsm::propensity_correct(dsm::Scenario::kTF));
}
