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
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "catch_amalgamated.hpp"
#include "dsm/matcher.hpp"
#include "test_support.hpp"

using dsm::Error;
using dsm::ErrorCode;
using dsm::Index;
using dsm::SearchStrategy;
using dsm::Vector;

namespace {

// Full sort of all candidate rows by (squared distance, index).
std::vector<Index> oracle_knn(const dsm::ScoreMatrix& s, Index query, Index k, Index skip) {
  std::vector<std::pair<double, Index>> all;
  for (Index r = 0; r < s.n_a; ++r) {
    if (r == skip) continue;
    const double d0 = s.z(r, 0) - s.z(query, 0);
    const double d1 = s.z(r, 1) - s.z(query, 1);
    all.emplace_back(d0 * d0 + d1 * d1, r);
  }
  std::sort(all.begin(), all.end());
  std::vector<Index> out;
  for (Index i = 0; i < k; ++i) out.push_back(all[static_cast<std::size_t>(i)].second);
  return out;
}

}  // namespace

TEST_CASE("matcher equals the brute-force oracle on random instances") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<Index> na_dist(1, 50);
  std::uniform_int_distribution<Index> nb_dist(1, 30);
  std::uniform_real_distribution<double> wdist(1.0, 40.0);
  int checked = 0;
  for (int inst = 0; inst < 200; ++inst) {
    const Index n_a = na_dist(rng);
    const Index n_b = nb_dist(rng);
    const Index m = std::uniform_int_distribution<Index>(1, std::min<Index>(n_a, 6))(rng);
    const bool grid = inst % 3 == 0;  // heavy ties
    const auto s = dsm::test::random_scores(rng, n_a, n_b, grid);
    std::vector<double> w(static_cast<std::size_t>(n_b));
    for (auto& v : w) v = wdist(rng);

    for (auto strategy : {SearchStrategy::kBruteForce, SearchStrategy::kSweep}) {
      const auto plan = dsm::find_matches(s, m, w, strategy);
      std::vector<std::int64_t> counts(static_cast<std::size_t>(n_a), 0);
      Vector weighted = Vector::Zero(n_a);
      for (Index i = 0; i < n_b; ++i) {
        const auto expect = oracle_knn(s, n_a + i, m, -1);
        const auto got = plan.j_set(i);
        REQUIRE(std::equal(expect.begin(), expect.end(), got.begin(), got.end()));
        for (Index j : expect) {
          ++counts[static_cast<std::size_t>(j)];
          weighted(j) += w[static_cast<std::size_t>(i)];
        }
      }
      REQUIRE(plan.k_counts == counts);
      REQUIRE((plan.k_weighted - weighted).cwiseAbs().maxCoeff() < 1e-12);
      ++checked;
    }

    if (n_a >= 2) {
      const Index j = std::uniform_int_distribution<Index>(1, std::min<Index>(n_a - 1, 6))(rng);
      for (auto strategy : {SearchStrategy::kBruteForce, SearchStrategy::kSweep}) {
        const auto inner = dsm::find_inner_neighbors(s, j, strategy);
        for (Index i = 0; i < n_a; ++i) {
          const auto expect = oracle_knn(s, i, j, i);
          const auto got = inner.l_set(i);
          REQUIRE(std::equal(expect.begin(), expect.end(), got.begin(), got.end()));
        }
      }
    }
  }
  CHECK(checked == 400);
}

TEST_CASE("match counts sum to M times N_B") {
  std::mt19937_64 rng(7);
  const auto s = dsm::test::random_scores(rng, 300, 500);
  std::vector<double> w(500, 2.5);
  for (Index m : {1, 3, 5, 10}) {
    const auto plan = dsm::find_matches(s, m, w);
    const auto total = std::accumulate(plan.k_counts.begin(), plan.k_counts.end(), std::int64_t{0});
    CHECK(total == m * 500);
    CHECK(plan.k_weighted.sum() == Catch::Approx(2.5 * m * 500));
  }
}

TEST_CASE("ties resolve to the lowest sample-A index") {
  dsm::ScoreMatrix s;
  s.n_a = 4;
  s.n_b = 1;
  s.z.resize(5, 2);
  s.z << 1, 0, -1, 0, 0, 1, 0, -1, 0, 0;
  s.membership = {1, 1, 1, 1, 0};
  for (auto strategy : {SearchStrategy::kBruteForce, SearchStrategy::kSweep}) {
    const auto plan = dsm::find_matches(s, 2, {}, strategy);
    CHECK(plan.j_set(0)[0] == 0);
    CHECK(plan.j_set(0)[1] == 1);
    CHECK(plan.distances(0)[0] == 1.0);
  }
}

TEST_CASE("imputed values are means of the matched outcomes") {
  std::mt19937_64 rng(8);
  const auto s = dsm::test::random_scores(rng, 40, 25);
  Vector y = Vector::LinSpaced(40, -3.0, 9.0);
  const auto plan = dsm::find_matches(s, 3);
  const Vector y_hat = dsm::impute(plan, y);
  for (Index i = 0; i < 25; ++i) {
    double acc = 0.0;
    for (Index j : plan.j_set(i)) acc += y(j);
    CHECK(y_hat(i) == Catch::Approx(acc / 3.0).epsilon(1e-15));
  }
  for (Index j = 0; j < 40; ++j) {
    CHECK(plan.k_weighted(j) == static_cast<double>(plan.k_counts[static_cast<std::size_t>(j)]));
  }
}

TEST_CASE("matcher rejects invalid arguments") {
  std::mt19937_64 rng(9);
  const auto s = dsm::test::random_scores(rng, 5, 4);
  try {
    dsm::find_matches(s, 6);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMTooLarge);
  }
  try {
    dsm::find_inner_neighbors(s, 5);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kJTooLarge);
  }
  CHECK_THROWS_AS(dsm::find_matches(s, 0), Error);
  CHECK_THROWS_AS(dsm::find_matches(s, 2, std::vector<double>(3, 1.0)), Error);
  CHECK_THROWS_AS(dsm::impute(dsm::find_matches(s, 2), Vector::Zero(4)), Error);
  CHECK_NOTHROW(dsm::find_matches(s, 5));
  CHECK_NOTHROW(dsm::find_inner_neighbors(s, 4));
}
