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
// Exact nearest-neighbour matching in the two-dimensional score space.
//
// Ordering is by squared Euclidean distance with ties broken by ascending
// sample-A index, so every query has a unique, total answer. Both search
// strategies return identical plans.

#ifndef DSM_MATCHER_HPP_
#define DSM_MATCHER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "dsm/glm_scores.hpp"
#include "dsm/parallel.hpp"
#include "dsm/types.hpp"

namespace dsm {

enum class SearchStrategy {
  kBruteForce,  // full distance scan per query
  kSweep,       // sort by first score, expand outwards, prune on the first-axis gap
};

struct MatchPlan {
  Index m = 0;
  Index n_a = 0;
  Index n_b = 0;
  std::vector<Index> j_flat;         // n_b * m donor indices, nearest first
  std::vector<double> distance_flat;  // Euclidean distances aligned with j_flat
  std::vector<std::int64_t> k_counts;  // K_M(i), length n_a
  Vector k_weighted;                   // weighted counts, length n_a

  std::span<const Index> j_set(Index i) const {
    return {j_flat.data() + i * m, static_cast<std::size_t>(m)};
  }
  std::span<const double> distances(Index i) const {
    return {distance_flat.data() + i * m, static_cast<std::size_t>(m)};
  }
};

struct InnerNeighbors {
  Index j = 0;
  Index n_a = 0;
  std::vector<Index> l_flat;  // n_a * j indices into sample A

  std::span<const Index> l_set(Index i) const {
    return {l_flat.data() + i * j, static_cast<std::size_t>(j)};
  }
};

namespace detail {

struct Candidate {
  double dist2;
  Index index;
  friend bool operator<(const Candidate& l, const Candidate& r) {
    return l.dist2 < r.dist2 || (l.dist2 == r.dist2 && l.index < r.index);
  }
};

inline double dist2(const Matrix& z, Index r, double q0, double q1) {
  const double a = z(r, 0) - q0;
  const double b = z(r, 1) - q1;
  return a * a + b * b;
}

// k smallest donors among rows [0, n_a) of z, excluding `skip` (or -1).
inline void brute_force_knn(const Matrix& z, Index n_a, double q0, double q1, Index k, Index skip,
                            std::vector<Candidate>& scratch, Candidate* out) {
  scratch.clear();
  for (Index r = 0; r < n_a; ++r) {
    if (r == skip) continue;
    scratch.push_back({dist2(z, r, q0, q1), r});
  }
  const auto kth = scratch.begin() + k;
  std::nth_element(scratch.begin(), kth - 1, scratch.end());
  std::sort(scratch.begin(), kth);
  std::copy(scratch.begin(), kth, out);
}

// Donor rows sorted by the first score; used by the sweep search.
struct SweepIndex {
  std::vector<Index> order;
  std::vector<double> key;

  SweepIndex(const Matrix& z, Index n_a) : order(static_cast<std::size_t>(n_a)) {
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index l, Index r) {
      return z(l, 0) < z(r, 0) || (z(l, 0) == z(r, 0) && l < r);
    });
    key.reserve(order.size());
    for (Index r : order) key.push_back(z(r, 0));
  }

  void knn(const Matrix& z, double q0, double q1, Index k, Index skip, Candidate* out) const {
    std::priority_queue<Candidate> best;  // max-heap on (dist2, index)
    auto offer = [&](Index r) {
      if (r == skip) return;
      const Candidate c{dist2(z, r, q0, q1), r};
      if (static_cast<Index>(best.size()) < k) {
        best.push(c);
      } else if (c < best.top()) {
        best.pop();
        best.push(c);
      }
    };
    auto full = [&] { return static_cast<Index>(best.size()) == k; };
    const auto n = static_cast<std::ptrdiff_t>(order.size());
    std::ptrdiff_t hi = std::lower_bound(key.begin(), key.end(), q0) - key.begin();
    std::ptrdiff_t lo = hi - 1;
    // A side stops once its first-axis gap alone exceeds the current k-th
    // distance; equal gaps are still visited because of index tie-breaks.
    while (lo >= 0 || hi < n) {
      bool progressed = false;
      if (hi < n) {
        const double gap = key[hi] - q0;
        if (!full() || gap * gap <= best.top().dist2) {
          offer(order[hi++]);
          progressed = true;
        } else {
          hi = n;
        }
      }
      if (lo >= 0) {
        const double gap = q0 - key[lo];
        if (!full() || gap * gap <= best.top().dist2) {
          offer(order[lo--]);
          progressed = true;
        } else {
          lo = -1;
        }
      }
      if (!progressed) break;
    }
    for (Index m = k - 1; m >= 0; --m) {
      out[m] = best.top();
      best.pop();
    }
  }
};

}  // namespace detail

// Matches every sample-B row to its m nearest sample-A rows, with
// replacement across B rows. `weights` are the B design weights used for
// the weighted counts; an empty span means unit weights.
inline MatchPlan find_matches(const ScoreMatrix& scores, Index m, std::span<const double> weights = {},
                              SearchStrategy strategy = SearchStrategy::kBruteForce) {
  const Index n_a = scores.n_a;
  const Index n_b = scores.n_b;
  if (scores.z.rows() != n_a + n_b || scores.z.cols() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "score matrix shape does not match sample sizes");
  }
  if (m < 1) throw Error(ErrorCode::kInvalidArgument, "M must be at least 1");
  if (m > n_a) throw Error(ErrorCode::kMTooLarge, "M exceeds the size of sample A");
  if (!weights.empty() && static_cast<Index>(weights.size()) != n_b) {
    throw Error(ErrorCode::kShapeMismatch, "weight vector length differs from sample B size");
  }

  MatchPlan plan;
  plan.m = m;
  plan.n_a = n_a;
  plan.n_b = n_b;
  plan.j_flat.resize(static_cast<std::size_t>(n_b * m));
  plan.distance_flat.resize(plan.j_flat.size());

  std::optional<detail::SweepIndex> sweep;
  if (strategy == SearchStrategy::kSweep) sweep.emplace(scores.z, n_a);

  parallel_for(static_cast<std::size_t>(n_b), [&](std::size_t begin, std::size_t end) {
    std::vector<detail::Candidate> scratch;
    std::vector<detail::Candidate> best(static_cast<std::size_t>(m));
    for (std::size_t q = begin; q < end; ++q) {
      const Index row = n_a + static_cast<Index>(q);
      const double q0 = scores.z(row, 0);
      const double q1 = scores.z(row, 1);
      if (sweep) {
        sweep->knn(scores.z, q0, q1, m, -1, best.data());
      } else {
        detail::brute_force_knn(scores.z, n_a, q0, q1, m, -1, scratch, best.data());
      }
      for (Index k = 0; k < m; ++k) {
        const auto slot = static_cast<std::size_t>(static_cast<Index>(q) * m + k);
        plan.j_flat[slot] = best[static_cast<std::size_t>(k)].index;
        plan.distance_flat[slot] = std::sqrt(best[static_cast<std::size_t>(k)].dist2);
      }
    }
  });

  plan.k_counts.assign(static_cast<std::size_t>(n_a), 0);
  plan.k_weighted = Vector::Zero(n_a);
  for (Index i = 0; i < n_b; ++i) {
    const double w = weights.empty() ? 1.0 : weights[static_cast<std::size_t>(i)];
    for (Index j : plan.j_set(i)) {
      ++plan.k_counts[static_cast<std::size_t>(j)];
      plan.k_weighted(j) += w;
    }
  }
  return plan;
}

// For each sample-A row, its j nearest other sample-A rows (self excluded).
inline InnerNeighbors find_inner_neighbors(const ScoreMatrix& scores, Index j,
                                           SearchStrategy strategy = SearchStrategy::kBruteForce) {
  const Index n_a = scores.n_a;
  if (j < 1) throw Error(ErrorCode::kInvalidArgument, "J must be at least 1");
  if (j > n_a - 1) throw Error(ErrorCode::kJTooLarge, "J exceeds N_A - 1");

  InnerNeighbors inner;
  inner.j = j;
  inner.n_a = n_a;
  inner.l_flat.resize(static_cast<std::size_t>(n_a * j));

  std::optional<detail::SweepIndex> sweep;
  if (strategy == SearchStrategy::kSweep) sweep.emplace(scores.z, n_a);

  parallel_for(static_cast<std::size_t>(n_a), [&](std::size_t begin, std::size_t end) {
    std::vector<detail::Candidate> scratch;
    std::vector<detail::Candidate> best(static_cast<std::size_t>(j));
    for (std::size_t q = begin; q < end; ++q) {
      const auto row = static_cast<Index>(q);
      if (sweep) {
        sweep->knn(scores.z, scores.z(row, 0), scores.z(row, 1), j, row, best.data());
      } else {
        detail::brute_force_knn(scores.z, n_a, scores.z(row, 0), scores.z(row, 1), j, row, scratch,
                                best.data());
      }
      for (Index k = 0; k < j; ++k) {
        inner.l_flat[static_cast<std::size_t>(row * j + k)] = best[static_cast<std::size_t>(k)].index;
      }
    }
  });
  return inner;
}

// y_hat_i = mean of y over the m donors of B row i.
inline Vector impute(const MatchPlan& plan, const Vector& y_a) {
  if (y_a.size() != plan.n_a) throw Error(ErrorCode::kShapeMismatch, "outcome length differs from N_A");
  Vector y_hat(plan.n_b);
  for (Index i = 0; i < plan.n_b; ++i) {
    double s = 0.0;
    for (Index j : plan.j_set(i)) s += y_a(j);
    y_hat(i) = s / static_cast<double>(plan.m);
  }
  return y_hat;
}

}  // namespace dsm

#endif  // DSM_MATCHER_HPP_
