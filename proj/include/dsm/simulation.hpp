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
// Monte Carlo harness: repeated population draws, both samples, every
// estimator under each scenario, and relative bias / MSE / coverage.

#ifndef DSM_SIMULATION_HPP_
#define DSM_SIMULATION_HPP_

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsm/dgp.hpp"
#include "dsm/estimators.hpp"
#include "dsm/glm_scores.hpp"
#include "dsm/matcher.hpp"
#include "dsm/parallel.hpp"
#include "dsm/rng.hpp"
#include "dsm/uncertainty.hpp"

namespace dsm {

enum class Target { kSample, kPopulation };

struct SimulationSpec {
  Nonlinearity mode = Nonlinearity::kNone;
  PopulationSpec population;
  std::vector<Scenario> scenarios{kAllScenarios.begin(), kAllScenarios.end()};
  Index omitted_column = 3;  // covariate dropped by F-models (0-based)
  Index m = 3;
  Index replications = 500;
  bool bootstrap = false;  // wild-bootstrap coverage of the de-biased intervals
  Index bootstrap_replicates = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 20210101;
  unsigned threads = 0;
};

struct ScenarioOutcome {
  Scenario scenario = Scenario::kTT;
  double mu_b = 0.0;
  double mu_b_debiased = 0.0;
  double mu_dsm = 0.0;
  double mu_dsm_debiased = 0.0;
  double dre = 0.0;
  bool dre_extreme = false;
  std::optional<IntervalReport> ci_sample;      // de-biased interval for the sample-B mean
  std::optional<IntervalReport> ci_population;  // weighted de-biased interval for the population mean
};

struct ReplicationOutcome {
  bool ok = false;
  std::string failure;
  Index n_a = 0;
  double target_sample = 0.0;      // mean of E[y|x] over sample B
  double target_population = 0.0;  // mean of E[y|x] over the population
  double sample_a_mean = 0.0;
  std::vector<ScenarioOutcome> scenarios;
};

// One replication with its own random stream derived from (seed, s).
inline ReplicationOutcome run_replication(const SimulationSpec& spec, Index s) {
  ReplicationOutcome out;
  try {
    std::mt19937_64 rng = make_engine(spec.seed, static_cast<std::uint64_t>(s));
    const PopulationFrame pop = gen_population(spec.population, rng);
    const std::vector<Index> idx_a = poisson_sample(pop.pi_a, rng);
    const std::vector<Index> idx_b =
        pps_sample(pop.pi_b, static_cast<Index>(std::llround(spec.population.n_b)), rng);
    out.n_a = static_cast<Index>(idx_a.size());

    out.target_population = pop.cond_mean.mean();
    double tb = 0.0;
    for (Index i : idx_b) tb += pop.cond_mean(i);
    out.target_sample = tb / static_cast<double>(idx_b.size());
    double ya = 0.0;
    for (Index i : idx_a) ya += pop.y(i);
    out.sample_a_mean = idx_a.empty() ? 0.0 : ya / static_cast<double>(idx_a.size());

    for (Scenario scenario : spec.scenarios) {
      const AnalystViews views = apply_scenario_views(pop.x, spec.mode, scenario, spec.omitted_column);
      SampleA a;
      a.x.resize(static_cast<Index>(idx_a.size()), 4);
      a.y.resize(static_cast<Index>(idx_a.size()));
      for (std::size_t r = 0; r < idx_a.size(); ++r) {
        a.x.row(static_cast<Index>(r)) = views.x.row(idx_a[r]);
        a.y(static_cast<Index>(r)) = pop.y(idx_a[r]);
      }
      SampleB b;
      b.x.resize(static_cast<Index>(idx_b.size()), 4);
      b.d.resize(static_cast<Index>(idx_b.size()));
      for (std::size_t r = 0; r < idx_b.size(); ++r) {
        b.x.row(static_cast<Index>(r)) = views.x.row(idx_b[r]);
        b.d(static_cast<Index>(r)) = 1.0 / pop.pi_b(idx_b[r]);
      }

      FitOptions opts;
      opts.propensity_columns = views.propensity_columns;
      opts.prognostic_columns = views.prognostic_columns;
      const ScoreFit fit = fit_scores(a, b, opts);
      const ScoreMatrix scores = build_score_matrix(a, b, fit);
      const MatchPlan plan = find_matches(scores, spec.m, {b.d.data(), static_cast<std::size_t>(b.d.size())});
      const PointEstimates est = point_estimates(plan, fit, a, b);
      const DreResult dre = dre_estimate(fit, a, b);

      ScenarioOutcome so;
      so.scenario = scenario;
      so.mu_b = est.mu_B;
      so.mu_b_debiased = est.mu_B_debiased;
      so.mu_dsm = est.mu_psi_dsm;
      so.mu_dsm_debiased = est.mu_dsm_debiased;
      so.dre = dre.value;
      so.dre_extreme = dre.extreme_propensity;
      if (spec.bootstrap) {
        BootstrapSpec boot;
        boot.replicates = spec.bootstrap_replicates;
        boot.alpha = spec.alpha;
        boot.seed = stream_key(spec.seed ^ 0xb0075742a9ULL, static_cast<std::uint64_t>(s));
        so.ci_sample = bootstrap_ci_debiased(plan, fit, a, b, est.mu_B_debiased, boot);
        so.ci_population = bootstrap_ci_population(plan, fit, a, b, est.mu_dsm_debiased, boot);
        so.ci_sample->draws.clear();
        so.ci_population->draws.clear();
      }
      out.scenarios.push_back(std::move(so));
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.failure = e.what();
    out.scenarios.clear();
  }
  return out;
}

struct SummaryRow {
  std::string estimator;
  std::optional<Scenario> scenario;
  Target target = Target::kPopulation;
  double mean = 0.0;
  double rb = 0.0;   // mean relative bias, percent
  double mse = 0.0;
};

struct CoverageRow {
  Scenario scenario = Scenario::kTT;
  double sample = 0.0;
  double population = 0.0;
};

struct SimReport {
  SimulationSpec spec;
  std::vector<SummaryRow> rows;
  std::vector<CoverageRow> coverage;
  Index replications = 0;  // successful replications entering the summaries
  Index failures = 0;
  std::vector<std::string> failure_messages;
  Index dre_extreme_count = 0;
  double wall_seconds = 0.0;
  std::vector<ReplicationOutcome> outcomes;

  const SummaryRow* find(std::string_view estimator, std::optional<Scenario> scenario, Target target) const {
    for (const auto& r : rows) {
      if (r.estimator == estimator && r.scenario == scenario && r.target == target) return &r;
    }
    return nullptr;
  }
  const CoverageRow* find_coverage(Scenario scenario) const {
    for (const auto& c : coverage) {
      if (c.scenario == scenario) return &c;
    }
    return nullptr;
  }
};

namespace detail {

// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

struct Accumulator {
  CompensatedSum est;
  CompensatedSum rel;
  CompensatedSum sq;
  Index n = 0;
  void add(double estimate, double target) {
    est.add(estimate);
    rel.add((estimate - target) / target);
    sq.add((estimate - target) * (estimate - target));
    ++n;
  }
  SummaryRow row(std::string name, std::optional<Scenario> scenario, Target target) const {
    const double dn = static_cast<double>(n);
    return {std::move(name), scenario, target, est.value() / dn, 100.0 * rel.value() / dn, sq.value() / dn};
  }
};

}  // namespace detail

inline SimReport summarize(const SimulationSpec& spec, std::vector<ReplicationOutcome> outcomes) {
  SimReport rep;
  rep.spec = spec;
  const std::size_t k = spec.scenarios.size();
  detail::Accumulator sample_b, population, sample_a;
  std::vector<detail::Accumulator> dsm_b(k), dsm_b_d(k), dsm_p(k), dsm_p_d(k), dre(k);
  std::vector<Index> cover_b(k, 0), cover_p(k, 0);
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++rep.failures;
      if (rep.failure_messages.size() < 10) rep.failure_messages.push_back(o.failure);
      continue;
    }
    ++rep.replications;
    sample_b.add(o.target_sample, o.target_sample);
    population.add(o.target_population, o.target_population);
    sample_a.add(o.sample_a_mean, o.target_population);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& so = o.scenarios[j];
      dsm_b[j].add(so.mu_b, o.target_sample);
      dsm_b_d[j].add(so.mu_b_debiased, o.target_sample);
      dsm_p[j].add(so.mu_dsm, o.target_population);
      dsm_p_d[j].add(so.mu_dsm_debiased, o.target_population);
      dre[j].add(so.dre, o.target_population);
      if (so.dre_extreme) ++rep.dre_extreme_count;
      if (so.ci_sample && so.ci_sample->contains(o.target_sample)) ++cover_b[j];
      if (so.ci_population && so.ci_population->contains(o.target_population)) ++cover_p[j];
    }
  }
  if (rep.replications == 0) {
    rep.outcomes = std::move(outcomes);
    return rep;
  }

  rep.rows.push_back(sample_b.row("Sample S_B", std::nullopt, Target::kSample));
  for (std::size_t j = 0; j < k; ++j) rep.rows.push_back(dsm_b[j].row("DSM", spec.scenarios[j], Target::kSample));
  for (std::size_t j = 0; j < k; ++j) {
    rep.rows.push_back(dsm_b_d[j].row("De-biased DSM", spec.scenarios[j], Target::kSample));
  }
  rep.rows.push_back(population.row("Population Mean", std::nullopt, Target::kPopulation));
  rep.rows.push_back(sample_a.row("Sample A Mean", std::nullopt, Target::kPopulation));
  for (std::size_t j = 0; j < k; ++j) rep.rows.push_back(dre[j].row("DRE", spec.scenarios[j], Target::kPopulation));
  for (std::size_t j = 0; j < k; ++j) {
    rep.rows.push_back(dsm_p[j].row("DSM", spec.scenarios[j], Target::kPopulation));
  }
  for (std::size_t j = 0; j < k; ++j) {
    rep.rows.push_back(dsm_p_d[j].row("De-biased DSM", spec.scenarios[j], Target::kPopulation));
  }
  if (spec.bootstrap) {
    const double n = static_cast<double>(rep.replications);
    for (std::size_t j = 0; j < k; ++j) {
      rep.coverage.push_back({spec.scenarios[j], static_cast<double>(cover_b[j]) / n,
                              static_cast<double>(cover_p[j]) / n});
    }
  }
  rep.outcomes = std::move(outcomes);
  return rep;
}

// Runs spec.replications independent replications. A replication whose fits
// fail is dropped from every summary and counted in `failures`.
inline SimReport run_monte_carlo(const SimulationSpec& spec) {
  if (spec.replications < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one replication");
  if (spec.m < 1) throw Error(ErrorCode::kInvalidArgument, "M must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  std::vector<ReplicationOutcome> outcomes(static_cast<std::size_t>(spec.replications));
  parallel_for(
      outcomes.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t s = begin; s < end; ++s) outcomes[s] = run_replication(spec, static_cast<Index>(s));
      },
      spec.threads);
  SimReport rep = summarize(spec, std::move(outcomes));
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace dsm

#endif  // DSM_SIMULATION_HPP_
