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
// Command implementations behind the `dsm` executable: impute, estimate and
// simulate. Each writes its table plus a flat metadata sidecar.

#ifndef DSM_COMMANDS_HPP_
#define DSM_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dsm/dgp.hpp"
#include "dsm/estimators.hpp"
#include "dsm/glm_scores.hpp"
#include "dsm/io.hpp"
#include "dsm/matcher.hpp"
#include "dsm/simulation.hpp"
#include "dsm/uncertainty.hpp"

namespace dsm {

struct RunConfig {
  std::filesystem::path sample_a;
  std::filesystem::path sample_b;
  ColumnRoles roles;
  Index m = 3;
  Index j = 6;
  Index bootstrap = 2000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  bool debias = true;
  // simulate
  std::string table = "1";
  std::optional<Index> reps;
  std::string scale = "desk";
  std::vector<Index> rows;  // 1-based table-4 rows, empty = all
  Index omit = 4;           // 1-based covariate dropped by F-models
  unsigned threads = 0;
  std::filesystem::path out;
};

inline std::filesystem::path metadata_path(const std::filesystem::path& out) {
  return std::filesystem::path(out.string() + ".meta");
}

namespace detail {

inline std::string join_numbers(const Vector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += format_double(v(i));
  }
  return s;
}

inline std::string join(const std::vector<std::string>& v, char sep = ',') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += v[i];
  }
  return s;
}

struct Pipeline {
  LoadedSamples data;
  ScoreFit fit;
  ScoreMatrix scores;
  MatchPlan plan;
};

inline Pipeline run_pipeline(const RunConfig& cfg) {
  Pipeline p;
  p.data = load_samples(cfg.sample_a, cfg.sample_b, cfg.roles);
  p.fit = fit_scores(p.data.a, p.data.b);
  p.scores = build_score_matrix(p.data.a, p.data.b, p.fit);
  const auto& d = p.data.b.d;
  p.plan = find_matches(p.scores, cfg.m, {d.data(), static_cast<std::size_t>(d.size())});
  return p;
}

inline std::vector<std::pair<std::string, std::string>> fit_metadata(const RunConfig& cfg, const Pipeline& p) {
  return {
      {"seed", std::to_string(cfg.seed)},
      {"M", std::to_string(cfg.m)},
      {"n_a", std::to_string(p.data.a.size())},
      {"n_b", std::to_string(p.data.b.size())},
      {"covariates", join(p.data.covariates)},
      {"outcome", cfg.roles.outcome},
      {"weight", cfg.roles.weight},
      {"theta_r", join_numbers(p.fit.theta_r)},
      {"theta_y", join_numbers(p.fit.theta_y)},
      {"converged", p.fit.converged ? "true" : "false"},
      {"iterations", std::to_string(p.fit.iterations)},
      {"gradient_norm", format_double(p.fit.gradient_norm)},
      {"sd_f", format_double(p.fit.sd_f)},
      {"sd_g", format_double(p.fit.sd_g)},
  };
}

}  // namespace detail

// Sample B with appended y_hat, propensity_score and prognostic_score columns.
inline CsvTable cmd_impute(const RunConfig& cfg) {
  const detail::Pipeline p = detail::run_pipeline(cfg);
  const Vector y_hat = impute(p.plan, p.data.a.y);
  const Vector f = predict_propensity(p.fit, p.data.b.x);
  const Vector g = predict_prognostic(p.fit, p.data.b.x);
  CsvTable out = p.data.table_b;
  for (const char* name : {"y_hat", "propensity_score", "prognostic_score"}) {
    if (out.column(name) >= 0) throw Error(ErrorCode::kSchemaMismatch, std::string("sample B already has column ") + name);
    out.header.emplace_back(name);
  }
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    const auto i = static_cast<Index>(r);
    out.rows[r].push_back(format_double(y_hat(i)));
    out.rows[r].push_back(format_double(f(i)));
    out.rows[r].push_back(format_double(g(i)));
  }
  if (!cfg.out.empty()) {
    write_csv(cfg.out, out);
    auto meta = detail::fit_metadata(cfg, p);
    meta.insert(meta.begin(), {"command", "impute"});
    write_metadata(metadata_path(cfg.out), meta);
  }
  return out;
}

struct EstimateReport {
  PointEstimates point;
  DreResult dre;
  double analytic_variance = 0.0;
  double analytic_std_error = 0.0;
  Index j = 0;
  IntervalReport ci_plain;
  std::optional<IntervalReport> ci_debiased;
  std::optional<IntervalReport> ci_population;
  CsvTable table;
};

inline EstimateReport cmd_estimate(const RunConfig& cfg) {
  const detail::Pipeline p = detail::run_pipeline(cfg);
  const auto& a = p.data.a;
  const auto& b = p.data.b;
  EstimateReport r;
  r.point = point_estimates(p.plan, p.fit, a, b);
  r.dre = dre_estimate(p.fit, a, b);
  r.j = cfg.j > 0 ? cfg.j : 2 * cfg.m;
  const InnerNeighbors inner = find_inner_neighbors(p.scores, r.j);
  r.analytic_variance = analytic_variance(p.plan, a.y, r.point.mu_B, inner);
  r.analytic_std_error = analytic_std_error(r.analytic_variance, b.size());

  BootstrapSpec boot;
  boot.replicates = cfg.bootstrap;
  boot.alpha = cfg.alpha;
  boot.seed = cfg.seed;
  boot.threads = cfg.threads;
  r.ci_plain = bootstrap_ci_plain(p.plan, a.y, r.point.mu_B, boot);
  if (cfg.debias) {
    r.ci_debiased = bootstrap_ci_debiased(p.plan, p.fit, a, b, r.point.mu_B_debiased, boot);
    r.ci_population = bootstrap_ci_population(p.plan, p.fit, a, b, r.point.mu_dsm_debiased, boot);
  }

  const std::string na = "NA";
  auto row = [&](std::string name, double estimate, std::optional<double> se,
                 const IntervalReport* ci) -> std::vector<std::string> {
    return {std::move(name),
            format_double(estimate),
            se ? format_double(*se) : na,
            ci ? format_double(ci->lo) : na,
            ci ? format_double(ci->hi) : na,
            ci ? format_double(ci->q_lo) : na,
            ci ? format_double(ci->q_hi) : na};
  };
  r.table.header = {"quantity", "estimate", "std_error", "ci_lo", "ci_hi", "q_lo", "q_hi"};
  r.table.rows.push_back(row("mu_B", r.point.mu_B, r.analytic_std_error, &r.ci_plain));
  r.table.rows.push_back(row("mu_B_debiased", r.point.mu_B_debiased, std::nullopt,
                             r.ci_debiased ? &*r.ci_debiased : nullptr));
  r.table.rows.push_back(row("mu_DSM", r.point.mu_psi_dsm, std::nullopt, nullptr));
  r.table.rows.push_back(row("mu_DSM_debiased", r.point.mu_dsm_debiased, std::nullopt,
                             r.ci_population ? &*r.ci_population : nullptr));
  r.table.rows.push_back(row("DRE", r.dre.value, std::nullopt, nullptr));
  r.table.rows.push_back(row("bias_hat", r.point.bias_hat, std::nullopt, nullptr));
  r.table.rows.push_back(row("bias_hat_weighted", r.point.bias_hat_weighted, std::nullopt, nullptr));
  r.table.rows.push_back(row("analytic_variance", r.analytic_variance, std::nullopt, nullptr));
  r.table.rows.push_back(row("n_hat", r.point.n_hat, std::nullopt, nullptr));

  if (!cfg.out.empty()) {
    write_csv(cfg.out, r.table);
    auto meta = detail::fit_metadata(cfg, p);
    meta.insert(meta.begin(), {"command", "estimate"});
    meta.emplace_back("J", std::to_string(r.j));
    meta.emplace_back("bootstrap", std::to_string(cfg.bootstrap));
    meta.emplace_back("alpha", format_double(cfg.alpha));
    meta.emplace_back("debias", cfg.debias ? "true" : "false");
    meta.emplace_back("dre_min_propensity", format_double(r.dre.min_propensity));
    meta.emplace_back("dre_extreme_propensity", r.dre.extreme_propensity ? "true" : "false");
    write_metadata(metadata_path(cfg.out), meta);
  }
  return r;
}

struct Table4Row {
  Index m;
  double n_a;
  double n_b;
};

// Design grid of the coverage table.
inline const std::vector<Table4Row>& table4_rows() {
  static const std::vector<Table4Row> rows = {
      {3, 500, 1000},  {3, 1000, 500},   {5, 1000, 500},   {5, 1000, 1000},  {6, 1000, 2000},
      {8, 1500, 1000}, {8, 1500, 1500}, {10, 2000, 2000}, {10, 2500, 2500}, {15, 3000, 1500},
  };
  return rows;
}

struct ScaleDefaults {
  Index replications;
  Index bootstrap;
};

inline ScaleDefaults scale_defaults(const std::string& scale) {
  if (scale == "desk") return {500, 1000};
  if (scale == "paper") return {2000, 2000};
  throw Error(ErrorCode::kInvalidArgument, "scale must be 'desk' or 'paper'");
}

inline std::string row_label(const SummaryRow& r) {
  return r.scenario ? r.estimator + " (" + std::string(scenario_name(*r.scenario)) + ")" : r.estimator;
}

inline CsvTable cmd_simulate(const RunConfig& cfg) {
  const ScaleDefaults defaults = scale_defaults(cfg.scale);
  if (cfg.omit < 1 || cfg.omit > 4) throw Error(ErrorCode::kInvalidArgument, "--omit must be 1..4");
  SimulationSpec base;
  base.replications = cfg.reps.value_or(defaults.replications);
  base.bootstrap_replicates = defaults.bootstrap;
  base.alpha = cfg.alpha;
  base.seed = cfg.seed;
  base.threads = cfg.threads;
  base.omitted_column = cfg.omit - 1;
  base.m = cfg.m;

  CsvTable out;
  std::vector<std::pair<std::string, std::string>> meta = {
      {"command", "simulate"}, {"table", cfg.table}, {"scale", cfg.scale}, {"seed", std::to_string(cfg.seed)},
      {"replications", std::to_string(base.replications)}, {"omitted_covariate", "x" + std::to_string(cfg.omit)}};

  if (cfg.table == "4") {
    base.bootstrap = true;
    out.header = {"M", "N_A", "N_B"};
    for (const char* t : {"sample", "population"}) {
      for (Scenario s : kAllScenarios) out.header.push_back(std::string(t) + "_" + std::string(scenario_name(s)));
    }
    out.header.insert(out.header.end(), {"replications", "failures", "seed"});
    std::vector<Index> selected = cfg.rows;
    if (selected.empty()) {
      for (Index i = 1; i <= static_cast<Index>(table4_rows().size()); ++i) selected.push_back(i);
    }
    for (Index k : selected) {
      if (k < 1 || k > static_cast<Index>(table4_rows().size())) {
        throw Error(ErrorCode::kInvalidArgument, "table 4 row out of range");
      }
      const Table4Row& t = table4_rows()[static_cast<std::size_t>(k - 1)];
      SimulationSpec spec = base;
      spec.m = t.m;
      spec.population.n_a = t.n_a;
      spec.population.n_b = t.n_b;
      const SimReport rep = run_monte_carlo(spec);
      std::vector<std::string> line = {std::to_string(t.m), format_double(t.n_a), format_double(t.n_b)};
      for (int pass = 0; pass < 2; ++pass) {
        for (Scenario s : kAllScenarios) {
          const CoverageRow* c = rep.find_coverage(s);
          line.push_back(c ? format_double(pass == 0 ? c->sample : c->population) : "NA");
        }
      }
      line.insert(line.end(), {std::to_string(rep.replications), std::to_string(rep.failures), std::to_string(cfg.seed)});
      out.rows.push_back(std::move(line));
    }
    meta.emplace_back("bootstrap", std::to_string(base.bootstrap_replicates));
  } else {
    Target target = Target::kPopulation;
    if (cfg.table == "1") {
      base.mode = Nonlinearity::kNone;
      target = Target::kSample;
    } else if (cfg.table == "2") {
      base.mode = Nonlinearity::kNone;
    } else if (cfg.table == "3") {
      base.mode = Nonlinearity::kCubic;
    } else if (cfg.table == "a1" || cfg.table == "A1") {
      base.mode = Nonlinearity::kAppendixB;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "table must be one of 1, 2, 3, 4, a1");
    }
    const SimReport rep = run_monte_carlo(base);
    out.header = {"row", "mean", "rb", "mse", "replications", "failures", "seed"};
    for (const SummaryRow& r : rep.rows) {
      if (r.target != target) continue;
      out.rows.push_back({row_label(r), format_double(r.mean), format_double(r.rb), format_double(r.mse),
                          std::to_string(rep.replications), std::to_string(rep.failures), std::to_string(cfg.seed)});
    }
    meta.emplace_back("failures", std::to_string(rep.failures));
    meta.emplace_back("M", std::to_string(base.m));
  }
  if (!cfg.out.empty()) {
    write_csv(cfg.out, out);
    write_metadata(metadata_path(cfg.out), meta);
  }
  return out;
}

}  // namespace dsm

#endif  // DSM_COMMANDS_HPP_
