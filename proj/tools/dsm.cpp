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
// Command-line front end: dsm impute | estimate | simulate.

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dsm/commands.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitSchema = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitConvergence = 5;

int exit_code(dsm::ErrorCategory category) {
  switch (category) {
    case dsm::ErrorCategory::kUsage: return kExitUsage;
    case dsm::ErrorCategory::kSchema: return kExitSchema;
    case dsm::ErrorCategory::kNumeric: return kExitNumeric;
    case dsm::ErrorCategory::kConvergence: return kExitConvergence;
  }
  return 1;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

void add_sample_options(CLI::App* cmd, dsm::RunConfig& cfg, std::string& covariates) {
  cmd->add_option("--sample-a", cfg.sample_a, "Nonprobability sample CSV (covariates and outcome)")->required();
  cmd->add_option("--sample-b", cfg.sample_b, "Probability sample CSV (covariates and design weight)")->required();
  cmd->add_option("--outcome", cfg.roles.outcome, "Outcome column in sample A")->capture_default_str();
  cmd->add_option("--weight", cfg.roles.weight, "Design weight column in sample B")->capture_default_str();
  cmd->add_option("--covariates", covariates, "Comma-separated covariate columns (default: all shared columns)");
  cmd->add_option("--m", cfg.m, "Number of matches per unit")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--threads", cfg.threads, "Worker threads (0 = DSM_THREADS or hardware)");
}

}  // namespace

int main(int argc, char** argv) {
  dsm::RunConfig cfg;
  std::string covariates;
  std::string rows;

  CLI::App app{"Double score matching mass imputation"};
  app.require_subcommand(1);
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();

  auto* impute = app.add_subcommand("impute", "Impute outcomes for sample B");
  add_sample_options(impute, cfg, covariates);
  impute->add_option("--seed", cfg.seed, "Random seed");
  impute->add_option("--out", cfg.out, "Output CSV")->required();

  auto* estimate = app.add_subcommand("estimate", "Point estimates, variance and bootstrap intervals");
  add_sample_options(estimate, cfg, covariates);
  estimate->add_option("--seed", cfg.seed, "Random seed");
  estimate->add_option("--j", cfg.j, "Inner neighbours for the variance estimate")->capture_default_str();
  estimate->add_option("--bootstrap", cfg.bootstrap, "Wild bootstrap replicates")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  estimate->add_option("--alpha", cfg.alpha, "Interval level is 1 - alpha")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  estimate->add_flag("--debias,!--no-debias", cfg.debias, "Report de-biased estimators and intervals");
  estimate->add_option("--out", cfg.out, "Report CSV")->required();

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo tables");
  simulate->add_option("--table", cfg.table, "Table id")
      ->required()
      ->check(CLI::IsMember({"1", "2", "3", "4", "a1", "A1"}));
  simulate->add_option("--reps", cfg.reps, "Replications (default depends on --scale)");
  simulate->add_option("--seed", cfg.seed, "Random seed");
  simulate->add_option("--scale", cfg.scale, "desk or paper")
      ->capture_default_str()
      ->check(CLI::IsMember({"desk", "paper"}));
  simulate->add_option("--m", cfg.m, "Matches per unit for tables 1-3 and a1")->capture_default_str();
  simulate->add_option("--omit", cfg.omit, "Covariate (1-4) dropped by misspecified models")
      ->capture_default_str()
      ->check(CLI::Range(1, 4));
  simulate->add_option("--rows", rows, "Comma-separated 1-based rows of table 4");
  simulate->add_option("--alpha", cfg.alpha, "Interval level is 1 - alpha")->capture_default_str();
  simulate->add_option("--threads", cfg.threads, "Worker threads (0 = DSM_THREADS or hardware)");
  simulate->add_option("--out", cfg.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    if (!covariates.empty()) cfg.roles.covariates = split(covariates);
    for (const std::string& r : split(rows)) cfg.rows.push_back(static_cast<dsm::Index>(std::stol(r)));
    if (*impute) {
      dsm::cmd_impute(cfg);
    } else if (*estimate) {
      dsm::cmd_estimate(cfg);
    } else {
      dsm::cmd_simulate(cfg);
    }
  } catch (const dsm::Error& e) {
    std::cerr << "dsm: " << e.what() << '\n';
    return exit_code(dsm::error_category(e.code()));
  } catch (const std::invalid_argument& e) {
    std::cerr << "dsm: invalid argument: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "dsm: " << e.what() << '\n';
    return 1;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << "dsm: done in " << seconds << " s\n";
  return 0;
}
