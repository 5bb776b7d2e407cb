/*
Copyright 2026 The qd Authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include "qd/algorithms.hpp"
#include "qd/core.hpp"
#include "qd/diagnostics.hpp"
#include "qd/proposals.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace qd {

inline constexpr const char* kVersion = "0.1.0";

struct ObjectiveSpec {
  /// sphere, rosenbrock, rastrigin, onemax, linear, two_well, user_table
  std::string name = "sphere";
  int dim = 2;
  /// "identity" or "exp": the algorithm sees exp(f).
  std::string transform = "identity";
  /// linear: c (default all ones); two_well: a (default e_1).
  std::vector<double> coeffs;
  /// user_table: one value per point of {0,1}^d.
  std::vector<double> table;
  double offset = 0.0;
  /// linear only: search over bits instead of R^d.
  bool bits = false;

  bool operator==(const ObjectiveSpec&) const = default;
};

Objective make_objective(const ObjectiveSpec& spec);
/// Named benchmark with default options.
Objective make_objective(const std::string& name, int dim);

struct CheckToggles {
  bool diagnostics = true;
  bool improvement = true;
  bool quantile = true;
  bool igo_delta = true;
  bool kl_decrease = true;
  /// Tolerated quantile-monotonicity violations per run.
  std::size_t max_monotone_violations = 2;

  bool operator==(const CheckToggles&) const = default;
};

struct ExperimentConfig {
  ObjectiveSpec objective;
  nlohmann::json initial;
  StepConfig step;
  std::size_t iterations = 50;
  /// 0 means "same as the optimization batch".
  std::size_t diag_batch_size = 0;
  std::uint64_t seed = 0;
  std::string output_dir = "qd_out";
  CheckToggles checks;
  std::vector<double> renyi_alphas;
  std::size_t bootstrap = 64;
  /// Negative means "q of the indicator weighting, else Z_w".
  double quantile_level = -1.0;
  std::vector<double> oracle_alphas = {0.25, 0.5, 0.75};

  ProposalParams initial_params() const;
  DiagnosticsConfig diagnostics_config() const;
  double effective_quantile_level() const;
  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

struct CheckSummary {
  std::string name;
  std::size_t applicable = 0;
  std::size_t passed = 0;
  double pass_rate = 1.0;
  bool run_pass = true;
};

struct RunSummary {
  std::size_t completed_iterations = 0;
  bool failed = false;
  std::string failure;
  double final_q_hat = 0.0;
  std::size_t monotone_violations = 0;
  std::vector<CheckSummary> checks;
  bool all_checks_pass = true;
};

/// Runs the experiment and streams the JSON-lines log: a header with the
/// config echo, one record per iteration, and a footer with the summary.
RunSummary run_experiment(const ExperimentConfig& cfg, std::ostream& log);
/// Same, with the objective supplied by the caller instead of cfg.objective.
RunSummary run_experiment(const ExperimentConfig& cfg, const Objective& obj, std::ostream& log);

/// Writes <out>/run_seed<S>.jsonl and <out>/run_seed<S>.csv.
RunSummary run_experiment_to_dir(const ExperimentConfig& cfg);

/// Per-iteration CSV derived from a log.
std::string log_to_csv(const std::string& log_text);

/// Exact discrete mode: Bernoulli proposals on a bit objective; each iteration
/// is checked against enumeration. Streams one JSON object per iteration.
struct OracleSummary {
  std::size_t completed_iterations = 0;
  bool all_pass = true;
  std::size_t failures = 0;
};
OracleSummary run_oracle(const ExperimentConfig& cfg, std::ostream& out);

struct SummaryRow {
  std::string check;
  std::size_t runs = 0;
  std::size_t runs_passed = 0;
  double run_pass_rate = 0.0;
  double iteration_pass_rate = 0.0;
};

struct QuantileTrajectoryRow {
  std::size_t iteration = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct SummaryTable {
  std::size_t runs = 0;
  std::vector<SummaryRow> checks;
  std::vector<QuantileTrajectoryRow> quantiles;
  bool all_pass = true;
};

/// Aggregates logs of runs sharing a config shape. Throws ConfigError on an
/// empty list or mixed shapes.
SummaryTable summarize(const std::vector<std::string>& log_texts);
std::string summary_to_csv(const SummaryTable& table);

} // namespace qd
