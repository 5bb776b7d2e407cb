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

#include "qd/harness.hpp"

#include "qd/error.hpp"
#include "qd/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace qd {

using nlohmann::json;

namespace {

constexpr double kExactSlack = 1e-12;

std::string fmt(double v) {
  if (!std::isfinite(v)) {
    return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  }
  return json(v).dump();
}

double json_real(const json& j) {
  if (j.is_number()) {
    return j.get<double>();
  }
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") {
      return HUGE_VAL;
    }
    if (s == "-inf") {
      return -HUGE_VAL;
    }
    if (s == "nan") {
      return std::nan("");
    }
  }
  throw ConfigError("expected a real, got " + j.dump());
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) {
    return fallback;
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(known.begin(), known.end(), [&](const char* k) { return key == k; }) ==
        known.end()) {
      throw ConfigError(std::string("unknown field '") + key + "' in " + where);
    }
  }
}

json objective_to_json(const ObjectiveSpec& s) {
  return {{"name", s.name},     {"dim", s.dim},       {"transform", s.transform},
          {"coeffs", s.coeffs}, {"table", s.table},   {"offset", s.offset},
          {"bits", s.bits}};
}

ObjectiveSpec objective_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("objective must be an object");
  }
  reject_unknown(j, {"name", "dim", "transform", "coeffs", "table", "offset", "bits"}, "objective");
  ObjectiveSpec s;
  s.name = get_or<std::string>(j, "name", s.name);
  s.dim = get_or<int>(j, "dim", s.dim);
  s.transform = get_or<std::string>(j, "transform", s.transform);
  s.coeffs = get_or<std::vector<double>>(j, "coeffs", {});
  s.table = get_or<std::vector<double>>(j, "table", {});
  s.offset = get_or<double>(j, "offset", 0.0);
  s.bits = get_or<bool>(j, "bits", false);
  return s;
}

json step_to_json(const StepConfig& s) {
  return {{"rule", to_string(s.rule)},
          {"step_size", s.step_size},
          {"weight", weight_to_json(s.weight)},
          {"batch_size", s.batch_size},
          {"sigma_variant", to_string(s.sigma_variant)},
          {"tie_mode", to_string(s.tie_mode)}};
}

StepConfig step_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("step must be an object");
  }
  reject_unknown(j, {"rule", "step_size", "weight", "batch_size", "sigma_variant", "tie_mode"},
                 "step");
  StepConfig s;
  if (j.contains("rule")) {
    s.rule = parse_rule(get_or<std::string>(j, "rule", ""));
  }
  s.step_size = get_or<double>(j, "step_size", s.step_size);
  if (j.contains("weight")) {
    s.weight = weight_from_json(j.at("weight"));
  }
  s.batch_size = get_or<std::size_t>(j, "batch_size", s.batch_size);
  if (j.contains("sigma_variant")) {
    s.sigma_variant = parse_sigma_variant(get_or<std::string>(j, "sigma_variant", ""));
  }
  if (j.contains("tie_mode")) {
    s.tie_mode = parse_tie_mode(get_or<std::string>(j, "tie_mode", ""));
  }
  return s;
}

json checks_to_json(const CheckToggles& c) {
  return {{"diagnostics", c.diagnostics},
          {"improvement", c.improvement},
          {"quantile", c.quantile},
          {"igo_delta", c.igo_delta},
          {"kl_decrease", c.kl_decrease},
          {"max_monotone_violations", c.max_monotone_violations}};
}

CheckToggles checks_from_json(const json& j) {
  reject_unknown(j,
                 {"diagnostics", "improvement", "quantile", "igo_delta", "kl_decrease",
                  "max_monotone_violations"},
                 "checks");
  CheckToggles c;
  c.diagnostics = get_or<bool>(j, "diagnostics", c.diagnostics);
  c.improvement = get_or<bool>(j, "improvement", c.improvement);
  c.quantile = get_or<bool>(j, "quantile", c.quantile);
  c.igo_delta = get_or<bool>(j, "igo_delta", c.igo_delta);
  c.kl_decrease = get_or<bool>(j, "kl_decrease", c.kl_decrease);
  c.max_monotone_violations =
      get_or<std::size_t>(j, "max_monotone_violations", c.max_monotone_violations);
  return c;
}

bool step_equal(const StepConfig& a, const StepConfig& b) {
  return a.rule == b.rule && a.step_size == b.step_size && a.weight == b.weight &&
         a.batch_size == b.batch_size && a.sigma_variant == b.sigma_variant &&
         a.tie_mode == b.tie_mode;
}

struct CheckTally {
  std::size_t applicable = 0;
  std::size_t passed = 0;
};

/// Accumulates per-check outcomes in first-seen order.
class Tally {
public:
  void add(const CheckOutcome& c) {
    auto it = std::find(order_.begin(), order_.end(), c.name);
    if (it == order_.end()) {
      order_.push_back(c.name);
    }
    auto& t = tallies_[c.name];
    if (c.applicable) {
      ++t.applicable;
      if (c.pass) {
        ++t.passed;
      }
    }
  }

  std::vector<CheckSummary> finish(std::size_t max_monotone_violations) const {
    std::vector<CheckSummary> out;
    for (const auto& name : order_) {
      const auto& t = tallies_.at(name);
      CheckSummary s;
      s.name = name;
      s.applicable = t.applicable;
      s.passed = t.passed;
      s.pass_rate = t.applicable == 0 ? 1.0
                                      : static_cast<double>(t.passed) /
                                            static_cast<double>(t.applicable);
      const std::size_t failed = t.applicable - t.passed;
      s.run_pass = name == "quantile_monotone" ? failed <= max_monotone_violations : failed == 0;
      out.push_back(s);
    }
    return out;
  }

private:
  std::vector<std::string> order_;
  std::map<std::string, CheckTally> tallies_;
};

json summary_to_json(const RunSummary& s) {
  json checks = json::array();
  for (const auto& c : s.checks) {
    checks.push_back({{"name", c.name},
                      {"applicable", c.applicable},
                      {"passed", c.passed},
                      {"pass_rate", c.pass_rate},
                      {"run_pass", c.run_pass}});
  }
  json j = {{"type", "footer"},
            {"status", s.failed ? "failed" : "ok"},
            {"completed_iterations", s.completed_iterations},
            {"final_q_hat", std::isfinite(s.final_q_hat) ? json(s.final_q_hat) : json(fmt(s.final_q_hat))},
            {"monotone_violations", s.monotone_violations},
            {"checks", checks},
            {"all_checks_pass", s.all_checks_pass}};
  if (s.failed) {
    j["failure"] = s.failure;
  }
  return j;
}

std::vector<json> parse_lines(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("malformed log line: ") + e.what());
    }
  }
  return out;
}

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace

ProposalParams ExperimentConfig::initial_params() const {
  return params_from_json(initial);
}

double ExperimentConfig::effective_quantile_level() const {
  if (quantile_level >= 0.0) {
    return quantile_level;
  }
  return step.weight.kind() == WeightFn::Kind::Indicator ? step.weight.q() : step.weight.mass();
}

DiagnosticsConfig ExperimentConfig::diagnostics_config() const {
  DiagnosticsConfig d;
  d.weight = step.weight;
  d.tie_mode = step.tie_mode;
  d.batch_size = diag_batch_size == 0 ? step.batch_size : diag_batch_size;
  d.quantile_level = effective_quantile_level();
  d.renyi_alphas = renyi_alphas;
  d.bootstrap.replicates = bootstrap;
  d.improvement = checks.improvement;
  d.quantile = checks.quantile;
  d.igo_delta = checks.igo_delta;
  d.kl_decrease = checks.kl_decrease;
  return d;
}

void ExperimentConfig::validate() const {
  const Objective obj = make_objective(objective);
  step.validate();
  const ProposalParams init = initial_params();
  if (dimension(init) != objective.dim) {
    throw ConfigError("initial proposal and objective differ in dimension");
  }
  check_family_compatible(init, step.rule);
  const bool discrete = std::holds_alternative<BernoulliParams>(init);
  if (discrete != (obj.domain_kind() == DomainKind::DiscreteBits)) {
    throw ConfigError("proposal family " + family_name(init) + " does not match the domain of " +
                      obj.name());
  }
  if (diag_batch_size == 1) {
    throw ConfigError("diagnostics batch size must be 0 or >= 2");
  }
  const double q = effective_quantile_level();
  if (!(q > 0.0 && q < 1.0)) {
    throw ConfigError("quantile level must lie in (0, 1)");
  }
  for (double a : renyi_alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw ConfigError("Renyi orders must lie in (0, 1)");
    }
  }
  for (double a : oracle_alphas) {
    if (!(a > 0.0 && a < 1.0)) {
      throw ConfigError("oracle Renyi orders must lie in (0, 1)");
    }
  }
}

json config_to_json(const ExperimentConfig& c) {
  return {{"objective", objective_to_json(c.objective)},
          {"initial", c.initial},
          {"step", step_to_json(c.step)},
          {"iterations", c.iterations},
          {"diag_batch_size", c.diag_batch_size},
          {"seed", c.seed},
          {"output_dir", c.output_dir},
          {"checks", checks_to_json(c.checks)},
          {"renyi_alphas", c.renyi_alphas},
          {"bootstrap", c.bootstrap},
          {"quantile_level", c.quantile_level},
          {"oracle_alphas", c.oracle_alphas}};
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) {
    throw ConfigError("config must be a JSON object");
  }
  reject_unknown(j,
                 {"objective", "initial", "step", "iterations", "diag_batch_size", "seed",
                  "output_dir", "checks", "renyi_alphas", "bootstrap", "quantile_level",
                  "oracle_alphas"},
                 "config");
  if (!j.contains("objective") || !j.contains("initial")) {
    throw ConfigError("config needs 'objective' and 'initial'");
  }
  ExperimentConfig c;
  c.objective = objective_from_json(j.at("objective"));
  c.initial = j.at("initial");
  if (j.contains("step")) {
    c.step = step_from_json(j.at("step"));
  }
  c.iterations = get_or<std::size_t>(j, "iterations", c.iterations);
  c.diag_batch_size = get_or<std::size_t>(j, "diag_batch_size", c.diag_batch_size);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir);
  if (j.contains("checks")) {
    c.checks = checks_from_json(j.at("checks"));
  }
  c.renyi_alphas = get_or<std::vector<double>>(j, "renyi_alphas", c.renyi_alphas);
  c.bootstrap = get_or<std::size_t>(j, "bootstrap", c.bootstrap);
  c.quantile_level = get_or<double>(j, "quantile_level", c.quantile_level);
  c.oracle_alphas = get_or<std::vector<double>>(j, "oracle_alphas", c.oracle_alphas);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open config '" + path + "'");
  }
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.objective == b.objective && a.initial == b.initial && step_equal(a.step, b.step) &&
         a.iterations == b.iterations && a.diag_batch_size == b.diag_batch_size &&
         a.seed == b.seed && a.output_dir == b.output_dir && a.checks == b.checks &&
         a.renyi_alphas == b.renyi_alphas && a.bootstrap == b.bootstrap &&
         a.quantile_level == b.quantile_level && a.oracle_alphas == b.oracle_alphas;
}

RunSummary run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  return run_experiment(cfg, make_objective(cfg.objective), log);
}

RunSummary run_experiment(const ExperimentConfig& cfg, const Objective& obj, std::ostream& log) {
  cfg.validate();
  const ProposalParams init = cfg.initial_params();
  const DiagnosticsConfig dcfg = cfg.diagnostics_config();

  log << dump_compact({{"type", "header"},
                       {"version", kVersion},
                       {"seed", cfg.seed},
                       {"config", config_to_json(cfg)}})
      << '\n'
      << std::flush;

  Tally tally;
  std::size_t violations = 0;
  const auto observer = [&](std::size_t k, const ProposalParams& next, const IterationReport* r) {
    json rec = r != nullptr ? report_to_json(*r) : json{{"iteration", k}};
    rec["type"] = "iteration";
    rec["params_digest"] = params_digest(next);
    log << dump_compact(rec) << '\n' << std::flush;
    if (r != nullptr) {
      for (const auto& c : r->bound_checks) {
        tally.add(c);
        if (c.name == "quantile_monotone" && c.applicable && !c.pass) {
          ++violations;
        }
      }
    }
  };
  const Trajectory traj =
      optimize(init, obj, cfg.step, cfg.iterations, cfg.seed,
               cfg.checks.diagnostics ? std::optional(dcfg) : std::nullopt, observer);

  RunSummary s;
  s.completed_iterations = traj.params_history.size() - 1;
  s.failed = traj.failed;
  s.failure = traj.failure;
  s.monotone_violations = violations;
  s.checks = tally.finish(cfg.checks.max_monotone_violations);
  s.all_checks_pass = !s.failed;
  for (const auto& c : s.checks) {
    s.all_checks_pass = s.all_checks_pass && c.run_pass;
  }
  // Final quantile on a fresh sample of the last proposal.
  const RandomStream est(cfg.seed, cfg.iterations, Purpose::Estimate);
  s.final_q_hat = empirical_quantile(
      obj.evaluate(sample(traj.params_history.back(), est, dcfg.batch_size)),
      dcfg.quantile_level);

  log << dump_compact(summary_to_json(s)) << '\n' << std::flush;
  return s;
}

RunSummary run_experiment_to_dir(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) {
    throw IoError("cannot create '" + cfg.output_dir + "': " + ec.message());
  }
  const fs::path base = fs::path(cfg.output_dir) / ("run_seed" + std::to_string(cfg.seed));
  const std::string log_path = base.string() + ".jsonl";
  RunSummary s;
  {
    std::ofstream out(log_path, std::ios::binary);
    if (!out) {
      throw IoError("cannot write '" + log_path + "'");
    }
    s = run_experiment(cfg, out);
  }
  std::ifstream in(log_path, std::ios::binary);
  std::stringstream text;
  text << in.rdbuf();
  std::ofstream csv(base.string() + ".csv", std::ios::binary);
  csv << log_to_csv(text.str());
  if (!csv) {
    throw IoError("cannot write CSV next to '" + log_path + "'");
  }
  return s;
}

std::string log_to_csv(const std::string& log_text) {
  const std::vector<json> lines = parse_lines(log_text);
  std::vector<std::string> check_names;
  for (const auto& l : lines) {
    if (l.value("type", "") == "iteration" && l.contains("bound_checks")) {
      for (const auto& c : l.at("bound_checks")) {
        const auto name = c.at("name").get<std::string>();
        if (std::find(check_names.begin(), check_names.end(), name) == check_names.end()) {
          check_names.push_back(name);
        }
      }
    }
  }
  std::ostringstream out;
  out << "iteration,params_digest,j_hat,j_hat_stderr,q_hat_prev,q_hat_next,kl_target_prev,"
         "kl_target_next,delta_hat,delta_hat_stderr,quantile_bound_rhs,quantile_bound_vacuous";
  for (const auto& n : check_names) {
    out << ",pass_" << n;
  }
  out << '\n';
  for (const auto& l : lines) {
    if (l.value("type", "") != "iteration") {
      continue;
    }
    out << l.at("iteration").get<std::size_t>() << ',' << l.at("params_digest").get<std::string>();
    if (!l.contains("j_hat")) {
      out << std::string(10 + check_names.size(), ',') << '\n';
      continue;
    }
    out << ',' << fmt(json_real(l["j_hat"]["value"])) << ',' << fmt(json_real(l["j_hat"]["stderr"]))
        << ',' << fmt(json_real(l["q_hat_prev"])) << ',' << fmt(json_real(l["q_hat_next"])) << ','
        << fmt(json_real(l["kl_target_prev"]["value"])) << ','
        << fmt(json_real(l["kl_target_next"]["value"])) << ',' << fmt(json_real(l["delta_hat"]))
        << ',' << fmt(json_real(l["delta_hat_stderr"])) << ','
        << fmt(json_real(l["quantile_bound"]["rhs"])) << ','
        << (l["quantile_bound"]["vacuous"].get<bool>() ? 1 : 0);
    for (const auto& n : check_names) {
      out << ',';
      for (const auto& c : l.at("bound_checks")) {
        if (c.at("name") == n && c.at("applicable").get<bool>()) {
          out << (c.at("pass").get<bool>() ? 1 : 0);
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

OracleSummary run_oracle(const ExperimentConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Objective obj = make_objective(cfg.objective);
  const ProposalParams init = cfg.initial_params();
  if (!std::holds_alternative<BernoulliParams>(init)) {
    throw ConfigError("oracle mode needs a Bernoulli proposal on a bit objective");
  }
  const DiscreteModel model(cfg.objective.dim);
  const WeightFn& w = cfg.step.weight;
  const double q = cfg.effective_quantile_level();
  const DiagnosticsConfig dcfg = cfg.diagnostics_config();

  OracleSummary summary;
  const Trajectory traj = optimize(init, obj, cfg.step, cfg.iterations, cfg.seed,
                                   cfg.checks.diagnostics ? std::optional(dcfg) : std::nullopt);

  for (std::size_t k = 0; k + 1 < traj.params_history.size(); ++k) {
    const ProposalParams& prev = traj.params_history[k];
    const ProposalParams& next = traj.params_history[k + 1];
    const ExactReport e = exact_report(model, obj, w, prev, next, q, cfg.oracle_alphas);
    const double z = e.z_w;

    json checks = json::array();
    auto add = [&](const char* name, bool applicable, bool pass) {
      checks.push_back({{"name", name}, {"applicable", applicable}, {"pass", !applicable || pass}});
      if (applicable && !pass) {
        summary.all_pass = false;
        ++summary.failures;
      }
    };
    add("j_self_equals_z_w", true, std::abs(e.j_self - z) <= kExactSlack * std::max(1.0, z));
    add("improvement", true, e.j_next >= std::exp(e.delta) * z - kExactSlack);
    add("target_kl_bound", w.max_value() <= 1.0, e.kl_prev <= -std::log(z) + kExactSlack);
    const bool increase = e.j_next > z + kExactSlack;
    add("quantile_monotone", w.kind() == WeightFn::Kind::Indicator && increase,
        e.q_next <= e.q_prev);
    bool renyi_ok = true;
    std::vector<ExactRenyi> sorted = e.renyi;
    std::sort(sorted.begin(), sorted.end(),
              [](const ExactRenyi& a, const ExactRenyi& b) { return a.alpha < b.alpha; });
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      const double upper = i + 1 < sorted.size() ? sorted[i + 1].prev : e.kl_prev;
      renyi_ok = renyi_ok && sorted[i].prev <= upper + kExactSlack;
    }
    add("renyi_monotone", !sorted.empty(), renyi_ok);

    json renyi = json::array();
    for (const auto& r : e.renyi) {
      renyi.push_back({{"alpha", r.alpha}, {"prev", r.prev}, {"next", r.next}});
    }
    json rec = {{"type", "oracle"},
                {"iteration", k},
                {"params_digest", params_digest(next)},
                {"exact",
                 {{"z_w", z},
                  {"j_self", e.j_self},
                  {"j_next", e.j_next},
                  {"q_prev", e.q_prev},
                  {"q_next", e.q_next},
                  {"kl_prev", e.kl_prev},
                  {"kl_next", e.kl_next},
                  {"delta", e.delta},
                  {"renyi", renyi}}},
                {"checks", checks}};
    if (k < traj.reports.size()) {
      const IterationReport& r = traj.reports[k];
      auto within = [](double est, double se, double exact) {
        return std::abs(est - exact) <= 3.0 * se + kExactSlack;
      };
      rec["monte_carlo"] = {
          {"j_hat", {{"value", r.j_hat.value}, {"stderr", r.j_hat.std_error}}},
          {"j_within_3se", within(r.j_hat.value, r.j_hat.std_error, e.j_next)},
          {"kl_prev_within_3se",
           within(r.kl_target_prev.value, r.kl_target_prev.std_error, e.kl_prev)},
          {"kl_next_within_3se",
           within(r.kl_target_next.value, r.kl_target_next.std_error, e.kl_next)}};
    }
    out << dump_compact(rec) << '\n' << std::flush;
    ++summary.completed_iterations;
  }
  json footer = {{"type", "oracle_footer"},
                 {"status", traj.failed ? "failed" : "ok"},
                 {"completed_iterations", summary.completed_iterations},
                 {"failures", summary.failures},
                 {"all_pass", summary.all_pass && !traj.failed}};
  if (traj.failed) {
    footer["failure"] = traj.failure;
    summary.all_pass = false;
  }
  out << dump_compact(footer) << '\n' << std::flush;
  return summary;
}

SummaryTable summarize(const std::vector<std::string>& log_texts) {
  if (log_texts.empty()) {
    throw ConfigError("nothing to summarize");
  }
  SummaryTable table;
  std::optional<json> shape;
  std::vector<std::string> order;
  std::map<std::string, SummaryRow> rows;
  std::map<std::string, std::pair<std::size_t, std::size_t>> iter_counts;
  std::map<std::size_t, std::vector<double>> quantiles;
  for (const auto& text : log_texts) {
    const std::vector<json> lines = parse_lines(text);
    if (lines.size() < 2 || lines.front().value("type", "") != "header" ||
        lines.back().value("type", "") != "footer") {
      throw ConfigError("log is missing its header or footer");
    }
    json cfg = lines.front().at("config");
    cfg.erase("seed");
    cfg.erase("output_dir");
    if (!shape) {
      shape = cfg;
    } else if (*shape != cfg) {
      throw ConfigError("logs come from differently shaped configs");
    }
    ++table.runs;
    const json& footer = lines.back();
    table.all_pass = table.all_pass && footer.at("all_checks_pass").get<bool>();
    for (const auto& c : footer.at("checks")) {
      const auto name = c.at("name").get<std::string>();
      if (!rows.contains(name)) {
        order.push_back(name);
        rows[name].check = name;
      }
      auto& row = rows[name];
      ++row.runs;
      if (c.at("run_pass").get<bool>()) {
        ++row.runs_passed;
      }
      iter_counts[name].first += c.at("applicable").get<std::size_t>();
      iter_counts[name].second += c.at("passed").get<std::size_t>();
    }
    for (const auto& l : lines) {
      if (l.value("type", "") == "iteration" && l.contains("q_hat_next")) {
        quantiles[l.at("iteration").get<std::size_t>()].push_back(json_real(l.at("q_hat_next")));
      }
    }
  }
  for (const auto& name : order) {
    SummaryRow row = rows[name];
    row.run_pass_rate = static_cast<double>(row.runs_passed) / static_cast<double>(row.runs);
    const auto [applicable, passed] = iter_counts[name];
    row.iteration_pass_rate =
        applicable == 0 ? 1.0 : static_cast<double>(passed) / static_cast<double>(applicable);
    table.checks.push_back(row);
  }
  for (const auto& [k, v] : quantiles) {
    table.quantiles.push_back({k, percentile(v, 0.5), percentile(v, 0.25), percentile(v, 0.75)});
  }
  return table;
}

std::string summary_to_csv(const SummaryTable& t) {
  std::ostringstream out;
  out << "check,runs,runs_passed,run_pass_rate,iteration_pass_rate\n";
  for (const auto& r : t.checks) {
    out << r.check << ',' << r.runs << ',' << r.runs_passed << ',' << fmt(r.run_pass_rate) << ','
        << fmt(r.iteration_pass_rate) << '\n';
  }
  out << "\niteration,q_hat_median,q_hat_q1,q_hat_q3\n";
  for (const auto& r : t.quantiles) {
    out << r.iteration << ',' << fmt(r.median) << ',' << fmt(r.q1) << ',' << fmt(r.q3) << '\n';
  }
  return out.str();
}

} // namespace qd
