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

#include "test_util.hpp"

#include "qd/error.hpp"
#include "qd/harness.hpp"
#include "qd/serialize.hpp"

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace qd;
using namespace qd::test;
using nlohmann::json;

namespace {

ExperimentConfig sphere_config(int d, std::size_t k, std::size_t n) {
  ExperimentConfig cfg;
  cfg.objective.name = "sphere";
  cfg.objective.dim = d;
  cfg.initial = params_to_json(GaussianParams(Eigen::VectorXd::Ones(d), Eigen::MatrixXd::Identity(d, d)));
  cfg.step.batch_size = n;
  cfg.iterations = k;
  cfg.seed = 7;
  cfg.bootstrap = 16;
  return cfg;
}

std::vector<json> lines_of(const std::string& text) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    out.push_back(json::parse(line));
  }
  return out;
}

std::string run_to_string(const ExperimentConfig& cfg) {
  std::ostringstream out;
  run_experiment(cfg, out);
  return out.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

} // namespace

TEST_CASE("benchmark objectives") {
  CHECK(make_objective("sphere", 4)(Eigen::VectorXd::Zero(4)) == 0.0);
  CHECK(make_objective("sphere", 2)(vec({1, 2})) == 5.0);
  CHECK(make_objective("rosenbrock", 5)(Eigen::VectorXd::Ones(5)) == 0.0);
  CHECK(make_objective("rosenbrock", 2)(vec({0, 0})) == 1.0);
  CHECK(make_objective("rastrigin", 2)(vec({0, 0})) == 0.0);
  CHECK(make_objective("rastrigin", 1)(vec({0.5})) == doctest::Approx(10.0 + 0.25 + 10.0));
  const Objective om = make_objective("onemax", 4);
  CHECK(om.domain_kind() == DomainKind::DiscreteBits);
  CHECK(om(vec({1, 0, 1, 1})) == -3.0);
  CHECK(make_objective("linear", 3)(vec({1, 2, 3})) == 6.0);
  CHECK_THROWS_AS(make_objective("griewank", 2), ConfigError);
  CHECK_THROWS_AS(make_objective("rosenbrock", 1), ConfigError);

  ObjectiveSpec tw;
  tw.name = "two_well";
  tw.dim = 2;
  tw.coeffs = {2, 0};
  tw.offset = 1.5;
  const Objective two = make_objective(tw);
  CHECK(two(vec({2, 0})) == 1.5);
  CHECK(two(vec({-2, 0})) == 1.5);
  CHECK(two(vec({0, 0})) == 5.5);

  ObjectiveSpec ut;
  ut.name = "user_table";
  ut.dim = 2;
  ut.table = {3, 1, 2, 0};
  const Objective t = make_objective(ut);
  CHECK(t(vec({0, 0})) == 3.0);
  CHECK(t(vec({1, 0})) == 1.0);
  CHECK(t(vec({0, 1})) == 2.0);
  ut.table = {1, 2};
  CHECK_THROWS_AS(make_objective(ut), ConfigError);

  ObjectiveSpec ex;
  ex.name = "sphere";
  ex.dim = 1;
  ex.transform = "exp";
  const Objective e = make_objective(ex);
  CHECK(e(vec({1})) == std::exp(1.0));
  CHECK(e.name() == "exp(sphere)");
}

TEST_CASE("config JSON round trip") {
  ExperimentConfig cfg = sphere_config(3, 12, 200);
  cfg.step.rule = Rule::IgoNg;
  cfg.step.step_size = 0.5;
  cfg.step.weight = WeightFn::table({0, 0.2, 1}, {2, 0.25});
  cfg.step.tie_mode = TieMode::TieAveraged;
  cfg.renyi_alphas = {0.5};
  cfg.checks.igo_delta = false;
  cfg.quantile_level = 0.25;
  const std::string text = dump_compact(config_to_json(cfg));
  const ExperimentConfig back = config_from_json(json::parse(text));
  CHECK(back == cfg);
  CHECK(dump_compact(config_to_json(back)) == text);

  json j = config_to_json(cfg);
  j["colour"] = "blue";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(cfg);
  j.erase("initial");
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
  j = config_to_json(cfg);
  j["step"]["rule"] = "student_ml";
  CHECK_THROWS_AS(config_from_json(j).validate(), ConfigError);
  j = config_to_json(cfg);
  j["step"]["batch_size"] = 1;
  CHECK_THROWS_AS(config_from_json(j).validate(), ConfigError);
}

TEST_CASE("a run with K = 0 logs only header and footer") {
  const std::string log = run_to_string(sphere_config(2, 0, 50));
  const auto lines = lines_of(log);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0]["type"] == "header");
  CHECK(lines[0]["version"] == kVersion);
  CHECK(lines[1]["type"] == "footer");
  CHECK(lines[1]["completed_iterations"] == 0);
  CHECK(lines[1]["status"] == "ok");
}

TEST_CASE("log records and footer") {
  ExperimentConfig cfg = sphere_config(3, 6, 300);
  cfg.renyi_alphas = {0.5};
  const std::string log = run_to_string(cfg);
  const auto lines = lines_of(log);
  REQUIRE(lines.size() == 8);
  for (std::size_t k = 1; k <= 6; ++k) {
    const json& r = lines[k];
    CHECK(r["type"] == "iteration");
    CHECK(r["iteration"] == k - 1);
    CHECK(r["params_digest"].get<std::string>().size() == 16);
    CHECK(r["j_hat"]["stderr"].get<double>() >= 0.0);
    CHECK(r["delta_hat"].get<double>() ==
          r["kl_target_prev"]["value"].get<double>() - r["kl_target_next"]["value"].get<double>());
    CHECK(r["renyi_target"].size() == 1);
  }
  const json& f = lines.back();
  CHECK(f["completed_iterations"] == 6);
  CHECK(f["all_checks_pass"].get<bool>());
  CHECK(f["final_q_hat"].get<double>() > 0.0);
  // header echo parses back to the same config
  CHECK(config_from_json(lines[0]["config"]) == cfg);

  const std::string csv = log_to_csv(log);
  CHECK(csv.rfind("iteration,params_digest,j_hat", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("identical config and seed give byte-identical logs") {
  const ExperimentConfig cfg = sphere_config(3, 5, 200);
  const std::string a = run_to_string(cfg);
  setenv("QD_THREADS", "1", 1);
  const std::string b = run_to_string(cfg);
  unsetenv("QD_THREADS");
  CHECK(a == b);
  ExperimentConfig other = cfg;
  other.seed = 8;
  CHECK(run_to_string(other) != a);
}

TEST_CASE("a failing run leaves a partial log with a failure footer") {
  const ExperimentConfig cfg = sphere_config(2, 10, 100);
  std::atomic<int> calls = 0;
  const Objective bad("bad", DomainKind::Continuous, 2, [&calls](const Point& x) {
    return ++calls > 1000 ? std::nan("") : x.squaredNorm();
  });
  std::ostringstream out;
  const RunSummary s = run_experiment(cfg, bad, out);
  CHECK(s.failed);
  CHECK_FALSE(s.all_checks_pass);
  const auto lines = lines_of(out.str());
  CHECK(lines.back()["type"] == "footer");
  CHECK(lines.back()["status"] == "failed");
  CHECK(lines.back().contains("failure"));
  CHECK(lines.size() == s.completed_iterations + 2);
  CHECK(s.completed_iterations < 10);
}

TEST_CASE("summarize") {
  CHECK_THROWS_AS(summarize({}), ConfigError);
  const ExperimentConfig cfg = sphere_config(2, 4, 200);
  const std::string one = run_to_string(cfg);
  const json footer = lines_of(one).back();
  const SummaryTable t = summarize({one});
  CHECK(t.runs == 1);
  CHECK(t.all_pass == footer["all_checks_pass"].get<bool>());
  REQUIRE(t.checks.size() == footer["checks"].size());
  for (std::size_t i = 0; i < t.checks.size(); ++i) {
    const json& c = footer["checks"][i];
    CHECK(t.checks[i].check == c["name"].get<std::string>());
    CHECK(t.checks[i].run_pass_rate == (c["run_pass"].get<bool>() ? 1.0 : 0.0));
    CHECK(t.checks[i].iteration_pass_rate == doctest::Approx(c["pass_rate"].get<double>()));
  }
  CHECK(t.quantiles.size() == 4);

  ExperimentConfig reseeded = cfg;
  reseeded.seed = 99;
  const SummaryTable two = summarize({one, run_to_string(reseeded)});
  CHECK(two.runs == 2);
  CHECK(summary_to_csv(two).rfind("check,runs,runs_passed", 0) == 0);

  ExperimentConfig other = cfg;
  other.step.batch_size = 100;
  CHECK_THROWS_AS(summarize({one, run_to_string(other)}), ConfigError);
  CHECK_THROWS_AS(summarize({"{}"}), ConfigError);
}

TEST_CASE("oracle mode on a Bernoulli run") {
  ExperimentConfig cfg;
  cfg.objective.name = "onemax";
  cfg.objective.dim = 5;
  cfg.initial = params_to_json(BernoulliParams(Eigen::VectorXd::Constant(5, 0.5)));
  cfg.step.rule = Rule::IgoMl;
  cfg.step.step_size = 0.5;
  cfg.step.weight = WeightFn::indicator(0.3);
  cfg.step.batch_size = 200;
  cfg.step.tie_mode = TieMode::TieAveraged;
  cfg.iterations = 5;
  cfg.checks.diagnostics = false;
  std::ostringstream out;
  const OracleSummary s = run_oracle(cfg, out);
  CHECK(s.completed_iterations == 5);
  CHECK(s.all_pass);
  const auto lines = lines_of(out.str());
  CHECK(lines.back()["type"] == "oracle_footer");
  CHECK(lines[1]["exact"]["j_self"].get<double>() == doctest::Approx(0.3).epsilon(1e-13));

  ExperimentConfig g = sphere_config(2, 1, 50);
  CHECK_THROWS(run_oracle(g, out));
}

TEST_CASE("golden log of a tiny run") {
  const std::string dir = QD_GOLDEN_DIR;
  const ExperimentConfig cfg = load_config(dir + "/tiny_config.json");
  const std::string log = run_to_string(cfg);
  if (std::getenv("QD_UPDATE_GOLDEN") != nullptr) {
    std::ofstream(dir + "/tiny_log.jsonl", std::ios::binary) << log;
  }
  CHECK(log == read_file(dir + "/tiny_log.jsonl"));
}
