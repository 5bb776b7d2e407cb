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

// qd command line: optimize, check, oracle and summarize, all through the C API.

#include "qd/qd.h"

#include <CLI11.hpp>

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

extern char** environ;

namespace {

constexpr int kExitChecksFailed = 1;
constexpr int kExitError = 2;

struct ExperimentDeleter {
  void operator()(qd_experiment* e) const { qd_experiment_free(e); }
};
using ExperimentPtr = std::unique_ptr<qd_experiment, ExperimentDeleter>;

struct StringDeleter {
  void operator()(char* s) const { qd_string_free(s); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

int report_error(qd_status s, const std::string& what) {
  std::cerr << "qd: " << what << ": " << qd_last_error() << " (status " << static_cast<int>(s)
            << ")\n";
  return kExitError;
}

ExperimentPtr load(const std::string& path, int& exit_code) {
  qd_experiment* raw = nullptr;
  const qd_status s = qd_experiment_from_file(path.c_str(), &raw);
  if (s != QD_OK) {
    exit_code = report_error(s, "cannot load config '" + path + "'");
    return nullptr;
  }
  return ExperimentPtr(raw);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string self_path(const char* argv0) {
  std::error_code ec;
  const auto p = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::string(argv0) : p.string();
}

bool parse_seed_range(const std::string& text, std::uint64_t& lo, std::uint64_t& hi) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      lo = hi = std::stoull(text);
    } else {
      lo = std::stoull(text.substr(0, dots));
      hi = std::stoull(text.substr(dots + 2));
    }
  } catch (const std::exception&) {
    return false;
  }
  return lo <= hi;
}

int summarize_texts(const std::vector<std::string>& texts, const std::string& csv_path) {
  std::vector<const char*> ptrs;
  for (const auto& t : texts) {
    ptrs.push_back(t.c_str());
  }
  char* csv = nullptr;
  int all_pass = 0;
  const qd_status s = qd_summarize(ptrs.data(), ptrs.size(), &csv, &all_pass);
  if (s != QD_OK) {
    return report_error(s, "summarize failed");
  }
  OwnedString owned(csv);
  std::cout << csv;
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    out << csv;
  }
  return all_pass != 0 ? 0 : kExitChecksFailed;
}

int run_optimize(const std::string& config, const std::optional<std::uint64_t>& seed,
                 const std::optional<std::uint64_t>& iterations, const std::string& out_dir) {
  int code = 0;
  ExperimentPtr exp = load(config, code);
  if (!exp) {
    return code;
  }
  if (seed) {
    qd_experiment_set_seed(exp.get(), *seed);
  }
  if (iterations) {
    qd_experiment_set_iterations(exp.get(), *iterations);
  }
  if (!out_dir.empty()) {
    qd_experiment_set_output_dir(exp.get(), out_dir.c_str());
  }
  int all_pass = 0;
  const qd_status s = qd_experiment_run(exp.get(), nullptr, &all_pass);
  if (s != QD_OK) {
    return report_error(s, "run failed");
  }
  std::cout << (all_pass != 0 ? "pass" : "FAIL") << '\n';
  return all_pass != 0 ? 0 : kExitChecksFailed;
}

int run_check(const char* argv0, const std::string& config, const std::string& seeds,
              const std::string& out_dir, unsigned jobs) {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  if (!parse_seed_range(seeds, lo, hi)) {
    std::cerr << "qd: --seeds expects A..B with A <= B\n";
    return kExitError;
  }
  int code = 0;
  ExperimentPtr exp = load(config, code);
  if (!exp) {
    return code;
  }
  const std::string dir = out_dir.empty() ? qd_experiment_output_dir(exp.get()) : out_dir;

  const std::string exe = self_path(argv0);
  struct Child {
    pid_t pid;
    std::uint64_t seed;
  };
  std::vector<Child> running;
  bool children_ok = true;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    for (auto it = running.begin(); it != running.end(); ++it) {
      if (it->pid == pid) {
        const int rc = WIFEXITED(status) ? WEXITSTATUS(status) : kExitError;
        std::cerr << "seed " << it->seed << ": "
                  << (rc == 0 ? "pass" : rc == kExitChecksFailed ? "checks failed" : "error")
                  << '\n';
        children_ok = children_ok && rc == 0;
        if (rc == kExitError) {
          code = kExitError;
        }
        running.erase(it);
        break;
      }
    }
  };
  for (std::uint64_t s = lo; s <= hi; ++s) {
    while (running.size() >= std::max(1U, jobs)) {
      reap_one();
    }
    const std::string seed = std::to_string(s);
    std::vector<std::string> args = {exe, "optimize", "--config", config, "--seed", seed, "--out", dir};
    std::vector<char*> argv;
    for (auto& a : args) {
      argv.push_back(a.data());
    }
    argv.push_back(nullptr);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
    pid_t pid = 0;
    const int rc = posix_spawn(&pid, exe.c_str(), &actions, nullptr, argv.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
      std::cerr << "qd: cannot spawn child for seed " << s << '\n';
      return kExitError;
    }
    running.push_back({pid, s});
  }
  while (!running.empty()) {
    reap_one();
  }
  if (code == kExitError) {
    return code;
  }

  std::vector<std::string> texts;
  for (std::uint64_t s = lo; s <= hi; ++s) {
    texts.push_back(read_file((std::filesystem::path(dir) / ("run_seed" + std::to_string(s) + ".jsonl")).string()));
  }
  const int rc = summarize_texts(texts, (std::filesystem::path(dir) / "summary.csv").string());
  if (rc == kExitError) {
    return rc;
  }
  return children_ok && rc == 0 ? 0 : kExitChecksFailed;
}

int run_oracle_cmd(const std::string& config) {
  int code = 0;
  ExperimentPtr exp = load(config, code);
  if (!exp) {
    return code;
  }
  char* report = nullptr;
  int all_pass = 0;
  const qd_status s = qd_experiment_oracle(exp.get(), &report, &all_pass);
  if (s != QD_OK) {
    return report_error(s, "oracle failed");
  }
  OwnedString owned(report);
  std::cout << report;
  return all_pass != 0 ? 0 : kExitChecksFailed;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"qd: divergence-decrease optimizers and their diagnostics"};
  app.set_version_flag("--version", std::string(qd_version()));
  app.require_subcommand(1);

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> iterations;
  std::string out_dir;
  auto* opt = app.add_subcommand("optimize", "run one experiment and write its log");
  opt->add_option("--config", config, "experiment config (JSON)")->required();
  opt->add_option("--seed", seed, "override the run seed");
  opt->add_option("--iterations", iterations, "override the iteration count");
  opt->add_option("--out", out_dir, "override the output directory");

  std::string seeds;
  unsigned jobs = 1;
  auto* chk = app.add_subcommand("check", "run a seed range in child processes and summarize");
  chk->add_option("--config", config, "experiment config (JSON)")->required();
  chk->add_option("--seeds", seeds, "seed range A..B")->required();
  chk->add_option("--out", out_dir, "override the output directory");
  chk->add_option("--jobs", jobs, "concurrent child processes")->check(CLI::PositiveNumber);

  auto* orc = app.add_subcommand("oracle", "exact enumeration checks on a discrete instance");
  orc->add_option("--config", config, "experiment config (JSON)")->required();

  std::vector<std::string> logs;
  std::string csv_path;
  auto* sum = app.add_subcommand("summarize", "aggregate run logs into a CSV table");
  sum->add_option("logs", logs, "JSON-lines run logs")->required()->check(CLI::ExistingFile);
  sum->add_option("--csv", csv_path, "also write the table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitError;
  }

  try {
    if (*opt) {
      return run_optimize(config, seed, iterations, out_dir);
    }
    if (*chk) {
      return run_check(argv[0], config, seeds, out_dir, jobs);
    }
    if (*orc) {
      return run_oracle_cmd(config);
    }
    std::vector<std::string> texts;
    for (const auto& l : logs) {
      texts.push_back(read_file(l));
    }
    return summarize_texts(texts, csv_path);
  } catch (const std::exception& e) {
    std::cerr << "qd: " << e.what() << '\n';
    return kExitError;
  }
}
