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

#include "qd/qd.h"

#include "qd/error.hpp"
#include "qd/harness.hpp"
#include "qd/serialize.hpp"

#include <cstring>
#include <exception>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

struct qd_experiment {
  qd::ExperimentConfig cfg;
};

struct qd_objective {
  qd::Objective obj;
};

namespace {

thread_local std::string last_error;

qd_status fail(qd_status s, const char* msg) {
  last_error = msg;
  return s;
}

/// Runs `body`, mapping exceptions to status codes.
template <typename Body>
qd_status guarded(Body&& body) {
  try {
    last_error.clear();
    body();
    return QD_OK;
  } catch (const qd::Error& e) {
    return fail(static_cast<qd_status>(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(QD_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(QD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(QD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(QD_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

} // namespace

extern "C" {

const char* qd_version(void) {
  return qd::kVersion;
}

const char* qd_last_error(void) {
  return last_error.c_str();
}

void qd_string_free(char* s) {
  delete[] s;
}

qd_status qd_experiment_from_json(const char* json, qd_experiment** out) {
  if (json == nullptr || out == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    auto cfg = qd::config_from_json(nlohmann::json::parse(json));
    cfg.validate();
    *out = new qd_experiment{std::move(cfg)};
  });
}

qd_status qd_experiment_from_file(const char* path, qd_experiment** out) {
  if (path == nullptr || out == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    auto cfg = qd::load_config(path);
    cfg.validate();
    *out = new qd_experiment{std::move(cfg)};
  });
}

void qd_experiment_free(qd_experiment* exp) {
  delete exp;
}

qd_status qd_experiment_set_seed(qd_experiment* exp, uint64_t seed) {
  if (exp == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null experiment");
  }
  exp->cfg.seed = seed;
  return QD_OK;
}

qd_status qd_experiment_set_iterations(qd_experiment* exp, uint64_t iterations) {
  if (exp == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null experiment");
  }
  exp->cfg.iterations = static_cast<std::size_t>(iterations);
  return QD_OK;
}

qd_status qd_experiment_set_output_dir(qd_experiment* exp, const char* dir) {
  if (exp == nullptr || dir == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  exp->cfg.output_dir = dir;
  return QD_OK;
}

const char* qd_experiment_output_dir(const qd_experiment* exp) {
  return exp == nullptr ? "" : exp->cfg.output_dir.c_str();
}

qd_status qd_experiment_config_json(const qd_experiment* exp, char** out) {
  if (exp == nullptr || out == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] { *out = copy_string(qd::dump_compact(qd::config_to_json(exp->cfg))); });
}

qd_status qd_experiment_run(const qd_experiment* exp, const char* log_path, int* all_pass) {
  if (exp == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null experiment");
  }
  return guarded([&] {
    qd::RunSummary s;
    if (log_path == nullptr) {
      s = qd::run_experiment_to_dir(exp->cfg);
    } else {
      std::ofstream out(log_path, std::ios::binary);
      if (!out) {
        throw qd::IoError(std::string("cannot write '") + log_path + "'");
      }
      s = qd::run_experiment(exp->cfg, out);
    }
    if (all_pass != nullptr) {
      *all_pass = s.all_checks_pass ? 1 : 0;
    }
  });
}

qd_status qd_experiment_run_to_string(const qd_experiment* exp, char** log, int* all_pass) {
  if (exp == nullptr || log == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    std::ostringstream out;
    const qd::RunSummary s = qd::run_experiment(exp->cfg, out);
    *log = copy_string(out.str());
    if (all_pass != nullptr) {
      *all_pass = s.all_checks_pass ? 1 : 0;
    }
  });
}

qd_status qd_experiment_oracle(const qd_experiment* exp, char** report, int* all_pass) {
  if (exp == nullptr || report == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    std::ostringstream out;
    const qd::OracleSummary s = qd::run_oracle(exp->cfg, out);
    *report = copy_string(out.str());
    if (all_pass != nullptr) {
      *all_pass = s.all_pass ? 1 : 0;
    }
  });
}

qd_status qd_summarize(const char* const* logs, size_t count, char** csv, int* all_pass) {
  if ((logs == nullptr && count > 0) || csv == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    std::vector<std::string> texts;
    for (size_t i = 0; i < count; ++i) {
      if (logs[i] == nullptr) {
        throw qd::DomainError("null log text");
      }
      texts.emplace_back(logs[i]);
    }
    const qd::SummaryTable t = qd::summarize(texts);
    *csv = copy_string(qd::summary_to_csv(t));
    if (all_pass != nullptr) {
      *all_pass = t.all_pass ? 1 : 0;
    }
  });
}

qd_status qd_objective_create(const char* name, int dim, qd_objective** out) {
  if (name == nullptr || out == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] { *out = new qd_objective{qd::make_objective(name, dim)}; });
}

qd_status qd_objective_eval(const qd_objective* obj, const double* x, double* out) {
  if (obj == nullptr || x == nullptr || out == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const Eigen::Map<const Eigen::VectorXd> v(x, obj->obj.dim());
    *out = obj->obj(v);
  });
}

int qd_objective_dim(const qd_objective* obj) {
  return obj == nullptr ? 0 : obj->obj.dim();
}

void qd_objective_free(qd_objective* obj) {
  delete obj;
}

qd_status qd_rank_weights(const double* f, size_t n, double q, int tie_averaged, double* out) {
  if (f == nullptr || out == nullptr) {
    return fail(QD_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const auto w = qd::rank_weights(std::span<const double>(f, n), qd::WeightFn::indicator(q),
                                    tie_averaged != 0 ? qd::TieMode::TieAveraged
                                                      : qd::TieMode::Strict);
    std::copy(w.begin(), w.end(), out);
  });
}

} // extern "C"
