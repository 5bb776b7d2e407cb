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

#ifndef QD_QD_H
#define QD_QD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QD_API __declspec(dllexport)
#else
#define QD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Values 1..8 mirror the library's error kinds. */
typedef enum qd_status {
  QD_OK = 0,
  QD_ERR_DOMAIN = 1,
  QD_ERR_CONFIG = 2,
  QD_ERR_DEGENERATE_BATCH = 3,
  QD_ERR_FACTORIZATION = 4,
  QD_ERR_STEP_FAILURE = 5,
  QD_ERR_UNSUPPORTED = 6,
  QD_ERR_DEGENERATE_POINT = 7,
  QD_ERR_IO = 8,
  QD_ERR_INVALID_ARGUMENT = 64,
  QD_ERR_INTERNAL = 65
} qd_status;

typedef struct qd_experiment qd_experiment;
typedef struct qd_objective qd_objective;

QD_API const char* qd_version(void);

/* Message of the last failed call on this thread; "" if none. */
QD_API const char* qd_last_error(void);

/* Frees strings returned through char** out-parameters. */
QD_API void qd_string_free(char* s);

/**
 *  Parse an experiment configuration.
 *
 *  @param json [IN] - the configuration document (UTF-8)
 *  @param out [OUT] - the new experiment, to be released with qd_experiment_free
 *
 *  @return QD_OK, or QD_ERR_CONFIG when the document is invalid
 */
QD_API qd_status qd_experiment_from_json(const char* json, qd_experiment** out);
QD_API qd_status qd_experiment_from_file(const char* path, qd_experiment** out);
QD_API void qd_experiment_free(qd_experiment* exp);

QD_API qd_status qd_experiment_set_seed(qd_experiment* exp, uint64_t seed);
QD_API qd_status qd_experiment_set_iterations(qd_experiment* exp, uint64_t iterations);
QD_API qd_status qd_experiment_set_output_dir(qd_experiment* exp, const char* dir);

/* Output directory of the configuration; owned by the experiment. */
QD_API const char* qd_experiment_output_dir(const qd_experiment* exp);

/* Normalized configuration as compact JSON. */
QD_API qd_status qd_experiment_config_json(const qd_experiment* exp, char** out);

/**
 *  Run the experiment.
 *
 *  @param exp [IN] - the experiment
 *  @param log_path [IN] - JSON-lines log destination; NULL writes
 *                         <output_dir>/run_seed<S>.jsonl and .csv
 *  @param all_pass [OUT] - 1 when the run completed and every enabled check passed
 *
 *  @return QD_OK when the run executed, even if checks failed
 */
QD_API qd_status qd_experiment_run(const qd_experiment* exp, const char* log_path, int* all_pass);

/* Same as qd_experiment_run with the log returned as a string. */
QD_API qd_status qd_experiment_run_to_string(const qd_experiment* exp, char** log, int* all_pass);

/* Exact enumeration mode; the JSON-lines report is returned in `report`. */
QD_API qd_status qd_experiment_oracle(const qd_experiment* exp, char** report, int* all_pass);

/**
 *  Aggregate run logs.
 *
 *  @param logs [IN] - log texts
 *  @param count [IN] - number of logs, at least 1
 *  @param csv [OUT] - summary table as CSV
 *  @param all_pass [OUT] - 1 when every run passed all its checks
 */
QD_API qd_status qd_summarize(const char* const* logs, size_t count, char** csv, int* all_pass);

QD_API qd_status qd_objective_create(const char* name, int dim, qd_objective** out);
QD_API qd_status qd_objective_eval(const qd_objective* obj, const double* x, double* out);
QD_API int qd_objective_dim(const qd_objective* obj);
QD_API void qd_objective_free(qd_objective* obj);

/* Rank weights of n values for the indicator weighting with level q. */
QD_API qd_status qd_rank_weights(const double* f, size_t n, double q, int tie_averaged,
                                 double* out);

#ifdef __cplusplus
}
#endif

#endif
