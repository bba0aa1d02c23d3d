// Copyright 2026 The coopcarry Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*
 * C interface to the coopcarry library.
 *
 * Every fallible call returns a cc_status. On failure the calling thread's
 * last-error message describes the problem until its next failing call.
 * Strings returned through `char**` out-parameters are owned by the caller
 * and released with cc_string_free. Structured inputs and outputs are JSON
 * text; the schemas are listed in README.md.
 */

#ifndef COOPCARRY_COOPCARRY_H_
#define COOPCARRY_COOPCARRY_H_

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CC_API __declspec(dllexport)
#else
#define CC_API __attribute__((visibility("default")))
#endif

typedef enum cc_status {
  CC_OK = 0,
  CC_INVALID_ARGUMENT = 1,
  CC_INVALID_GEOMETRY = 2,
  CC_IO = 3,
  CC_STATE = 4,
  CC_NUMERIC = 5,
  CC_CONFIG = 6,
  CC_INTERNAL = 7
} cc_status;

typedef struct cc_trainer cc_trainer;
typedef struct cc_report cc_report;

CC_API const char* cc_version(void);
/* Message of this thread's most recent failure, "" if none. */
CC_API const char* cc_last_error(void);
CC_API const char* cc_status_name(cc_status status);
CC_API void cc_string_free(char* s);

/* -- configuration ------------------------------------------------------- */

/* Resolves a run configuration. `preset` is "default" or "desk"; `overlay`
 * is JSON merged over it key by key (NULL or "" for none). The result is the
 * complete, validated configuration. */
CC_API cc_status cc_config_resolve(const char* preset, const char* overlay,
                                   char** out_json);

/* The run configuration stored in a checkpoint. */
CC_API cc_status cc_checkpoint_config(const char* path, char** out_json);

/* -- training ------------------------------------------------------------ */

/* Called after every iteration with the iteration statistics as JSON.
 * Returning nonzero stops the run after that iteration; cc_trainer_run then
 * returns CC_STATE. */
typedef int (*cc_iteration_callback)(const char* stats_json, void* user);

CC_API cc_status cc_trainer_create(const char* run_config_json, cc_trainer** out);
CC_API void cc_trainer_destroy(cc_trainer* trainer);
/* Restores every piece of training state from a checkpoint. */
CC_API cc_status cc_trainer_resume(cc_trainer* trainer, const char* checkpoint_path);
/* Runs one iteration without touching the metrics file or checkpoints. */
CC_API cc_status cc_trainer_iterate(cc_trainer* trainer, char** stats_json);
/* Runs to the configured iteration count, writing the metrics CSV and
 * checkpoints named in the configuration. `callback` may be NULL. */
CC_API cc_status cc_trainer_run(cc_trainer* trainer, cc_iteration_callback callback,
                                void* user);
CC_API cc_status cc_trainer_save(const cc_trainer* trainer, const char* path);
CC_API int cc_trainer_iteration(const cc_trainer* trainer);
/* Mean completed-episode task return of uniform random actions under the
 * trainer's environment settings. */
CC_API cc_status cc_random_task_return(const char* run_config_json,
                                       int episodes_per_env, double* out);

/* -- evaluation ---------------------------------------------------------- */

/* `eval_json`: {"team_sizes", "shapes", "episodes", "seed", "both_hands",
 * "env"}, every key optional. `policy` is "oracle", "random", "zero" or
 * "checkpoint"; the last needs `checkpoint_path`. */
CC_API cc_status cc_evaluate(const char* eval_json, const char* policy,
                             const char* checkpoint_path, cc_report** out);
CC_API void cc_report_destroy(cc_report* report);
CC_API int cc_report_row_count(const cc_report* report);
CC_API cc_status cc_report_csv(const cc_report* report, char** out);
CC_API cc_status cc_report_json(const cc_report* report, char** out);
CC_API cc_status cc_report_episodes_jsonl(const cc_report* report, char** out);

/* Runs one episode and returns {"trajectory": ..., "metrics": ...}.
 * `demo_json`: {"team_size", "shape", "seed", "env"}, every key optional. */
CC_API cc_status cc_demo(const char* demo_json, const char* policy,
                         const char* checkpoint_path, char** out_json);

/* -- rewards and plots --------------------------------------------------- */

/* Every reward component for a static scene. `verbose` adds the principal
 * axes, support hull and per-axis coverage. */
CC_API cc_status cc_reward_check(const char* scene_json, int verbose, char** out_json);

CC_API cc_status cc_plot_trajectory_svg(const char* trajectory_json, char** out_svg);
CC_API cc_status cc_plot_metrics_svg(const char* metrics_csv, char** out_svg);

#ifdef __cplusplus
}
#endif

#endif /* COOPCARRY_COOPCARRY_H_ */
