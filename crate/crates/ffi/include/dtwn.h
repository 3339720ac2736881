#ifndef DTWN_H
#define DTWN_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum DtwnStatus {
  DTWN_STATUS_OK = 0,
  DTWN_STATUS_NULL_POINTER = 1,
  DTWN_STATUS_INVALID_ARGUMENT = 2,
  DTWN_STATUS_CONFIG = 3,
  DTWN_STATUS_IO = 4,
  DTWN_STATUS_DIMENSION_MISMATCH = 5,
  DTWN_STATUS_NON_FINITE = 6,
  DTWN_STATUS_DIVERGED = 7,
  DTWN_STATUS_LEDGER = 8,
  DTWN_STATUS_CHECKPOINT = 9,
  DTWN_STATUS_BUFFER_TOO_SMALL = 10,
  DTWN_STATUS_PANIC = 11,
} DtwnStatus;

/**
 * Step-by-step environment for external controllers.
 */
typedef struct DtwnEnvironment DtwnEnvironment;

/**
 * Loaded experiment configuration.
 */
typedef struct DtwnExperiment DtwnExperiment;

/**
 * Result of a run.
 */
typedef struct DtwnReport DtwnReport;

/**
 * Dimensions of an environment.
 */
typedef struct DtwnEnvDims {
  uintptr_t num_agents;
  uintptr_t num_twins;
  uintptr_t state_dim;
  /**
   * Policy outputs per agent.
   */
  uintptr_t action_dim;
} DtwnEnvDims;

/**
 * Outcome of one step.
 */
typedef struct DtwnStepResult {
  double t_iteration;
  double t_local_training;
  double t_param_tx;
  double t_block_validation;
  double objective;
  double mean_reward;
  double global_loss;
  uintptr_t verified_models;
  bool done;
} DtwnStepResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes. Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t dtwn_last_error(char *buf, uintptr_t len);

/**
 * Upper bound on global rounds, `ceil(1 / (1 − θ_G))`.
 *
 * # Safety
 * `rounds` must be a valid pointer.
 */
enum DtwnStatus dtwn_global_iteration_bound(double theta_g, uint64_t *rounds);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `exp` a valid pointer.
 */
enum DtwnStatus dtwn_experiment_load(const char *path, struct DtwnExperiment **exp);

/**
 * # Safety
 * `exp` must be a handle from [`dtwn_experiment_load`].
 */
enum DtwnStatus dtwn_experiment_set_seed(struct DtwnExperiment *exp, uint64_t seed);

/**
 * # Safety
 * `exp` must be a handle from [`dtwn_experiment_load`].
 */
enum DtwnStatus dtwn_experiment_set_episodes(struct DtwnExperiment *exp,
                                             uintptr_t episodes,
                                             uintptr_t eval_episodes);

/**
 * Runs the configured pipeline, writing outputs under `out_dir`.
 *
 * # Safety
 * `exp` must be a live handle, `out_dir` a NUL-terminated string and
 * `report` a valid pointer.
 */
enum DtwnStatus dtwn_experiment_run(struct DtwnExperiment *exp,
                                    const char *out_dir,
                                    struct DtwnReport **report);

/**
 * # Safety
 * `exp` must be null or a handle not yet freed.
 */
void dtwn_experiment_free(struct DtwnExperiment *exp);

/**
 * Number of training episodes in the report.
 *
 * # Safety
 * `report` must be a live handle and `n` a valid pointer.
 */
enum DtwnStatus dtwn_report_episodes(struct DtwnReport *report, uintptr_t *n);

/**
 * Median evaluation iteration time of `policy` ("learned", "random" or
 * "average").
 *
 * # Safety
 * `report` must be a live handle, `policy` a NUL-terminated string and
 * `median` a valid pointer.
 */
enum DtwnStatus dtwn_report_eval_median(struct DtwnReport *report,
                                        const char *policy,
                                        double *median);

/**
 * Copies the cumulative average cost series into `buf`. `len` receives
 * the series length; fails with `BufferTooSmall` if `cap` is short.
 *
 * # Safety
 * `buf` must point to `cap` writable doubles (or be null with `cap` 0).
 */
enum DtwnStatus dtwn_report_cumulative_cost(struct DtwnReport *report,
                                            double *buf,
                                            uintptr_t cap,
                                            uintptr_t *len);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void dtwn_report_free(struct DtwnReport *report);

/**
 * Builds the environment described by an experiment.
 *
 * # Safety
 * `exp` must be a live handle and `env` a valid pointer.
 */
enum DtwnStatus dtwn_env_new(struct DtwnExperiment *exp, struct DtwnEnvironment **env);

/**
 * # Safety
 * `env` must be a live handle and `dims` a valid pointer.
 */
enum DtwnStatus dtwn_env_dims(struct DtwnEnvironment *env, struct DtwnEnvDims *dims);

/**
 * Starts an episode and writes the state features into `state`.
 *
 * # Safety
 * `state` must point to `cap` writable doubles.
 */
enum DtwnStatus dtwn_env_reset(struct DtwnEnvironment *env,
                               uint64_t episode_seed,
                               double *state,
                               uintptr_t cap);

/**
 * Applies policy outputs in `[-1, 1]`, laid out agent-major
 * (`num_agents * action_dim` values). Writes the next state features and
 * the step outcome.
 *
 * # Safety
 * `outputs` must point to `len` doubles, `next_state` to `cap` writable
 * doubles and `result` must be a valid pointer.
 */
enum DtwnStatus dtwn_env_step(struct DtwnEnvironment *env,
                              const double *outputs,
                              uintptr_t len,
                              double *next_state,
                              uintptr_t cap,
                              struct DtwnStepResult *result);

/**
 * # Safety
 * `env` must be null or a handle not yet freed.
 */
void dtwn_env_free(struct DtwnEnvironment *env);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DTWN_H */
