/* C interface to the mvpi solver library. Handles are opaque and immutable
 * once created, so distinct threads may share them. Every call returns a
 * status; on failure mvpi_last_error() holds a one-line message for the
 * calling thread. */
#ifndef MVPI_MVPI_H
#define MVPI_MVPI_H

#include <stddef.h>
#include <stdint.h>

#if defined(MVPI_BUILDING_LIBRARY)
#define MVPI_API __attribute__((visibility("default")))
#else
#define MVPI_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mvpi_status {
  MVPI_OK = 0,
  MVPI_E_INVALID_ARGUMENT = 1,
  MVPI_E_INVARIANT = 2,
  MVPI_E_NUMERIC = 3,
  MVPI_E_NON_ERGODIC = 4,
  MVPI_E_UNCOVERED = 5,
  MVPI_E_ZERO_DENOMINATOR = 6,
  MVPI_E_DEGENERATE_SAMPLE = 7,
  MVPI_E_DIVERGENCE = 8,
  MVPI_E_CONVERGENCE = 9,
  MVPI_E_IO = 10,
  MVPI_E_PARSE = 11,
  MVPI_E_INTERNAL = 12
} mvpi_status;

typedef struct mvpi_mdp mvpi_mdp;
typedef struct mvpi_batch mvpi_batch;
typedef struct mvpi_result mvpi_result;

MVPI_API const char* mvpi_version(void);
MVPI_API const char* mvpi_status_name(mvpi_status status);
/* Message of the last failed call on this thread; "" if none. */
MVPI_API const char* mvpi_last_error(void);

/* ---- MDPs ---- */

/* `source` is a JSON file path or one of builtin:fig3, builtin:chain2,
 * builtin:branch, builtin:swap. builtin:fig3 carries its sampling
 * distribution. */
MVPI_API mvpi_status mvpi_mdp_load(const char* source, mvpi_mdp** out);
MVPI_API mvpi_status mvpi_mdp_random(size_t n_states, size_t n_actions, uint64_t seed,
                                     double gamma, mvpi_mdp** out);
MVPI_API mvpi_status mvpi_mdp_save(const mvpi_mdp* mdp, const char* path);
MVPI_API mvpi_status mvpi_mdp_shape(const mvpi_mdp* mdp, size_t* n_states, size_t* n_actions,
                                    double* gamma);
/* 1 when the MDP document carries a sampling distribution d. */
MVPI_API int mvpi_mdp_has_sampling_distribution(const mvpi_mdp* mdp);
MVPI_API void mvpi_mdp_free(mvpi_mdp* mdp);

/* ---- Exact and gradient MVPI ---- */

typedef enum mvpi_improver { MVPI_IMPROVER_EXACT = 0, MVPI_IMPROVER_SOFTMAX = 1 } mvpi_improver;
typedef enum mvpi_setting { MVPI_SETTING_DISCOUNTED = 0, MVPI_SETTING_AVERAGE = 1 } mvpi_setting;

typedef struct mvpi_solve_options {
  double lambda;
  mvpi_improver improver;
  mvpi_setting setting;
  int max_outer_iterations;
  double objective_tolerance;
  double step_size;         /* softmax improver only */
  int inner_iterations;     /* softmax improver only */
  double gradient_tolerance; /* softmax improver only */
} mvpi_solve_options;

MVPI_API void mvpi_solve_options_init(mvpi_solve_options* options);
/* Trace columns iter,y,J,ER,VR,VG0,J_lambda; starts from the uniform policy. */
MVPI_API mvpi_status mvpi_solve(const mvpi_mdp* mdp, const mvpi_solve_options* options,
                                mvpi_result** out);

/* ---- Off-line MVPI ---- */

/* `d` is row-major n_states x n_actions; NULL means no assumed distribution. */
MVPI_API mvpi_status mvpi_batch_sample(const mvpi_mdp* mdp, const double* d, size_t size,
                                       uint64_t seed, mvpi_batch** out);
/* `d_path` may be NULL. */
MVPI_API mvpi_status mvpi_batch_load(const char* csv_path, const char* d_path, mvpi_batch** out);
/* Writes the CSV, and the d sidecar when `d_path` is non-NULL and d is known. */
MVPI_API mvpi_status mvpi_batch_save(const mvpi_batch* batch, const char* csv_path,
                                     const char* d_path);
MVPI_API size_t mvpi_batch_size(const mvpi_batch* batch);
MVPI_API void mvpi_batch_free(mvpi_batch* batch);

typedef struct mvpi_offline_options {
  double lambda;
  int outer_iterations;
  int actor_steps;
  double actor_step_size;
  double critic_step_size;
  int critic_epochs;
  int empirical_ratio_denominator; /* 0 divides by the assumed d */
  int use_true_model;              /* requires an MDP; skips model estimation */
  double gamma;                    /* used when no MDP is given */
  uint64_t seed;
} mvpi_offline_options;

MVPI_API void mvpi_offline_options_init(mvpi_offline_options* options);
/* `mdp` may be NULL; when present it fixes the shape, gamma and mu0 and feeds
 * the logged J_lambda. Without it the shape is inferred from the batch and
 * mu0 is uniform. Trace columns iter,y,pi_a0_s0,J_lambda. */
MVPI_API mvpi_status mvpi_offline(const mvpi_batch* batch, const mvpi_mdp* mdp,
                                  const mvpi_offline_options* options, mvpi_result** out);

/* ---- Online MVPI ---- */

typedef struct mvpi_online_options {
  double lambda;
  size_t window;
  double actor_step_size;
  double critic_step_size;
  long total_steps;
  long log_every;
  int discounted_weighting;
  uint64_t seed;
} mvpi_online_options;

MVPI_API void mvpi_online_options_init(mvpi_online_options* options);
/* Trace columns step,y,pi_a0_s0,J_lambda. */
MVPI_API mvpi_status mvpi_online(const mvpi_mdp* mdp, const mvpi_online_options* options,
                                 mvpi_result** out);

/* ---- MVP baseline ---- */

typedef struct mvpi_baseline_options {
  double lambda;
  int iterations;
  int rollouts_per_iteration;
  double step_size;
  size_t horizon; /* 0 picks the truncation horizon */
  uint64_t seed;
} mvpi_baseline_options;

MVPI_API void mvpi_baseline_options_init(mvpi_baseline_options* options);
/* Trace columns iter,y,mean_G0,J_lambda,VG0,pi_a0_s0. */
MVPI_API mvpi_status mvpi_baseline(const mvpi_mdp* mdp, const mvpi_baseline_options* options,
                                   mvpi_result** out);

/* ---- Results ---- */

MVPI_API size_t mvpi_result_rows(const mvpi_result* result);
MVPI_API size_t mvpi_result_cols(const mvpi_result* result);
MVPI_API const char* mvpi_result_column_name(const mvpi_result* result, size_t col);
MVPI_API mvpi_status mvpi_result_value(const mvpi_result* result, size_t row, size_t col,
                                       double* out);
/* Final policy pi(a|s). */
MVPI_API mvpi_status mvpi_result_policy(const mvpi_result* result, size_t s, size_t a,
                                        double* out);
/* Why the run stopped; "" for learners without a stopping rule. */
MVPI_API const char* mvpi_result_stop_reason(const mvpi_result* result);
/* Trace CSV; solve results append a state,action,prob block. */
MVPI_API mvpi_status mvpi_result_write_csv(const mvpi_result* result, const char* path);
MVPI_API void mvpi_result_free(mvpi_result* result);

typedef struct mvpi_episode_stats {
  double mean;
  double variance;
  double j_algo;
  double sharpe;  /* valid only when has_sharpe */
  int has_sharpe;
} mvpi_episode_stats;

/* Discounted returns of `episodes` truncated rollouts of the result's final
 * policy on `mdp`. */
MVPI_API mvpi_status mvpi_evaluate_episodes(const mvpi_mdp* mdp, const mvpi_result* result,
                                            double lambda, size_t episodes, uint64_t seed,
                                            mvpi_episode_stats* out);

/* Writes a double with 17 significant digits ("nan" for NaN) into buf.
 * Returns the length the full text needs. */
MVPI_API size_t mvpi_format_double(double x, char* buf, size_t size);

#ifdef __cplusplus
}
#endif

#endif
