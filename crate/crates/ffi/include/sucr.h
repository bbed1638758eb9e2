#ifndef SUCR_H
#define SUCR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SucrStatus {
  SUCR_STATUS_OK = 0,
  SUCR_STATUS_NULL_POINTER = 1,
  // An argument is outside the domain of the operation.
  SUCR_STATUS_INVALID_ARGUMENT = 2,
  SUCR_STATUS_CONFIG_ERROR = 3,
  SUCR_STATUS_ESTIMATION_ERROR = 4,
  SUCR_STATUS_IO_ERROR = 5,
  // Bad UTF-8, bad TOML syntax or a serialization failure.
  SUCR_STATUS_ENCODING_ERROR = 6,
  SUCR_STATUS_PANIC = 7,
} SucrStatus;

typedef enum SucrFormat {
  SUCR_FORMAT_CSV = 0,
  SUCR_FORMAT_JSON = 1,
} SucrFormat;

// Experiment configuration.
typedef struct SucrConfig SucrConfig;

// Radio parameters.
typedef struct SucrParams SucrParams;

// Experiment output.
typedef struct SucrResult SucrResult;

// One result row. `pa_used` is NaN when the experiment has no access
// probability (the two-user sweep).
typedef struct SucrRow {
  double sweep_value;
  double pa_used;
  double p_resolved;
  double p_false_positive;
  double p_false_negative;
  double ci_halfwidth;
  uint64_t trials_effective;
} SucrRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the most recent failure on this thread, or NULL if none.
//
// The pointer stays valid until the next failing call on this thread.
const char *sucr_last_error_message(void);

// Creates a validated parameter set.
//
// # Safety
// `out` must be a valid pointer to writable storage for a handle.
enum SucrStatus sucr_params_new(size_t antennas,
                                double ul_pilot_power,
                                double dl_pilot_power,
                                double noise_power,
                                size_t pilots,
                                size_t users,
                                double access_probability,
                                struct SucrParams **out);

// Default parameters: 100 antennas, unit powers, 10 pilots, 50 UEs,
// `P_a = 1`.
struct SucrParams *sucr_params_default(void);

// # Safety
// `params` must be NULL or a handle from this library, not yet freed.
void sucr_params_free(struct SucrParams *params);

// Maximum-likelihood estimate of the contention sum-gain from `z`.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer.
enum SucrStatus sucr_ml_estimate(const struct SucrParams *params,
                                 double z_re,
                                 double z_im,
                                 double beta,
                                 double *out);

// Closed-form estimate of the contention sum-gain from `Re z`.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer.
enum SucrStatus sucr_approx_estimate(const struct SucrParams *params,
                                     double z_re,
                                     double z_im,
                                     double beta,
                                     double *out);

// Log-density of `Re z` given `alpha`.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer.
enum SucrStatus sucr_log_f1(const struct SucrParams *params,
                            double z_re,
                            double alpha,
                            double beta,
                            double *out);

// Log-density of `Im z` given `alpha`.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer.
enum SucrStatus sucr_log_f2(const struct SucrParams *params,
                            double z_im,
                            double alpha,
                            double beta,
                            double *out);

// Activation rule: 1 if the UE stays active, 0 if it pulls out, -1 on
// invalid input.
int sucr_decide(double beta, double alpha_hat, double delta, size_t antennas);

// Probability that two or more UEs pick a given pilot.
//
// # Safety
// `params` must be a live handle and `out` a valid pointer.
enum SucrStatus sucr_collision_probability(const struct SucrParams *params, double *out);

// Default config of a preset: "two-user", "antennas", "bias" or "custom".
//
// # Safety
// `name` must be a NUL-terminated string and `out` a valid pointer.
enum SucrStatus sucr_config_preset(const char *name, struct SucrConfig **out);

// Parses and validates a TOML config.
//
// # Safety
// `toml` must be a NUL-terminated string and `out` a valid pointer.
enum SucrStatus sucr_config_from_toml(const char *toml, struct SucrConfig **out);

// # Safety
// `config` must be a live handle.
enum SucrStatus sucr_config_set_trials(struct SucrConfig *config, uint64_t trials);

// # Safety
// `config` must be a live handle.
enum SucrStatus sucr_config_set_seed(struct SucrConfig *config, uint64_t seed);

// # Safety
// `config` must be NULL or a handle from this library, not yet freed.
void sucr_config_free(struct SucrConfig *config);

// Runs the configured experiment. `threads = 0` uses every core; the
// result does not depend on the thread count.
//
// # Safety
// `config` must be a live handle and `out` a valid pointer.
enum SucrStatus sucr_run(const struct SucrConfig *config, size_t threads, struct SucrResult **out);

// Number of rows, or 0 for a NULL handle.
//
// # Safety
// `result` must be NULL or a live handle.
size_t sucr_result_len(const struct SucrResult *result);

// # Safety
// `result` must be a live handle and `out` a valid pointer.
enum SucrStatus sucr_result_row(const struct SucrResult *result, size_t index, struct SucrRow *out);

// Writes `result` to `path`. JSON output embeds `config`.
//
// # Safety
// `result` and `config` must be live handles and `path` a NUL-terminated
// string.
enum SucrStatus sucr_result_write(const struct SucrResult *result,
                                  const struct SucrConfig *config,
                                  const char *path,
                                  enum SucrFormat format);

// # Safety
// `result` must be NULL or a handle from this library, not yet freed.
void sucr_result_free(struct SucrResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUCR_H */
