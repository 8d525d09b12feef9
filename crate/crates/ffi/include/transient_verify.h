#ifndef TRANSIENT_VERIFY_H
#define TRANSIENT_VERIFY_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bumped whenever a signature or struct layout in this header changes.
 */
#define TV_ABI_VERSION 1

typedef enum TvConclusion {
  TV_CONCLUSION_VALIDATED = 0,
  TV_CONCLUSION_NECESSARY_CONDITION_FAILED = 1,
  TV_CONCLUSION_LADDER_EXHAUSTED = 2,
} TvConclusion;

typedef enum TvDestiny {
  TV_DESTINY_C_PLUS = 0,
  TV_DESTINY_C_MINUS = 1,
  TV_DESTINY_UNDECIDED = 2,
} TvDestiny;

typedef enum TvMode {
  TV_MODE_P32 = 0,
  TV_MODE_P64 = 1,
  TV_MODE_PDD = 2,
} TvMode;

typedef enum TvStatus {
  TV_STATUS_OK = 0,
  TV_STATUS_NULL_POINTER = 1,
  TV_STATUS_INVALID_ARGUMENT = 2,
  TV_STATUS_OVERFLOW = 3,
  TV_STATUS_NOT_A_NUMBER = 4,
  TV_STATUS_DIVERGENCE = 5,
  TV_STATUS_INVALID_CONFIG = 6,
  TV_STATUS_DIAGNOSTICS_FAILED = 7,
  TV_STATUS_OUT_OF_RANGE = 8,
  TV_STATUS_PANIC = 9,
} TvStatus;

typedef enum TvVariant {
  TV_VARIANT_YA = 0,
  TV_VARIANT_YB = 1,
  TV_VARIANT_YC = 2,
} TvVariant;

/**
 * Opaque validity-report handle.
 */
typedef struct TvReport TvReport;

/**
 * Opaque trajectory handle.
 */
typedef struct TvTrajectory TvTrajectory;

/**
 * A double-double value; `lo` is zero outside the double-double mode.
 */
typedef struct TvValue {
  double hi;
  double lo;
} TvValue;

/**
 * Inputs of [`tv_simulate`]. `mode` takes a `TvMode` value and `variant` a
 * `TvVariant` value.
 */
typedef struct TvSimulateParams {
  double sigma;
  double r;
  double b;
  double ic[3];
  double dt;
  double t_max;
  uint64_t record_stride;
  uint32_t mode;
  uint32_t variant;
} TvSimulateParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t tv_abi_version(void);

/**
 * Static, NUL-terminated description of a `TvStatus` value.
 */
const char *tv_status_message(uint32_t status);

/**
 * Rounds `x` to the nearest binary32 value, ties to even.
 */
enum TvStatus tv_round_p32(double x, double *out);

/**
 * `a + b` in `mode` (a `TvMode` value). Inputs are first rounded into the mode.
 */
enum TvStatus tv_m_add(uint32_t mode, struct TvValue a, struct TvValue b, struct TvValue *out);

enum TvStatus tv_m_sub(uint32_t mode, struct TvValue a, struct TvValue b, struct TvValue *out);

enum TvStatus tv_m_mul(uint32_t mode, struct TvValue a, struct TvValue b, struct TvValue *out);

enum TvStatus tv_m_div(uint32_t mode, struct TvValue a, struct TvValue b, struct TvValue *out);

/**
 * Integrates one trajectory. On `TV_STATUS_DIVERGENCE` the handle still
 * receives the samples recorded before the failure.
 */
enum TvStatus tv_simulate(const struct TvSimulateParams *params, struct TvTrajectory **out);

/**
 * Number of recorded samples; 0 for a null handle.
 */
size_t tv_trajectory_len(const struct TvTrajectory *traj);

/**
 * Copies sample `index` into `t` and `state` (three doubles).
 */
enum TvStatus tv_trajectory_sample(const struct TvTrajectory *traj,
                                   size_t index,
                                   double *t,
                                   double *state);

/**
 * Destiny and settle time (infinite when undecided).
 */
enum TvStatus tv_trajectory_destiny(const struct TvTrajectory *traj,
                                    enum TvDestiny *destiny,
                                    double *settle_time);

void tv_trajectory_free(struct TvTrajectory *traj);

/**
 * Runs the validity test on a JSON config (NUL-terminated UTF-8). Omitted
 * fields take their defaults.
 */
enum TvStatus tv_check_json(const char *config_json, struct TvReport **out);

enum TvStatus tv_report_conclusion(const struct TvReport *report, enum TvConclusion *out);

/**
 * The report as JSON. Release the string with [`tv_string_free`].
 */
enum TvStatus tv_report_to_json(const struct TvReport *report, char **out);

void tv_report_free(struct TvReport *report);

void tv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRANSIENT_VERIFY_H */
