#ifndef FEDMINIMAX_H
#define FEDMINIMAX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FmStatus {
  FM_STATUS_OK = 0,
  FM_STATUS_NULL_POINTER = 1,
  FM_STATUS_INVALID_ARGUMENT = 2,
  FM_STATUS_CONFIG = 3,
  FM_STATUS_UNSUPPORTED = 4,
  FM_STATUS_DIVERGED = 5,
  FM_STATUS_IO = 6,
  FM_STATUS_OUT_OF_RANGE = 7,
  FM_STATUS_PANIC = 8,
} FmStatus;

/**
 * Parsed run configuration.
 */
typedef struct FmConfig FmConfig;

/**
 * Constraint report for one variant.
 */
typedef struct FmReport FmReport;

/**
 * Trace of one finished run.
 */
typedef struct FmTrace FmTrace;

/**
 * One trace row; metrics a problem does not define are NaN.
 */
typedef struct FmRecord {
  uint64_t t;
  bool is_sync;
  double dist_x_sq;
  double dist_y_sq;
  double grad_norm_f;
  double est_err_x;
  double est_err_y;
  double consensus_x;
  double objective;
  double auc;
  uint64_t sfo;
  uint64_t comm;
} FmRecord;

typedef struct FmCounters {
  uint64_t sfo_per_client;
  uint64_t comm_rounds;
  uint64_t local_steps;
} FmCounters;

typedef struct FmConstraint {
  /**
   * Owned by the report; valid until the report is freed.
   */
  const char *name;
  double lhs;
  double rhs;
  bool satisfied;
} FmConstraint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on this thread.
 */
const char *fm_last_error(void);

/**
 * Library version, statically allocated.
 */
const char *fm_version(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void fm_string_free(char *s);

/**
 * Parses config text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum FmStatus fm_config_parse(const char *text, struct FmConfig **out);

/**
 * Loads a shipped preset by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum FmStatus fm_config_preset(const char *name, struct FmConfig **out);

/**
 * Sets one key, e.g. `("algorithm.gamma", "0.05")`. The config is left
 * unchanged on failure.
 *
 * # Safety
 * `cfg` must be a live handle; `path` and `value` NUL-terminated strings.
 */
enum FmStatus fm_config_set(struct FmConfig *cfg, const char *path, const char *value);

/**
 * Canonical config text; free with [`fm_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle; `out` must be writable.
 */
enum FmStatus fm_config_render(const struct FmConfig *cfg, char **out);

/**
 * # Safety
 * `cfg` must come from this library and not have been freed. Null is ignored.
 */
void fm_config_free(struct FmConfig *cfg);

/**
 * Runs one variant (null: the config's first) with the given seed.
 *
 * # Safety
 * `cfg` must be a live handle; `variant` null or NUL-terminated; `out` writable.
 */
enum FmStatus fm_run(const struct FmConfig *cfg,
                     const char *variant,
                     uint64_t seed,
                     struct FmTrace **out);

/**
 * Number of records, one per step `t = 1..=T`.
 *
 * # Safety
 * `trace` must be a live handle; `out` writable.
 */
enum FmStatus fm_trace_len(const struct FmTrace *trace, size_t *out);

/**
 * # Safety
 * `trace` must be a live handle; `out` writable.
 */
enum FmStatus fm_trace_record(const struct FmTrace *trace, size_t index, struct FmRecord *out);

/**
 * # Safety
 * `trace` must be a live handle; `out` writable.
 */
enum FmStatus fm_trace_counters(const struct FmTrace *trace, struct FmCounters *out);

/**
 * Copies the final averaged primal iterate into `buf`. `dim` receives the
 * iterate length; fails with `OutOfRange` when `len` is too small.
 *
 * # Safety
 * `trace` must be a live handle; `buf` must hold `len` doubles (may be
 * null when `len` is 0); `dim` writable.
 */
enum FmStatus fm_trace_final_x(const struct FmTrace *trace, double *buf, size_t len, size_t *dim);

/**
 * Writes the trace as CSV.
 *
 * # Safety
 * `trace` must be a live handle; `path` NUL-terminated.
 */
enum FmStatus fm_trace_write_csv(const struct FmTrace *trace, const char *path);

/**
 * # Safety
 * `trace` must come from this library and not have been freed. Null is ignored.
 */
void fm_trace_free(struct FmTrace *trace);

/**
 * Checks one variant's hyperparameters (null: the config's first) against
 * the convergence constraints.
 *
 * # Safety
 * `cfg` must be a live handle; `variant` null or NUL-terminated; `out` writable.
 */
enum FmStatus fm_validate(const struct FmConfig *cfg, const char *variant, struct FmReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` writable.
 */
enum FmStatus fm_report_len(const struct FmReport *report, size_t *out);

/**
 * # Safety
 * `report` must be a live handle; `out` writable.
 */
enum FmStatus fm_report_entry(const struct FmReport *report,
                              size_t index,
                              struct FmConstraint *out);

/**
 * `true` iff every constraint holds.
 *
 * # Safety
 * `report` must be a live handle; `out` writable.
 */
enum FmStatus fm_report_overall(const struct FmReport *report, bool *out);

/**
 * # Safety
 * `report` must come from this library and not have been freed. Null is ignored.
 */
void fm_report_free(struct FmReport *report);

/**
 * Rank AUC of `scores` against 0/1 `labels`.
 *
 * # Safety
 * `scores` and `labels` must hold `n` doubles; `out` writable.
 */
enum FmStatus fm_auc(const double *scores, const double *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FEDMINIMAX_H */
