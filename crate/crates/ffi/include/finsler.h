#ifndef FINSLER_H
#define FINSLER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Incremented on any incompatible change of the functions below.
 */
#define FINSLER_ABI_VERSION 1

typedef enum FinslerStatus {
  FINSLER_STATUS_OK = 0,
  /**
   * A required pointer was null or a size did not match.
   */
  FINSLER_STATUS_NULL_OR_SIZE = 1,
  /**
   * The inputs were rejected (malformed JSON, invalid spec, out of domain).
   */
  FINSLER_STATUS_INVALID_INPUT = 2,
  /**
   * The numerics failed (drift, unstable quadrature, degenerate tensor).
   */
  FINSLER_STATUS_NUMERICAL = 3,
  FINSLER_STATUS_PANIC = 4,
} FinslerStatus;

typedef struct FinslerCurve FinslerCurve;

typedef struct FinslerMetric FinslerMetric;

typedef struct FinslerFdConfig {
  double h0;
  uint32_t richardson_levels;
} FinslerFdConfig;

uint32_t finsler_abi_version(void);

/**
 * Default finite-difference settings.
 */
struct FinslerFdConfig finsler_fd_config_default(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *finsler_last_error_message(void);

/**
 * Parses a metric spec. On success `*out` owns a handle to release with
 * [`finsler_metric_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FinslerStatus finsler_metric_from_json(const char *json, struct FinslerMetric **out);

/**
 * # Safety
 * `metric` must come from [`finsler_metric_from_json`] and not be used
 * afterwards. Null is ignored.
 */
void finsler_metric_free(struct FinslerMetric *metric);

/**
 * Chart dimension of a metric, or 0 for a null handle.
 *
 * # Safety
 * `metric` must be null or a live handle.
 */
size_t finsler_metric_dimension(const struct FinslerMetric *metric);

/**
 * Parses a curve. On success `*out` owns a handle to release with
 * [`finsler_curve_free`].
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum FinslerStatus finsler_curve_from_json(const char *json, struct FinslerCurve **out);

/**
 * # Safety
 * `curve` must come from [`finsler_curve_from_json`] and not be used
 * afterwards. Null is ignored.
 */
void finsler_curve_free(struct FinslerCurve *curve);

/**
 * `F(x, y)`.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles and `out` to one.
 */
enum FinslerStatus finsler_evaluate_f(const struct FinslerMetric *metric,
                                      const double *x,
                                      const double *y,
                                      size_t n,
                                      double *out);

/**
 * Fundamental tensor `g(x, y)`, row-major into `out_g`.
 *
 * # Safety
 * `x` and `y` must point to `n` doubles and `out_g` to `n * n`.
 */
enum FinslerStatus finsler_fundamental_tensor(const struct FinslerMetric *metric,
                                              const double *x,
                                              const double *y,
                                              size_t n,
                                              struct FinslerFdConfig fd,
                                              double *out_g);

/**
 * Averaged Riemannian metric at `x`, row-major into `out_g`, and the
 * volume of the unit ball into `out_measure` (which may be null).
 *
 * # Safety
 * `x` must point to `n` doubles and `out_g` to `n * n`.
 */
enum FinslerStatus finsler_averaged_metric(const struct FinslerMetric *metric,
                                           const double *x,
                                           size_t n,
                                           uint32_t angular_order,
                                           struct FinslerFdConfig fd,
                                           double *out_g,
                                           double *out_measure);

/**
 * Parallel transport of `y` along `curve`: endpoint into `out_endpoint`
 * (`n` doubles), differential row-major into `out_differential` (`n * n`,
 * may be null) and the F drift into `out_drift` (may be null).
 *
 * # Safety
 * Pointer arguments must satisfy the sizes above.
 */
enum FinslerStatus finsler_parallel_transport(const struct FinslerMetric *metric,
                                              const struct FinslerCurve *curve,
                                              const double *y,
                                              size_t n,
                                              uint32_t steps,
                                              struct FinslerFdConfig fd,
                                              double *out_endpoint,
                                              double *out_differential,
                                              double *out_drift);

/**
 * Full transport-identity report as JSON, with default settings apart from
 * `seed`. Release the string with [`finsler_string_free`].
 *
 * # Safety
 * `nu` must point to `n` doubles and `out_json` be a valid pointer.
 */
enum FinslerStatus finsler_gap_report_json(const struct FinslerMetric *metric,
                                           const struct FinslerCurve *curve,
                                           const double *nu,
                                           size_t n,
                                           uint64_t seed,
                                           char **out_json);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards. Null is
 * ignored.
 */
void finsler_string_free(char *s);

#endif  /* FINSLER_H */
