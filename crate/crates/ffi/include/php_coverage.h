#ifndef PHP_COVERAGE_H
#define PHP_COVERAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PhpMethod {
  PHP_METHOD_MACRO_LOWER = 0,
  PHP_METHOD_MACRO_UPPER = 1,
  PHP_METHOD_SMALL_CLOSEST_HOLE = 2,
  PHP_METHOD_SMALL_ALL_HOLES = 3,
} PhpMethod;

/**
 * Status codes returned by every fallible call.
 */
typedef enum PhpStatus {
  PHP_STATUS_OK = 0,
  PHP_STATUS_NULL_POINTER = 1,
  PHP_STATUS_INVALID_PARAMS = 2,
  PHP_STATUS_INVALID_ARGUMENT = 3,
  PHP_STATUS_NUMERICAL = 4,
  PHP_STATUS_PANIC = 5,
} PhpStatus;

typedef enum PhpTier {
  PHP_TIER_MACRO = 0,
  PHP_TIER_SMALL = 1,
} PhpTier;

/**
 * Opaque analytic evaluator bound to one parameter set.
 */
typedef struct PhpEvaluator PhpEvaluator;

/**
 * Network parameters in SI units (densities per m², lengths in m).
 */
typedef struct PhpNetworkParams {
  double lambda1;
  double lambda2;
  double hole_radius;
  double alpha;
  double p1;
  double p2;
} PhpNetworkParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *php_last_error_message(void);

/**
 * Fills `out` with a named parameter set (`"setup1"` or `"setup2"`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` writable, or NULL.
 */
enum PhpStatus php_params_preset(const char *name, struct PhpNetworkParams *out);

/**
 * Area of the intersection of a disc of radius `r` at the origin with a disc
 * of radius `r_hole` whose center is at distance `d`.
 *
 * # Safety
 * `out` must be writable or NULL.
 */
enum PhpStatus php_lens_area(double r, double r_hole, double d, double *out);

/**
 * Marginal density and CDF of the distance to the nearest small cell.
 * Either output pointer may be NULL if that value is not needed.
 *
 * # Safety
 * `params` must point to a valid struct; outputs must be writable or NULL.
 */
enum PhpStatus php_small_distance(const struct PhpNetworkParams *params,
                                  double z,
                                  double *pdf_out,
                                  double *cdf_out);

/**
 * Creates an evaluator with default accuracy settings. Release it with
 * [`php_evaluator_free`].
 *
 * # Safety
 * `params` must point to a valid struct and `out` must be writable.
 */
enum PhpStatus php_evaluator_new(const struct PhpNetworkParams *params, struct PhpEvaluator **out);

/**
 * # Safety
 * `ev` must come from [`php_evaluator_new`] and not be used afterwards.
 * NULL is ignored.
 */
void php_evaluator_free(struct PhpEvaluator *ev);

/**
 * Analytic coverage probability at an SIR threshold given in dB.
 *
 * # Safety
 * `ev` must be a live evaluator and `out` writable.
 */
enum PhpStatus php_evaluator_coverage(const struct PhpEvaluator *ev,
                                      enum PhpMethod method,
                                      double gamma_db,
                                      double *out);

/**
 * Monte Carlo coverage of one tier at a single threshold, with the 95%
 * confidence half-width. Results depend only on the seed.
 *
 * # Safety
 * `params` must point to a valid struct; `mean_out` must be writable;
 * `ci_out` may be NULL.
 */
enum PhpStatus php_simulate_coverage(const struct PhpNetworkParams *params,
                                     enum PhpTier tier,
                                     double gamma_db,
                                     uint64_t n_trials,
                                     uint64_t seed,
                                     double *mean_out,
                                     double *ci_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHP_COVERAGE_H */
