#ifndef GAPFLOW_H
#define GAPFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GapflowStatus {
  GAPFLOW_STATUS_OK = 0,
  GAPFLOW_STATUS_NULL_POINTER = 1,
  GAPFLOW_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Parameters outside the domain of the requested quantity.
   */
  GAPFLOW_STATUS_DOMAIN_ERROR = 3,
  /**
   * A solver failed; a curve handle may still hold partial rows.
   */
  GAPFLOW_STATUS_NUMERICAL_ERROR = 4,
  GAPFLOW_STATUS_PANIC = 5,
} GapflowStatus;

typedef enum GapflowKind {
  GAPFLOW_KIND_GAUSSIAN = 0,
  GAPFLOW_KIND_LAGUERRE = 1,
  GAPFLOW_KIND_JACOBI = 2,
} GapflowKind;

typedef enum GapflowMethod {
  GAPFLOW_METHOD_FREDHOLM = 0,
  GAPFLOW_METHOD_TW_ODE = 1,
  GAPFLOW_METHOD_PAINLEVE = 2,
  GAPFLOW_METHOD_MONTE_CARLO = 3,
} GapflowMethod;

/**
 * Opaque table of rows; the first column is always the endpoint s.
 */
typedef struct GapflowCurve GapflowCurve;

/**
 * Opaque ensemble: kind, N and the weight exponents.
 */
typedef struct GapflowEnsemble GapflowEnsemble;

/**
 * Settings for [`gapflow_gap_curve`]; start from [`gapflow_curve_options_default`].
 */
typedef struct GapflowCurveOptions {
  enum GapflowMethod method;
  double s_from;
  double s_to;
  size_t points;
  size_t order;
  double tol;
  uint64_t seed;
  size_t samples;
  /**
   * Offset from the anchored endpoint for the ODE routes.
   */
  double delta;
} GapflowCurveOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an ensemble handle. `a` is ignored for Gaussian, `b` for
 * Gaussian and Laguerre.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum GapflowStatus gapflow_ensemble_new(enum GapflowKind kind,
                                        size_t n,
                                        double a,
                                        double b,
                                        struct GapflowEnsemble **out);

/**
 * Releases an ensemble handle. Null is accepted.
 *
 * # Safety
 * `ens` must be null or a handle from [`gapflow_ensemble_new`] not yet freed.
 */
void gapflow_ensemble_free(struct GapflowEnsemble *ens);

/**
 * E₂(0; (lo, hi)) by Nyström discretization with `order` nodes. Infinite
 * bounds are allowed where the support is unbounded.
 *
 * # Safety
 * `ens` must be a live handle and `out` valid for one write.
 */
enum GapflowStatus gapflow_gap_probability(const struct GapflowEnsemble *ens,
                                           double lo,
                                           double hi,
                                           size_t order,
                                           double *out);

/**
 * Density at a2 of the nearest eigenvalue to the right of one at a1,
 * by mixed differences of step `h`.
 *
 * # Safety
 * `ens` must be a live handle and `out` valid for one write.
 */
enum GapflowStatus gapflow_spacing_pdf(const struct GapflowEnsemble *ens,
                                       double a1,
                                       double a2,
                                       double h,
                                       size_t order,
                                       double *out);

struct GapflowCurveOptions gapflow_curve_options_default(void);

/**
 * E₂ over an s-grid. A NaN `s_from` or `s_to` selects the default range.
 * On `NumericalError` the curve handle is still written and holds the rows
 * computed before the failure.
 *
 * # Safety
 * `ens` must be a live handle, `opts` a valid pointer, and `out` valid for
 * one write.
 */
enum GapflowStatus gapflow_gap_curve(const struct GapflowEnsemble *ens,
                                     const struct GapflowCurveOptions *opts,
                                     struct GapflowCurve **out);

/**
 * Number of rows; 0 for null.
 *
 * # Safety
 * `curve` must be null or a live handle.
 */
size_t gapflow_curve_rows(const struct GapflowCurve *curve);

/**
 * Number of columns; 0 for null.
 *
 * # Safety
 * `curve` must be null or a live handle.
 */
size_t gapflow_curve_columns(const struct GapflowCurve *curve);

/**
 * Column name, owned by the handle and valid until it is freed; null when
 * out of range.
 *
 * # Safety
 * `curve` must be null or a live handle.
 */
const char *gapflow_curve_column_name(const struct GapflowCurve *curve, size_t col);

/**
 * Value at (row, col).
 *
 * # Safety
 * `curve` must be a live handle and `out` valid for one write.
 */
enum GapflowStatus gapflow_curve_value(const struct GapflowCurve *curve,
                                       size_t row,
                                       size_t col,
                                       double *out);

/**
 * Releases a curve handle. Null is accepted.
 *
 * # Safety
 * `curve` must be null or a handle from [`gapflow_gap_curve`] not yet freed.
 */
void gapflow_curve_free(struct GapflowCurve *curve);

/**
 * Message for the last failed call on this thread (empty after a success).
 * Valid until the next call on the same thread.
 */
const char *gapflow_last_error(void);

/**
 * Static description of a status code.
 */
const char *gapflow_status_str(enum GapflowStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAPFLOW_H */
