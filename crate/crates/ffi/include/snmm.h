#ifndef SNMM_H
#define SNMM_H

/* Generated from the Rust source; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome; nonzero values match the command-line tool's exit codes,
 * plus a code for misuse of the interface itself.
 */
typedef enum SnmmStatus {
  SNMM_STATUS_OK = 0,
  SNMM_STATUS_CONFIG_ERROR = 2,
  SNMM_STATUS_DATA_ERROR = 3,
  SNMM_STATUS_ESTIMATION_ERROR = 4,
  SNMM_STATUS_ARGUMENT_ERROR = 5,
} SnmmStatus;

/**
 * Fitted model handle. Opaque; create with `snmm_fit_new`, release with
 * `snmm_fit_free`.
 */
typedef struct SnmmFit SnmmFit;

/**
 * One parameter on its reporting scale. `has_se` is 0 when the observed
 * information was singular and only the point estimate is available.
 */
typedef struct SnmmParam {
  double estimate;
  double se;
  double ci_lo;
  double ci_hi;
  /**
   * 1 when the reporting scale is exp of the estimation scale.
   */
  int32_t log_scale;
  int32_t has_se;
} SnmmParam;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message from the most recent failing call on this thread. Empty string
 * when nothing failed yet; the pointer stays valid until the next failure.
 */
const char *snmm_last_error(void);

/**
 * Library version as a static string.
 */
const char *snmm_version(void);

/**
 * Parses a config (the same text format the command-line tool reads, with
 * `command = fit`), loads the data it references, and fits the model.
 * Returns NULL on failure; `status` (optional) and `snmm_last_error`
 * explain why. A fit that ran but missed the convergence test still
 * produces a handle; check `snmm_fit_converged`.
 */
struct SnmmFit *snmm_fit_new(const char *config_text, enum SnmmStatus *status);

void snmm_fit_free(struct SnmmFit *handle);

/**
 * 1 when the outer optimizer met its gradient test, 0 otherwise; -1 on a
 * NULL handle.
 */
int32_t snmm_fit_converged(const struct SnmmFit *handle);

/**
 * Negative marginal log likelihood at the estimate.
 */
double snmm_fit_nll(const struct SnmmFit *handle);

double snmm_fit_aic(const struct SnmmFit *handle);

/**
 * Number of reported parameters (fixed effects, variance components, and
 * spline null-space coefficients).
 */
size_t snmm_fit_param_count(const struct SnmmFit *handle);

size_t snmm_fit_subject_count(const struct SnmmFit *handle);

/**
 * Name of parameter `index`, or NULL when out of range. The pointer lives
 * as long as the handle.
 */
const char *snmm_fit_param_name(const struct SnmmFit *handle, size_t index);

/**
 * Subject identifier at position `index` in the data's subject order.
 */
const char *snmm_fit_subject_id(const struct SnmmFit *handle, size_t index);

/**
 * Fills `out` with parameter `index` on its reporting scale. When the
 * observed information was singular only the estimate is meaningful and
 * `has_se` is 0 (see `snmm_last_error` for the reason).
 */
enum SnmmStatus snmm_fit_param(const struct SnmmFit *handle, size_t index, struct SnmmParam *out);

/**
 * Simultaneous and pointwise confidence bands for the fitted curve,
 * written into six caller arrays of length `grid_len`.
 *
 * `subject` selects the curve: negative for the population curve, else a
 * subject index. `grid` holds values of the swept covariate (`along`, or
 * NULL for the covariate inside the spline argument). `at` gives the other
 * covariates' values in model order (NULL for all zeros; for subject
 * curves the subject's own first-row covariates). `crit_out` (optional)
 * receives the simultaneous critical value.
 */
enum SnmmStatus snmm_fit_band(const struct SnmmFit *handle,
                              int64_t subject,
                              const double *grid,
                              size_t grid_len,
                              const double *at,
                              size_t at_len,
                              const char *along,
                              double alpha,
                              size_t n_sim,
                              uint64_t seed,
                              double *estimate_out,
                              double *se_out,
                              double *pw_lo_out,
                              double *pw_hi_out,
                              double *sim_lo_out,
                              double *sim_hi_out,
                              double *crit_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNMM_H */
