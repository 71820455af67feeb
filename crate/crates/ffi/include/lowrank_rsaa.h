#ifndef LOWRANK_RSAA_H
#define LOWRANK_RSAA_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum LrStatus {
  LR_STATUS_OK = 0,
  LR_STATUS_INVALID_INPUT = 1,
  LR_STATUS_NUMERICAL_FAILURE = 2,
  LR_STATUS_NULL_POINTER = 3,
  LR_STATUS_PANIC = 4,
} LrStatus;

/**
 * Problem families for [`lr_problem_new`].
 */
typedef enum LrFamily {
  LR_FAMILY_DENOISING = 0,
  LR_FAMILY_SENSING = 1,
} LrFamily;

/**
 * Methods for [`lr_solve`]. `Rsaa` runs the nuclear initializer first.
 */
typedef enum LrMethod {
  LR_METHOD_SAA = 0,
  LR_METHOD_NUCLEAR = 1,
  LR_METHOD_RSAA = 2,
} LrMethod;

/**
 * Opaque sample batch.
 */
typedef struct LrBatch LrBatch;

/**
 * Opaque problem instance.
 */
typedef struct LrProblem LrProblem;

/**
 * Opaque solver report.
 */
typedef struct LrReport LrReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *lr_last_error_message(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer obtained from this library, not yet freed.
 */
void lr_string_free(char *s);

/**
 * Draw a problem instance. `pilot_samples == 0` uses the library default.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum LrStatus lr_problem_new(enum LrFamily family,
                             size_t p,
                             size_t s,
                             double radius,
                             double noise_scale,
                             uint64_t seed,
                             size_t pilot_samples,
                             struct LrProblem **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum LrStatus lr_problem_from_json(const char *json, struct LrProblem **out);

/**
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum LrStatus lr_problem_to_json(const struct LrProblem *problem, char **out);

/**
 * Matrix dimension `p`, or 0 for NULL.
 *
 * # Safety
 * `problem` must be NULL or a live handle.
 */
size_t lr_problem_dim(const struct LrProblem *problem);

/**
 * Copy the true solution (row-major, `p·p` entries) into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum LrStatus lr_problem_true_solution(const struct LrProblem *problem, double *buf, size_t len);

/**
 * # Safety
 * `problem` must be NULL or a handle from this library, not yet freed.
 */
void lr_problem_free(struct LrProblem *problem);

/**
 * Draw `n` i.i.d. scenarios.
 *
 * # Safety
 * `problem` must be a live handle; `out` must be writable.
 */
enum LrStatus lr_sample(const struct LrProblem *problem,
                        size_t n,
                        uint64_t seed,
                        struct LrBatch **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum LrStatus lr_batch_from_json(const char *json, struct LrBatch **out);

/**
 * Number of scenarios, or 0 for NULL.
 *
 * # Safety
 * `batch` must be NULL or a live handle.
 */
size_t lr_batch_len(const struct LrBatch *batch);

/**
 * # Safety
 * `batch` must be NULL or a handle from this library, not yet freed.
 */
void lr_batch_free(struct LrBatch *batch);

/**
 * Solve with default solver settings. A NaN `lambda` selects the
 * theory-tuned value; `lambda` is ignored by `LR_METHOD_SAA`.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum LrStatus lr_solve(const struct LrProblem *problem,
                       const struct LrBatch *batch,
                       enum LrMethod method,
                       double lambda,
                       struct LrReport **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum LrStatus lr_report_from_json(const char *json, struct LrReport **out);

/**
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum LrStatus lr_report_to_json(const struct LrReport *report, char **out);

/**
 * Copy the solution (row-major, `p·p` entries) into `buf`.
 *
 * # Safety
 * `buf` must hold `len` doubles.
 */
enum LrStatus lr_report_solution(const struct LrReport *report, double *buf, size_t len);

/**
 * Numerical rank of the solution.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum LrStatus lr_report_rank(const struct LrReport *report, size_t *out);

/**
 * `1` if the report carries a passing certificate, `0` if it fails, `-1` if it has none.
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum LrStatus lr_report_certificate(const struct LrReport *report, int32_t *out);

/**
 * # Safety
 * `report` must be NULL or a handle from this library, not yet freed.
 */
void lr_report_free(struct LrReport *report);

/**
 * Excess risk of the report's solution. `n_eval` is the Monte Carlo size for
 * Sensing (0 uses the default); Denoising is exact and writes a zero stderr.
 *
 * # Safety
 * Handles must be live; `value` must be writable; `stderr` may be NULL.
 */
enum LrStatus lr_excess_risk(const struct LrProblem *problem,
                             const struct LrReport *report,
                             size_t n_eval,
                             double *value,
                             double *stderr);

/**
 * `P_λ(t)` for MCP parameters `(a, λ)` with curvature bound `u_l`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LrStatus lr_mcp_value(double t, double a, double lambda, double u_l, double *out);

/**
 * `P'_λ(t)` for `t > 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LrStatus lr_mcp_derivative(double t, double a, double lambda, double u_l, double *out);

/**
 * Scalar prox of `step·P_λ` on `t ≥ 0`; requires `step < a`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LrStatus lr_mcp_prox(double v, double step, double a, double lambda, double u_l, double *out);

/**
 * Evaluate every theory formula for the JSON inputs; writes a JSON report.
 *
 * # Safety
 * `inputs_json` must be a NUL-terminated string; `out` must be writable.
 */
enum LrStatus lr_theory_json(const char *inputs_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOWRANK_RSAA_H */
