/* C interface of the acband configuration engine. */

#ifndef ACBAND_H
#define ACBAND_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call, aligned with the command-line exit codes.
 */
typedef enum AcbandStatus {
  /**
   * The call succeeded.
   */
  ACBAND_STATUS_OK = 0,
  /**
   * A parameter is out of range or inconsistent.
   */
  ACBAND_STATUS_INVALID_PARAMETER = 2,
  /**
   * Data could not be read, written, or evaluated.
   */
  ACBAND_STATUS_DATA_ERROR = 3,
  /**
   * The budget cannot fund the elimination schedule.
   */
  ACBAND_STATUS_INSUFFICIENT_BUDGET = 4,
  /**
   * A required pointer was null.
   */
  ACBAND_STATUS_NULL_POINTER = 5,
} AcbandStatus;

/**
 * Owned runtime matrix behind an opaque handle.
 */
typedef struct AcbandMatrix AcbandMatrix;

/**
 * Owned run result behind an opaque handle.
 */
typedef struct AcbandResult AcbandResult;

/**
 * Everything one run needs; `acband_run_config_default` fills the same
 * defaults the command line uses.
 */
typedef struct AcbandRunConfig {
  /**
   * 0 runs the capped elimination engine, 1 the baseline ladder.
   */
  uint32_t method;
  /**
   * 0 scores by win frequency, 1 by negated mean runtime.
   */
  uint32_t statistic;
  /**
   * Group size for capped parallel evaluation.
   */
  size_t k;
  /**
   * Assumed fraction of epsilon-best configurations.
   */
  double alpha;
  /**
   * Failure probability of the sampling guarantee.
   */
  double delta;
  /**
   * Optimality tolerance of the guarantee.
   */
  double epsilon;
  /**
   * Pool size; 0 picks the largest admissible value.
   */
  uint64_t n0;
  /**
   * Total instance budget.
   */
  size_t budget;
  /**
   * Run seed.
   */
  uint64_t seed;
  /**
   * Thinning factor of the baseline ladder.
   */
  double eta;
  /**
   * Most exploratory bracket size of the baseline ladder.
   */
  size_t n_max;
} AcbandRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread; empty before the first
 * failure. The pointer stays valid until the next failing call on the
 * same thread.
 */
const char *acband_last_error(void);

/**
 * Load a runtime matrix from a CSV or binary file, detecting the
 * format from the content. The handle must be released with
 * `acband_matrix_free`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum AcbandStatus acband_matrix_load(const char *path, struct AcbandMatrix **out);

/**
 * Generate a synthetic exponential matrix with `ceil(alpha * n_configs)`
 * epsilon-best configurations. The handle must be released with
 * `acband_matrix_free`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum AcbandStatus acband_matrix_generate(size_t n_configs,
                                         size_t n_instances,
                                         double alpha,
                                         double epsilon,
                                         double timeout,
                                         uint64_t seed,
                                         struct AcbandMatrix **out);

/**
 * Report a matrix's dimensions.
 *
 * # Safety
 * All pointers must be valid; `matrix` must come from this library.
 */
enum AcbandStatus acband_matrix_dims(const struct AcbandMatrix *matrix,
                                     size_t *n_configs,
                                     size_t *n_instances);

/**
 * Release a matrix handle; a null handle is ignored.
 *
 * # Safety
 * `matrix` must come from this library and not be used afterwards.
 */
void acband_matrix_free(struct AcbandMatrix *matrix);

/**
 * The defaults the command line uses: the capped engine at k = 2,
 * alpha = delta = 0.05, epsilon = 0.1, automatic pool size, seed 0,
 * and a ladder at eta = 3.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum AcbandStatus acband_run_config_default(struct AcbandRunConfig *out);

/**
 * Configure on a matrix and hand back an owned result. The handle must
 * be released with `acband_result_free`.
 *
 * # Safety
 * All pointers must be valid; `matrix` must come from this library.
 */
enum AcbandStatus acband_run(const struct AcbandMatrix *matrix,
                             const struct AcbandRunConfig *config,
                             struct AcbandResult **out);

/**
 * Identifier of the winning configuration.
 *
 * # Safety
 * All pointers must be valid; `result` must come from this library.
 */
enum AcbandStatus acband_result_winner(const struct AcbandResult *result, size_t *out);

/**
 * Total CPU seconds the run charged.
 *
 * # Safety
 * All pointers must be valid; `result` must come from this library.
 */
enum AcbandStatus acband_result_cpu_seconds(const struct AcbandResult *result, double *out);

/**
 * Budget units the run consumed: instance evaluations.
 *
 * # Safety
 * All pointers must be valid; `result` must come from this library.
 */
enum AcbandStatus acband_result_evaluations(const struct AcbandResult *result, size_t *out);

/**
 * Serialize the full result document as JSON. The string must be
 * released with `acband_string_free`.
 *
 * # Safety
 * All pointers must be valid; `result` must come from this library.
 */
enum AcbandStatus acband_result_to_json(const struct AcbandResult *result, char **out);

/**
 * Release a result handle; a null handle is ignored.
 *
 * # Safety
 * `result` must come from this library and not be used afterwards.
 */
void acband_result_free(struct AcbandResult *result);

/**
 * Release a string obtained from this library; null is ignored.
 *
 * # Safety
 * `text` must come from this library and not be used afterwards.
 */
void acband_string_free(char *text);

/**
 * Sample count that guarantees an epsilon-best configuration is drawn
 * with probability at least `1 - delta` when their fraction is `alpha`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum AcbandStatus acband_n_alpha_delta(double alpha, double delta, uint64_t *out);

/**
 * Budget that provably funds the whole epoch loop at a mean
 * per-instance evaluation cost of `gamma_bar`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum AcbandStatus acband_sufficient_budget(double gamma_bar,
                                           size_t k,
                                           double alpha,
                                           double delta,
                                           uint64_t n0,
                                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ACBAND_H */
