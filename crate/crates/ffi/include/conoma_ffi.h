#ifndef CONOMA_FFI_H
#define CONOMA_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ConomaStatus {
  CONOMA_STATUS_OK = 0,
  CONOMA_STATUS_NULL_POINTER = 1,
  CONOMA_STATUS_INVALID_ARGUMENT = 2,
  CONOMA_STATUS_PARSE_ERROR = 3,
  CONOMA_STATUS_BUFFER_TOO_SMALL = 4,
  CONOMA_STATUS_INTERNAL = 5,
  CONOMA_STATUS_PANIC = 6,
} ConomaStatus;

typedef enum ConomaScheme {
  CONOMA_SCHEME_CONOMA_OPT = 0,
  CONOMA_SCHEME_CONOMA_FIXED = 1,
  CONOMA_SCHEME_NOMA_OPT = 2,
  CONOMA_SCHEME_NOMA_FIXED = 3,
} ConomaScheme;

/**
 * Opaque network scenario.
 */
typedef struct ConomaScenario ConomaScenario;

/**
 * Opaque optimization result.
 */
typedef struct ConomaSolution ConomaSolution;

/**
 * Power-search settings; obtain defaults from [`conoma_optimizer_options_default`].
 */
typedef struct ConomaOptimizerOptions {
  double epsilon;
  uint32_t max_rounds;
} ConomaOptimizerOptions;

/**
 * One cell at fixed AP power.
 */
typedef struct ConomaCellInput {
  double psi_s;
  double psi_w;
  double r_rf;
  double b_v;
  double p_k;
  double r_th;
} ConomaCellInput;

typedef struct ConomaCellSolution {
  double p_s;
  double p_w;
  /**
   * 1 when the weak user is relayed over RF.
   */
  uint8_t x;
  double objective;
  bool feasible;
} ConomaCellSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL. Owned by the library.
 */
const char *conoma_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *conoma_version(void);

struct ConomaOptimizerOptions conoma_optimizer_options_default(void);

/**
 * Parse a scenario from NUL-terminated JSON.
 *
 * # Safety
 * `json` must be a valid C string and `out` a valid pointer.
 */
enum ConomaStatus conoma_scenario_from_json(const char *json, struct ConomaScenario **out);

/**
 * Random user drop on a `rows x cols` AP grid with the default parameters.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ConomaStatus conoma_scenario_generate(uint32_t rows,
                                           uint32_t cols,
                                           double alpha,
                                           uint64_t seed,
                                           struct ConomaScenario **out);

/**
 * Number of cells, 0 for NULL.
 *
 * # Safety
 * `scenario` must be NULL or a live handle.
 */
size_t conoma_scenario_n_cells(const struct ConomaScenario *scenario);

/**
 * Serialise a scenario; free the string with [`conoma_string_free`].
 *
 * # Safety
 * `scenario` must be a live handle and `out` a valid pointer.
 */
enum ConomaStatus conoma_scenario_to_json(const struct ConomaScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` must be NULL or a handle not yet freed.
 */
void conoma_scenario_free(struct ConomaScenario *scenario);

/**
 * Solve a scenario under `scheme` at QoS target `r_th` (bit/s).
 * `options` may be NULL for the defaults.
 *
 * # Safety
 * `scenario` must be a live handle, `options` NULL or valid, `out` valid.
 */
enum ConomaStatus conoma_solve(const struct ConomaScenario *scenario,
                               double r_th,
                               enum ConomaScheme scheme,
                               const struct ConomaOptimizerOptions *options,
                               struct ConomaSolution **out);

/**
 * # Safety
 * `solution` must be NULL or a live handle.
 */
size_t conoma_solution_n_cells(const struct ConomaSolution *solution);

/**
 * Sum of all user rates (bit/s); NaN for NULL.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
double conoma_solution_sum_rate(const struct ConomaSolution *solution);

/**
 * Jain index over all user rates; NaN for NULL.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
double conoma_solution_jain(const struct ConomaSolution *solution);

/**
 * Number of cells meeting both QoS targets.
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
size_t conoma_solution_feasible_cells(const struct ConomaSolution *solution);

/**
 * AP iterations the power search ran (0 at fixed power).
 *
 * # Safety
 * `solution` must be NULL or a live handle.
 */
size_t conoma_solution_iterations(const struct ConomaSolution *solution);

/**
 * Copy the allocation into caller buffers of `len` entries each. Any
 * buffer may be NULL to skip it.
 *
 * # Safety
 * Each non-NULL buffer must hold `len` elements.
 */
enum ConomaStatus conoma_solution_powers(const struct ConomaSolution *solution,
                                         double *p,
                                         double *p_s,
                                         double *p_w,
                                         uint8_t *x,
                                         size_t len);

/**
 * Copy per-cell strong and weak (selected link) user rates, bit/s.
 *
 * # Safety
 * Each non-NULL buffer must hold `len` elements.
 */
enum ConomaStatus conoma_solution_rates(const struct ConomaSolution *solution,
                                        double *r_strong,
                                        double *r_weak,
                                        size_t len);

/**
 * Allocation, rates and trace as JSON; free with [`conoma_string_free`].
 *
 * # Safety
 * `solution` must be a live handle and `out` a valid pointer.
 */
enum ConomaStatus conoma_solution_to_json(const struct ConomaSolution *solution, char **out);

/**
 * # Safety
 * `solution` must be NULL or a handle not yet freed.
 */
void conoma_solution_free(struct ConomaSolution *solution);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void conoma_string_free(char *s);

/**
 * Jain fairness index of `len` rates; 1 for an empty or all-zero input, NaN for NULL.
 *
 * # Safety
 * `rates` must hold `len` elements.
 */
double conoma_jain_index(const double *rates, size_t len);

/**
 * Closed-form power split and link choice of one cell.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum ConomaStatus conoma_solve_cell(struct ConomaCellInput input, struct ConomaCellSolution *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONOMA_FFI_H */
