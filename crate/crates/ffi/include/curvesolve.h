#ifndef CURVESOLVE_H
#define CURVESOLVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum CsStatus {
  CS_STATUS_OK = 0,
  /**
   * A required pointer was null, a string was not UTF-8 or a buffer was too small.
   */
  CS_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Scenario parse or configuration error.
   */
  CS_STATUS_PARSE = 2,
  /**
   * Barrier ordering, barrier inequality or right-hand side bound violation.
   */
  CS_STATUS_BARRIER = 3,
  /**
   * Path, monitor or convergence failure.
   */
  CS_STATUS_PATH = 4,
  /**
   * Any other solver error.
   */
  CS_STATUS_INTERNAL = 5,
  /**
   * A panic was caught at the boundary.
   */
  CS_STATUS_PANIC = 6,
} CsStatus;

/**
 * Curvature functions selectable through [`cs_curvature_evaluate`].
 */
typedef enum CsCurvature {
  CS_CURVATURE_MEAN = 0,
  CS_CURVATURE_GAUSS_ROOT = 1,
  CS_CURVATURE_SIGMA_K_ROOT = 2,
} CsCurvature;

/**
 * Opaque completed run.
 */
typedef struct CsRun CsRun;

/**
 * Opaque parsed scenario.
 */
typedef struct CsScenario CsScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cs_version(void);

/**
 * Message of the last failure on this thread, or null if none.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *cs_last_error_message(void);

/**
 * Parses scenario text into a new handle.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CsStatus cs_scenario_parse(const char *text, struct CsScenario **out);

/**
 * Releases a scenario handle. Null is ignored.
 *
 * # Safety
 * `sc` must come from [`cs_scenario_parse`] and not be freed twice.
 */
void cs_scenario_free(struct CsScenario *sc);

/**
 * Runs the full pipeline on a scenario.
 *
 * # Safety
 * `sc` must be a live scenario handle and `out` a valid pointer.
 */
enum CsStatus cs_run(const struct CsScenario *sc, struct CsRun **out);

/**
 * Releases a run handle. Null is ignored.
 *
 * # Safety
 * `run` must come from [`cs_run`] and not be freed twice.
 */
void cs_run_free(struct CsRun *run);

/**
 * Number of grid nodes of a run, 0 for null.
 *
 * # Safety
 * `run` must be null or a live run handle.
 */
size_t cs_run_n_nodes(const struct CsRun *run);

/**
 * Number of accepted continuation steps, 0 for null.
 *
 * # Safety
 * `run` must be null or a live run handle.
 */
size_t cs_run_n_steps(const struct CsRun *run);

/**
 * Final homotopy parameter, NaN for null.
 *
 * # Safety
 * `run` must be null or a live run handle.
 */
double cs_run_final_t(const struct CsRun *run);

/**
 * Copies the final nodal values into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `run` must be a live run handle and `buf` valid for `len` writes.
 */
enum CsStatus cs_run_final_u(const struct CsRun *run, double *buf, size_t len);

/**
 * Evaluates a curvature function at `n` principal curvatures.
 *
 * `k` is only read for [`CsCurvature::SigmaKRoot`].
 *
 * # Safety
 * `kappa` must be valid for `n` reads and `out` a valid pointer.
 */
enum CsStatus cs_curvature_evaluate(enum CsCurvature kind,
                                    size_t k,
                                    const double *kappa,
                                    size_t n,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CURVESOLVE_H */
