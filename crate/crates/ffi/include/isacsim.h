#ifndef ISACSIM_H
#define ISACSIM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of an FFI call.
 */
typedef enum IsacStatus {
  /**
   * The call succeeded.
   */
  IsacStatusOk = 0,
  /**
   * A required pointer argument was null.
   */
  IsacStatusNullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  IsacStatusInvalidUtf8 = 2,
  /**
   * The scenario file could not be read or failed validation.
   */
  IsacStatusConfig = 3,
  /**
   * The simulation or analysis failed at runtime.
   */
  IsacStatusRuntime = 4,
  /**
   * An internal invariant was violated; see `isac_last_error`.
   */
  IsacStatusInternal = 5,
} IsacStatus;

/**
 * Opaque scenario handle; create with `isac_scenario_load`, destroy with
 * `isac_scenario_free`.
 */
typedef struct IsacScenario IsacScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; never freed.
 */
const char *isac_version(void);

/**
 * Message describing the most recent failure on this thread, as a
 * NUL-terminated string. The pointer stays valid until the next failing
 * call on the same thread; do not free it.
 */
const char *isac_last_error(void);

/**
 * Load a scenario from a TOML file at `path` into a new handle written to
 * `out_scenario`.
 *
 * # Safety
 * `path` must point to a NUL-terminated string and `out_scenario` to a
 * writable pointer slot; both stay borrowed only for the call.
 */
enum IsacStatus isac_scenario_load(const char *path, struct IsacScenario **out_scenario);

/**
 * Release a handle from `isac_scenario_load`; a null pointer is ignored.
 *
 * # Safety
 * `scenario` must be null or a pointer previously returned by
 * `isac_scenario_load` that has not been freed already.
 */
void isac_scenario_free(struct IsacScenario *scenario);

/**
 * Override the Monte-Carlo base seed of a loaded scenario.
 *
 * # Safety
 * `scenario` must be a live handle from `isac_scenario_load`.
 */
enum IsacStatus isac_scenario_set_seed(struct IsacScenario *scenario, uint64_t seed);

/**
 * Compute the waveform KPI report and return it as JSON in `out_json`.
 *
 * # Safety
 * `scenario` must be a live handle and `out_json` a writable pointer slot.
 */
enum IsacStatus isac_kpi_json(const struct IsacScenario *scenario, char **out_json);

/**
 * Solve the detection-range budget and return the report as JSON in
 * `out_json`. Curve files are not written; use the CLI for file output.
 *
 * # Safety
 * `scenario` must be a live handle and `out_json` a writable pointer slot.
 */
enum IsacStatus isac_budget_json(const struct IsacScenario *scenario, char **out_json);

/**
 * Run the Monte-Carlo simulation and return the report as JSON in
 * `out_json`. Periodogram exports are skipped; use the CLI for file output.
 *
 * # Safety
 * `scenario` must be a live handle and `out_json` a writable pointer slot.
 */
enum IsacStatus isac_simulate_json(const struct IsacScenario *scenario, char **out_json);

/**
 * Run the synchronization estimator sweep and return the report as JSON in
 * `out_json`.
 *
 * # Safety
 * `scenario` must be a live handle and `out_json` a writable pointer slot.
 */
enum IsacStatus isac_sync_eval_json(const struct IsacScenario *scenario, char **out_json);

/**
 * Release a string returned through an `out_json` slot; a null pointer is
 * ignored.
 *
 * # Safety
 * `text` must be null or a pointer previously returned by this library
 * that has not been freed already.
 */
void isac_string_free(char *text);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISACSIM_H */
