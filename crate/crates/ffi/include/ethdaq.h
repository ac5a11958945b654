#ifndef ETHDAQ_H
#define ETHDAQ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum EthdaqStatus {
  ETHDAQ_STATUS_OK = 0,
  /**
   * The scenario failed to parse or validate.
   */
  ETHDAQ_STATUS_INVALID = 1,
  ETHDAQ_STATUS_UNKNOWN_SCENARIO = 2,
  /**
   * Bad `KEY=VALUE` override.
   */
  ETHDAQ_STATUS_PARAM = 3,
  /**
   * Reading input or writing reports failed.
   */
  ETHDAQ_STATUS_IO = 4,
  /**
   * The simulation aborted.
   */
  ETHDAQ_STATUS_SIM = 5,
  ETHDAQ_STATUS_NULL_ARGUMENT = 6,
  /**
   * A string argument was not UTF-8.
   */
  ETHDAQ_STATUS_UTF8 = 7,
  /**
   * Index or key out of range.
   */
  ETHDAQ_STATUS_NOT_FOUND = 8,
  /**
   * The output buffer was too small; the required size was reported.
   */
  ETHDAQ_STATUS_BUFFER_TOO_SMALL = 9,
  ETHDAQ_STATUS_PANIC = 10,
} EthdaqStatus;

/**
 * Result of running one scenario document.
 */
typedef struct EthdaqRun EthdaqRun;

/**
 * One or more parsed scenario documents.
 */
typedef struct EthdaqScenario EthdaqScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *ethdaq_last_error(void);

/**
 * Loads a canned scenario by name, or a scenario file by path.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum EthdaqStatus ethdaq_scenario_load(const char *name, struct EthdaqScenario **out);

/**
 * Parses a single scenario document from TOML text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a writable pointer.
 */
enum EthdaqStatus ethdaq_scenario_parse(const char *text, struct EthdaqScenario **out);

/**
 * Number of documents in the scenario; 0 for NULL.
 *
 * # Safety
 * `sc` must be NULL or a live scenario handle.
 */
size_t ethdaq_scenario_count(const struct EthdaqScenario *sc);

/**
 * Copies the name of document `index` into `buf`.
 *
 * # Safety
 * `sc` must be a live handle; `buf` must hold `cap` bytes or be NULL;
 * `len` may be NULL.
 */
enum EthdaqStatus ethdaq_scenario_name(const struct EthdaqScenario *sc,
                                       size_t index,
                                       char *buf,
                                       size_t cap,
                                       size_t *len);

/**
 * Renders document `index` back to TOML into `buf`.
 *
 * # Safety
 * As for [`ethdaq_scenario_name`].
 */
enum EthdaqStatus ethdaq_scenario_render(const struct EthdaqScenario *sc,
                                         size_t index,
                                         char *buf,
                                         size_t cap,
                                         size_t *len);

/**
 * Applies a `KEY=VALUE` override, e.g. `alpha` = `0.5`, to every document.
 * On failure the scenario is left unchanged.
 *
 * # Safety
 * `sc` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum EthdaqStatus ethdaq_scenario_set_param(struct EthdaqScenario *sc,
                                            const char *key,
                                            const char *value);

/**
 * Runs document `index`. Reports are written to `out_dir` unless it is NULL.
 *
 * # Safety
 * `sc` must be a live handle, `out_dir` NULL or a NUL-terminated string,
 * `out` a writable pointer.
 */
enum EthdaqStatus ethdaq_scenario_run(const struct EthdaqScenario *sc,
                                      size_t index,
                                      const char *out_dir,
                                      struct EthdaqRun **out);

/**
 * Releases a scenario. NULL is ignored.
 *
 * # Safety
 * `sc` must be NULL or a handle not yet freed.
 */
void ethdaq_scenario_free(struct EthdaqScenario *sc);

/**
 * Number of simulations the run performed (sweep points, bisection probes).
 *
 * # Safety
 * `run` must be NULL or a live run handle.
 */
size_t ethdaq_run_points(const struct EthdaqRun *run);

/**
 * Looks up a numeric value. Experiment results such as `bisect.threshold`
 * are searched first, then the summary of simulation `point`.
 *
 * # Safety
 * `run` must be a live handle, `key` a NUL-terminated string, `value` writable.
 */
enum EthdaqStatus ethdaq_run_value(const struct EthdaqRun *run,
                                   size_t point,
                                   const char *key,
                                   double *value);

/**
 * Like [`ethdaq_run_value`] but copies the value as text.
 *
 * # Safety
 * `run` must be a live handle, `key` a NUL-terminated string; `buf` must hold
 * `cap` bytes or be NULL; `len` may be NULL.
 */
enum EthdaqStatus ethdaq_run_text(const struct EthdaqRun *run,
                                  size_t point,
                                  const char *key,
                                  char *buf,
                                  size_t cap,
                                  size_t *len);

/**
 * Releases a run. NULL is ignored.
 *
 * # Safety
 * `run` must be NULL or a handle not yet freed.
 */
void ethdaq_run_free(struct EthdaqRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ETHDAQ_H */
