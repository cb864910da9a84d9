#ifndef ROVSCOPE_H
#define ROVSCOPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result of every fallible call.
 */
typedef enum RovscopeStatus {
  ROVSCOPE_STATUS_OK = 0,
  /*
   A required pointer argument was NULL.
   */
  ROVSCOPE_STATUS_NULL_ARGUMENT = 1,
  /*
   A string argument was not valid UTF-8.
   */
  ROVSCOPE_STATUS_INVALID_UTF8 = 2,
  /*
   Input text (CSV, JSONL, JSON, prefix) could not be parsed.
   */
  ROVSCOPE_STATUS_PARSE_ERROR = 3,
  /*
   An argument was out of range.
   */
  ROVSCOPE_STATUS_INVALID_ARGUMENT = 4,
  /*
   The inference, simulation or experiment failed.
   */
  ROVSCOPE_STATUS_RUN_ERROR = 5,
  /*
   A bug inside the library; the message says where.
   */
  ROVSCOPE_STATUS_PANIC = 6,
} RovscopeStatus;

/*
 RFC 6811 route state.
 */
typedef enum RovscopeValidationState {
  ROVSCOPE_VALIDATION_STATE_VALID = 0,
  ROVSCOPE_VALIDATION_STATE_INVALID = 1,
  ROVSCOPE_VALIDATION_STATE_NOT_FOUND = 2,
} RovscopeValidationState;

/*
 Which controlled experiment to run.
 */
typedef enum RovscopeVariant {
  ROVSCOPE_VARIANT_BASE = 0,
  ROVSCOPE_VARIANT_WITHDRAW_REANNOUNCE = 1,
  ROVSCOPE_VARIANT_PREFER_VALID = 2,
} RovscopeVariant;

/*
 A collector RIB snapshot.
 */
typedef struct RovscopeRib RovscopeRib;

/*
 A set of validated ROA payloads.
 */
typedef struct RovscopeRoaSet RovscopeRoaSet;

/*
 A simulation scenario with its topology, policies and plan.
 */
typedef struct RovscopeScenario RovscopeScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, a static string.
 */
const char *rovscope_version(void);

/*
 Message for the last failed call on this thread; empty after a
 success. Valid until the next call on the same thread.
 */
const char *rovscope_last_error(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` is NULL or a string from this library not yet freed.
 */
void rovscope_string_free(char *s);

/*
 Parses VRP CSV (`prefix,maxlen,asn` header).

 # Safety
 `csv` is a NUL-terminated string; `out` is writable.
 */
enum RovscopeStatus rovscope_roaset_from_csv(const char *csv, struct RovscopeRoaSet **out);

/*
 Number of distinct VRPs; 0 for NULL.

 # Safety
 `roas` is NULL or a live handle.
 */
size_t rovscope_roaset_len(const struct RovscopeRoaSet *roas);

/*
 # Safety
 `roas` is NULL or a handle not yet freed.
 */
void rovscope_roaset_free(struct RovscopeRoaSet *roas);

/*
 RFC 6811 state of `prefix` originated by `origin`.

 # Safety
 `roas` is a live handle, `prefix` a NUL-terminated string, `state`
 writable.
 */
enum RovscopeStatus rovscope_validate(const struct RovscopeRoaSet *roas,
                                      const char *prefix,
                                      uint32_t origin,
                                      enum RovscopeValidationState *state);

/*
 Parses a canonical JSONL RIB, tolerating up to `max_malformed` (a
 fraction) unparseable records.

 # Safety
 `jsonl` is a NUL-terminated string; `out` is writable.
 */
enum RovscopeStatus rovscope_rib_from_jsonl(const char *jsonl,
                                            double max_malformed,
                                            struct RovscopeRib **out);

/*
 Number of RIB entries; 0 for NULL.

 # Safety
 `rib` is NULL or a live handle.
 */
size_t rovscope_rib_len(const struct RovscopeRib *rib);

/*
 # Safety
 `rib` is NULL or a handle not yet freed.
 */
void rovscope_rib_free(struct RovscopeRib *rib);

/*
 The passive inference over every vantage point of `rib`, as JSON with
 `threshold`, `non_enforcing`, `candidates` (AS to origins) and
 `enforcing`.

 # Safety
 `rib` and `roas` are live handles; `json_out` is writable.
 */
enum RovscopeStatus rovscope_infer(const struct RovscopeRib *rib,
                                   const struct RovscopeRoaSet *roas,
                                   uint32_t threshold,
                                   char **json_out);

/*
 A catalog scenario by name (`a`-`f` or the full name).

 # Safety
 `name` is a NUL-terminated string; `out` is writable.
 */
enum RovscopeStatus rovscope_scenario_catalog(const char *name, struct RovscopeScenario **out);

/*
 A scenario from its JSON form.

 # Safety
 `json` is a NUL-terminated string; `out` is writable.
 */
enum RovscopeStatus rovscope_scenario_from_json(const char *json, struct RovscopeScenario **out);

/*
 # Safety
 `scenario` is NULL or a handle not yet freed.
 */
void rovscope_scenario_free(struct RovscopeScenario *scenario);

/*
 Runs the scenario's plan on the simulator and returns JSON with the
 experiment `outcome` (or `prefer_valid` outcome) and the `inference`.

 # Safety
 `scenario` is a live handle; `json_out` is writable.
 */
enum RovscopeStatus rovscope_experiment_run(const struct RovscopeScenario *scenario,
                                            enum RovscopeVariant variant,
                                            char **json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROVSCOPE_H */
