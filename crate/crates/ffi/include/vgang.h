#ifndef VGANG_H
#define VGANG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VgAlgorithm {
  VG_ALGORITHM_BFC = 0,
  VG_ALGORITHM_GPC = 1,
} VgAlgorithm;

typedef enum VgPolicy {
  VG_POLICY_RT_GANG = 0,
  VG_POLICY_RTG_SYNC = 1,
  VG_POLICY_UNSYNC_VGANG = 2,
  VG_POLICY_GANG_FTP = 3,
  VG_POLICY_THREADED = 4,
} VgPolicy;

typedef enum VgStatus {
  VG_STATUS_OK = 0,
  VG_STATUS_NULL_ARGUMENT = 1,
  VG_STATUS_INVALID_UTF8 = 2,
  VG_STATUS_SCHEMA_VIOLATION = 3,
  VG_STATUS_INVALID_TASK = 4,
  VG_STATUS_INVALID_CONFIG = 5,
  VG_STATUS_INVALID_SPEC = 6,
  VG_STATUS_CONFIG_SPACE_TOO_LARGE = 7,
  VG_STATUS_OVERFLOW = 8,
  VG_STATUS_INCOMPLETE_TRACE = 9,
  VG_STATUS_UNREACHABLE_TARGET = 10,
  VG_STATUS_IO = 11,
  VG_STATUS_PANIC = 12,
} VgStatus;

typedef enum VgTasksetType {
  VG_TASKSET_TYPE_LIGHT = 0,
  VG_TASKSET_TYPE_MIXED = 1,
  VG_TASKSET_TYPE_HEAVY = 2,
} VgTasksetType;

/**
 * Opaque taskset handle.
 */
typedef struct VgTaskset VgTaskset;

/**
 * Opaque simulation trace handle.
 */
typedef struct VgTrace VgTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *vg_last_error_message(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void vg_string_free(char *s);

/**
 * Parses a taskset from JSON.
 *
 * # Safety
 * `json` must be a nul-terminated string; `out` must be writable.
 */
enum VgStatus vg_taskset_from_json(const char *json, struct VgTaskset **out);

/**
 * Serializes a taskset; free the result with `vg_string_free`.
 *
 * # Safety
 * `ts` must be a live handle; `out` must be writable.
 */
enum VgStatus vg_taskset_to_json(const struct VgTaskset *ts, char **out);

/**
 * # Safety
 * `ts` must be null or a handle from this library that has not been freed.
 */
void vg_taskset_free(struct VgTaskset *ts);

/**
 * Number of entities (plain tasks plus gangs), or 0 for null.
 *
 * # Safety
 * `ts` must be null or a live handle.
 */
size_t vg_taskset_len(const struct VgTaskset *ts);

/**
 * Generates a random taskset.
 *
 * `n_per_period` of 0 keeps the default range of tasks per period.
 *
 * # Safety
 * `out` must be writable.
 */
enum VgStatus vg_generate(uint32_t m,
                          double util,
                          enum VgTasksetType kind,
                          uint32_t n_per_period,
                          uint64_t seed,
                          struct VgTaskset **out);

/**
 * Forms virtual gangs from every same-period group of plain tasks. With
 * `interference` set, gang WCETs are measured with the co-runner
 * demand model; brute force falls back to greedy packing when too large.
 *
 * # Safety
 * `ts` must be a live handle; `out` must be writable.
 */
enum VgStatus vg_form(const struct VgTaskset *ts,
                      enum VgAlgorithm algorithm,
                      bool interference,
                      double tolerance,
                      struct VgTaskset **out);

/**
 * Returns a copy of `ts` with WCETs inflated for co-runner interference
 * under `policy`. The synchronized and unsynchronized virtual-gang
 * policies share one model.
 *
 * # Safety
 * `ts` must be a live handle; `out` must be writable.
 */
enum VgStatus vg_apply_interference(const struct VgTaskset *ts,
                                    enum VgPolicy policy,
                                    struct VgTaskset **out);

/**
 * Response-time analysis under one-gang-at-a-time scheduling.
 *
 * # Safety
 * `ts` must be a live handle; `schedulable` must be writable; `report` may
 * be null, otherwise it receives the JSON report (free with `vg_string_free`).
 */
enum VgStatus vg_analyze(const struct VgTaskset *ts, bool *schedulable, char **report);

/**
 * Simulates `ts` with synchronous release. `horizon` of 0 simulates one
 * hyperperiod (capped).
 *
 * # Safety
 * `ts` must be a live handle; `out` must be writable.
 */
enum VgStatus vg_simulate(const struct VgTaskset *ts,
                          enum VgPolicy policy,
                          uint64_t horizon,
                          struct VgTrace **out);

/**
 * # Safety
 * `trace` must be null or a handle from this library that has not been freed.
 */
void vg_trace_free(struct VgTrace *trace);

/**
 * Latest first-job completion minus earliest release.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum VgStatus vg_trace_makespan(const struct VgTrace *trace, uint64_t *out);

/**
 * Number of deadline misses in the trace.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum VgStatus vg_trace_misses(const struct VgTrace *trace, uint64_t *out);

/**
 * Trace events as JSON lines; free the result with `vg_string_free`.
 *
 * # Safety
 * `trace` must be a live handle; `out` must be writable.
 */
enum VgStatus vg_trace_to_jsonl(const struct VgTrace *trace, char **out);

/**
 * Stirling number of the second kind S(n, k).
 *
 * # Safety
 * `out` must be writable.
 */
enum VgStatus vg_stirling2(uint32_t n, uint32_t k, uint64_t *out);

/**
 * Number of partitions of `n` single-core tasks into viable gangs on `m` cores.
 *
 * # Safety
 * `out` must be writable.
 */
enum VgStatus vg_config_count_bound(uint32_t n, uint32_t m, uint64_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VGANG_H */
