/*
 * Copyright 2026 The hetbatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the hetbatch library. All handles are opaque. Functions
 * return an hb_status; on failure hb_last_error() describes the problem for
 * the calling thread. Strings returned by getters stay valid until the
 * owning handle is freed. */

#ifndef HETBATCH_HETBATCH_H_
#define HETBATCH_HETBATCH_H_

#include <stddef.h>
#include <stdint.h>

#if defined(HETBATCH_BUILDING_LIBRARY)
#define HB_API __attribute__((visibility("default")))
#else
#define HB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hb_status {
  HB_OK = 0,
  HB_ERR_INVALID_INPUT = 1,
  HB_ERR_CONFIG = 2,
  HB_ERR_INFEASIBLE = 3,
  HB_ERR_CLUSTER_EXHAUSTED = 4,
  HB_ERR_NUMERICAL = 5,
  HB_ERR_OUT_OF_MEMORY = 6,
  HB_ERR_INVALID_STATE = 7,
  HB_ERR_INVALID_MEASUREMENT = 8,
  HB_ERR_INVALID_EVENT = 9,
  HB_ERR_INVALID_MODE = 10,
  HB_ERR_IO = 11,
  HB_ERR_NULL_ARGUMENT = 100,
  HB_ERR_INTERNAL = 101
} hb_status;

typedef struct hb_scenario hb_scenario;
typedef struct hb_result hb_result;
typedef struct hb_controller hb_controller;

HB_API const char* hb_version(void);
/* Message of the last failed call on this thread; "" if none. */
HB_API const char* hb_last_error(void);
HB_API const char* hb_status_name(hb_status status);
/* Process exit code the CLI uses for a status. */
HB_API int hb_exit_code(hb_status status);

/* Scenarios. */
HB_API hb_status hb_scenario_load(const char* path, hb_scenario** out);
HB_API hb_status hb_scenario_parse(const char* text, hb_scenario** out);
/* Records a "dotted.key=value" override; applied on the next hb_scenario_apply. */
HB_API hb_status hb_scenario_override(hb_scenario* s, const char* key, const char* value);
HB_API hb_status hb_scenario_set_seed(hb_scenario* s, uint64_t seed);
/* Re-parses the source text with all recorded overrides. */
HB_API hb_status hb_scenario_apply(hb_scenario* s);
/* Resolves and validates without running. */
HB_API hb_status hb_scenario_validate(const hb_scenario* s);
/* Canonical serialized form; owned by the handle. */
HB_API hb_status hb_scenario_text(hb_scenario* s, const char** out);
HB_API void hb_scenario_free(hb_scenario* s);

/* Runs a scenario. With out_dir NULL nothing is written to disk. A run that
 * fails after starting still yields a result holding the partial output;
 * the return value is the failure status. */
HB_API hb_status hb_run(const hb_scenario* s, const char* out_dir, hb_result** out);
HB_API int hb_result_exit_code(const hb_result* r);
HB_API double hb_result_total_time(const hb_result* r);
HB_API double hb_result_overhead_fraction(const hb_result* r);
HB_API double hb_result_mean_makespan(const hb_result* r);
HB_API int64_t hb_result_adjustments(const hb_result* r);
HB_API int64_t hb_result_iterations(const hb_result* r);
HB_API int64_t hb_result_iterations_to_loss(const hb_result* r);
HB_API double hb_result_final_loss(const hb_result* r);
/* Final per-worker batches in cluster order. Returns the worker count; writes
 * at most `cap` entries. */
HB_API size_t hb_result_final_allocation(const hb_result* r, int64_t* sizes, size_t cap);
HB_API const char* hb_result_trace(const hb_result* r);
HB_API const char* hb_result_summary(const hb_result* r);
HB_API const char* hb_result_message(const hb_result* r);
HB_API void hb_result_free(hb_result* r);

/* Runs two scenarios concurrently. metric is "total_time",
 * "mean_makespan" or "iterations_to_loss". ratio = a / b. report may be
 * NULL; otherwise it receives a malloc'd JSON string to free with hb_free. */
HB_API hb_status hb_compare(const hb_scenario* a, const hb_scenario* b, const char* metric,
                            double* value_a, double* value_b, double* ratio, char** report);
HB_API void hb_free(void* p);

/* Allocation helpers. out_sizes receives n entries summing to n*b0. */
HB_API hb_status hb_static_allocation(const double* capacities, size_t n, int64_t b0,
                                      int64_t* out_sizes);
HB_API hb_status hb_heterogeneity_level(const double* capacities, size_t n, double* out);

/* Stand-alone proportional controller over n workers. bounds may be NULL
 * (unbounded); otherwise 2*n values (min, max) with max <= 0 meaning no
 * upper bound. */
HB_API hb_status hb_controller_create(size_t n, const int64_t* initial, double deadband,
                                      double ewma_alpha, int window, int conserve_global,
                                      const int64_t* bounds, hb_controller** out);
/* Feeds one iteration of per-worker times. *adjusted is set to 1 when the
 * allocation changed; sizes (n entries, may be NULL) receives it. */
HB_API hb_status hb_controller_step(hb_controller* c, const double* times, int* adjusted,
                                    int64_t* sizes);
HB_API int64_t hb_controller_adjustments(const hb_controller* c);
HB_API void hb_controller_free(hb_controller* c);

#ifdef __cplusplus
}
#endif

#endif /* HETBATCH_HETBATCH_H_ */
