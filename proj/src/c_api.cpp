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

#include "hetbatch/hetbatch.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "hetbatch/controller.hpp"
#include "hetbatch/runner.hpp"

using namespace hetbatch;

struct hb_scenario {
  std::string source;
  Overrides overrides;
  ScenarioFile file;
  std::string text;
};

struct hb_result {
  RunOutcome outcome;
};

struct hb_controller {
  std::unique_ptr<Controller> controller;
  std::vector<WorkerId> ids;
  std::int64_t iteration = 0;
};

namespace {

thread_local std::string g_last_error;

hb_status fail(hb_status status, const std::string& msg) {
  g_last_error = msg;
  return status;
}

template <typename F>
hb_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const Error& e) {
    return fail(static_cast<hb_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return fail(HB_ERR_INTERNAL, "out of host memory");
  } catch (const std::exception& e) {
    return fail(HB_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HB_ERR_INTERNAL, "unknown failure");
  }
}

#define HB_REQUIRE(ptr)                                                   \
  do {                                                                    \
    if ((ptr) == nullptr) return fail(HB_ERR_NULL_ARGUMENT, #ptr " is NULL"); \
  } while (0)

std::vector<WorkerId> synthetic_ids(std::size_t n) {
  std::vector<WorkerId> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back("w" + std::to_string(i));
  return ids;
}

double mean_makespan(const SimResult& r) {
  if (r.traces.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : r.traces) s += t.makespan;
  return s / static_cast<double>(r.traces.size());
}

}  // namespace

extern "C" {

const char* hb_version(void) { return "0.1.0"; }

const char* hb_last_error(void) { return g_last_error.c_str(); }

const char* hb_status_name(hb_status status) {
  switch (status) {
    case HB_OK: return "ok";
    case HB_ERR_NULL_ARGUMENT: return "null_argument";
    case HB_ERR_INTERNAL: return "internal";
    default: break;
  }
  const int v = static_cast<int>(status);
  if (v >= 1 && v <= 11) return error_code_name(static_cast<ErrorCode>(v));
  return "unknown";
}

int hb_exit_code(hb_status status) {
  if (status == HB_OK) return kExitOk;
  const int v = static_cast<int>(status);
  if (v >= 1 && v <= 11) return exit_code_for(static_cast<ErrorCode>(v));
  return kExitFailure;
}

hb_status hb_scenario_parse(const char* text, hb_scenario** out) {
  HB_REQUIRE(text);
  HB_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto s = std::make_unique<hb_scenario>();
    s->source = text;
    s->file = parse_scenario(s->source);
    *out = s.release();
    return HB_OK;
  });
}

hb_status hb_scenario_load(const char* path, hb_scenario** out) {
  HB_REQUIRE(path);
  HB_REQUIRE(out);
  *out = nullptr;
  std::ifstream in(path, std::ios::binary);
  if (!in) return fail(HB_ERR_CONFIG, std::string("cannot read scenario file '") + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  return hb_scenario_parse(text.c_str(), out);
}

hb_status hb_scenario_override(hb_scenario* s, const char* key, const char* value) {
  HB_REQUIRE(s);
  HB_REQUIRE(key);
  HB_REQUIRE(value);
  return guarded([&] {
    s->overrides.emplace_back(key, value);
    return HB_OK;
  });
}

hb_status hb_scenario_set_seed(hb_scenario* s, uint64_t seed) {
  HB_REQUIRE(s);
  return guarded([&] {
    s->overrides.emplace_back("seed", std::to_string(seed));
    return HB_OK;
  });
}

hb_status hb_scenario_apply(hb_scenario* s) {
  HB_REQUIRE(s);
  return guarded([&] {
    s->file = parse_scenario(s->source, s->overrides);
    return HB_OK;
  });
}

hb_status hb_scenario_validate(const hb_scenario* s) {
  HB_REQUIRE(s);
  return guarded([&] {
    (void)resolve(s->file);
    return HB_OK;
  });
}

hb_status hb_scenario_text(hb_scenario* s, const char** out) {
  HB_REQUIRE(s);
  HB_REQUIRE(out);
  return guarded([&] {
    s->text = to_text(s->file);
    *out = s->text.c_str();
    return HB_OK;
  });
}

void hb_scenario_free(hb_scenario* s) { delete s; }

hb_status hb_run(const hb_scenario* s, const char* out_dir, hb_result** out) {
  HB_REQUIRE(s);
  HB_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<hb_result>();
    r->outcome = out_dir ? run_file(s->file, out_dir) : execute(s->file);
    const auto& o = r->outcome;
    const hb_status st =
        o.error ? static_cast<hb_status>(static_cast<int>(*o.error)) : HB_OK;
    if (o.error) g_last_error = o.message;
    *out = r.release();
    return st;
  });
}

int hb_result_exit_code(const hb_result* r) { return r ? r->outcome.exit_code : kExitFailure; }

double hb_result_total_time(const hb_result* r) {
  return r && r->outcome.sim ? r->outcome.sim->total_time : 0.0;
}

double hb_result_overhead_fraction(const hb_result* r) {
  return r && r->outcome.sim ? r->outcome.sim->overhead_fraction : 0.0;
}

double hb_result_mean_makespan(const hb_result* r) {
  return r && r->outcome.sim ? mean_makespan(*r->outcome.sim) : 0.0;
}

int64_t hb_result_adjustments(const hb_result* r) {
  return r && r->outcome.sim ? static_cast<int64_t>(r->outcome.sim->adjustments.size()) : 0;
}

int64_t hb_result_iterations(const hb_result* r) {
  return r && r->outcome.sim ? r->outcome.sim->iterations_completed : 0;
}

int64_t hb_result_iterations_to_loss(const hb_result* r) {
  return r ? r->outcome.iterations_to_loss : -1;
}

double hb_result_final_loss(const hb_result* r) {
  if (!r || !r->outcome.train || r->outcome.train->losses.empty()) return 0.0;
  return r->outcome.train->losses.back().loss;
}

size_t hb_result_final_allocation(const hb_result* r, int64_t* sizes, size_t cap) {
  if (!r || !r->outcome.sim) return 0;
  const auto s = r->outcome.sim->final_alloc.sizes();
  if (sizes) {
    for (std::size_t i = 0; i < s.size() && i < cap; ++i) sizes[i] = s[i];
  }
  return s.size();
}

const char* hb_result_trace(const hb_result* r) { return r ? r->outcome.trace_text.c_str() : ""; }

const char* hb_result_summary(const hb_result* r) {
  return r ? r->outcome.summary_text.c_str() : "";
}

const char* hb_result_message(const hb_result* r) { return r ? r->outcome.message.c_str() : ""; }

void hb_result_free(hb_result* r) { delete r; }

hb_status hb_compare(const hb_scenario* a, const hb_scenario* b, const char* metric,
                     double* value_a, double* value_b, double* ratio, char** report) {
  HB_REQUIRE(a);
  HB_REQUIRE(b);
  HB_REQUIRE(metric);
  if (report) *report = nullptr;
  return guarded([&] {
    const auto rep = compare(a->file, b->file, parse_metric(metric));
    if (value_a) *value_a = rep.value_a;
    if (value_b) *value_b = rep.value_b;
    if (ratio) *ratio = rep.ratio;
    if (report) {
      char* buf = static_cast<char*>(std::malloc(rep.text.size() + 1));
      if (!buf) throw std::bad_alloc();
      std::memcpy(buf, rep.text.c_str(), rep.text.size() + 1);
      *report = buf;
    }
    return HB_OK;
  });
}

void hb_free(void* p) { std::free(p); }

hb_status hb_static_allocation(const double* capacities, size_t n, int64_t b0,
                               int64_t* out_sizes) {
  HB_REQUIRE(capacities);
  HB_REQUIRE(out_sizes);
  return guarded([&] {
    const auto sizes = static_allocation(b0, std::span<const double>(capacities, n));
    std::copy(sizes.begin(), sizes.end(), out_sizes);
    return HB_OK;
  });
}

hb_status hb_heterogeneity_level(const double* capacities, size_t n, double* out) {
  HB_REQUIRE(capacities);
  HB_REQUIRE(out);
  return guarded([&] {
    *out = heterogeneity_level(std::span<const double>(capacities, n));
    return HB_OK;
  });
}

hb_status hb_controller_create(size_t n, const int64_t* initial, double deadband,
                               double ewma_alpha, int window, int conserve_global,
                               const int64_t* bounds, hb_controller** out) {
  HB_REQUIRE(initial);
  HB_REQUIRE(out);
  *out = nullptr;
  return guarded([&] {
    if (n == 0) throw Error(ErrorCode::kInvalidInput, "controller needs at least one worker");
    auto c = std::make_unique<hb_controller>();
    c->ids = synthetic_ids(n);
    ControllerConfig cfg;
    cfg.deadband = deadband;
    cfg.ewma_alpha = ewma_alpha;
    cfg.window = window;
    cfg.conserve_global = conserve_global != 0;
    if (bounds) {
      for (std::size_t i = 0; i < n; ++i) {
        BatchBounds b;
        b.min = bounds[2 * i];
        if (bounds[2 * i + 1] > 0) b.max = bounds[2 * i + 1];
        cfg.bounds[c->ids[i]] = b;
      }
    }
    cfg.validate();
    BatchAllocation alloc(c->ids, std::vector<std::int64_t>(initial, initial + n));
    c->controller = std::make_unique<Controller>(cfg, alloc);
    *out = c.release();
    return HB_OK;
  });
}

hb_status hb_controller_step(hb_controller* c, const double* times, int* adjusted,
                             int64_t* sizes) {
  HB_REQUIRE(c);
  HB_REQUIRE(times);
  return guarded([&] {
    IterationTrace t;
    t.iteration = c->iteration;
    t.round = c->iteration;
    for (std::size_t i = 0; i < c->ids.size(); ++i) t.per_worker_time[c->ids[i]] = times[i];
    t.allocation = c->controller->current();
    const auto res = c->controller->step(t);
    ++c->iteration;
    if (adjusted) *adjusted = res.decision == Decision::kAdjust ? 1 : 0;
    if (sizes) {
      const auto s = c->controller->current().sizes();
      std::copy(s.begin(), s.end(), sizes);
    }
    return HB_OK;
  });
}

int64_t hb_controller_adjustments(const hb_controller* c) {
  return c ? static_cast<int64_t>(c->controller->state().adjustments.size()) : 0;
}

void hb_controller_free(hb_controller* c) { delete c; }

}  // extern "C"
