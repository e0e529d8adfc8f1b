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

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hetbatch/allocator.hpp"
#include "hetbatch/controller.hpp"
#include "hetbatch/core.hpp"
#include "hetbatch/elasticity.hpp"
#include "hetbatch/perfmodel.hpp"

namespace hetbatch {

enum class EventKind { kPreempt, kDeflate, kReinflate, kAdd };

const char* to_string(EventKind kind);

struct ClusterEvent {
  double at = 0.0;
  EventKind kind = EventKind::kPreempt;
  // Target of preempt/deflate/reinflate.
  WorkerId worker;
  // Deflate only: fraction of resources left, in (0,1).
  double factor = 1.0;
  // Add only.
  WorkerSpec added;

  void validate() const;
  bool operator==(const ClusterEvent&) const = default;
};

enum class InitialAllocKind { kUniform, kStatic, kExplicit };

const char* to_string(InitialAllocKind kind);

struct InitialAllocation {
  InitialAllocKind kind = InitialAllocKind::kUniform;
  std::int64_t b0 = 128;
  CapacityPolicy policy = CapacityPolicy::kCores;
  // kExplicit: one size per worker, in cluster order.
  std::vector<std::int64_t> sizes;

  bool operator==(const InitialAllocation&) const = default;
};

BatchAllocation make_initial_allocation(const ClusterSpec& cluster,
                                        const InitialAllocation& init);

/// Stop after `iterations` logical iterations (BSP) or commits (ASP), or once
/// simulated time reaches `seconds`; zero disables a limit.
struct Horizon {
  std::int64_t iterations = 1000;
  double seconds = 0.0;
  bool operator==(const Horizon&) const = default;
};

struct Scenario {
  ClusterSpec cluster;
  PerfParams default_perf;
  // Per-worker overrides, including workers added by events.
  std::map<WorkerId, PerfParams> perf;
  bool controller_enabled = true;
  ControllerConfig controller;
  InitialAllocation initial;
  std::vector<ClusterEvent> events;
  GlobalBatchPolicy policy;
  // Kill-restart cost per adjustment or membership change.
  double restart_cost = 60.0;
  // Per-round synchronization cost (BSP) or per-commit push/pull (ASP).
  double sync_cost = 0.0;
  Horizon horizon;
  // ASP controller checks at most this often, in simulated seconds.
  double asp_check_seconds = 600.0;
  std::uint64_t seed = 0;

  const PerfParams& perf_for(const WorkerId& id) const;
  void validate() const;
  bool operator==(const Scenario&) const = default;
};

struct ActionRecord {
  std::int64_t event_id = 0;
  double at = 0.0;
  double fired_at = 0.0;
  std::int64_t iteration = 0;
  EventKind event = EventKind::kPreempt;
  WorkerId worker;
  // Empty when the event exhausted the cluster.
  std::string outcome;
  Action action;
};

struct SimResult {
  SyncMode mode = SyncMode::kBsp;
  std::vector<IterationTrace> traces;
  std::vector<ActionRecord> actions;
  std::vector<Adjustment> adjustments;
  // Diagnostics (out-of-memory clamps, abandoned conservation, b_max drops).
  std::vector<std::string> notes;
  double total_time = 0.0;
  double overhead_time = 0.0;
  double idle_time = 0.0;
  double overhead_fraction = 0.0;
  std::int64_t iterations_completed = 0;
  std::int64_t restarts = 0;
  BatchAllocation initial_alloc;
  BatchAllocation final_alloc;
  std::int64_t final_target_global = 0;
  std::map<WorkerId, std::map<std::int64_t, std::int64_t>> staleness_histogram;
};

/// Streaming hooks, invoked as rows and actions are produced so callers can
/// flush partial output when a run fails.
struct SimCallbacks {
  std::function<void(const IterationTrace&)> on_trace;
  std::function<void(const ActionRecord&)> on_action;
};

/// Runs the scenario to its horizon. Deterministic for a given seed.
/// Throws kClusterExhausted when every worker has been preempted; rows
/// produced up to that point have already gone through the callbacks.
SimResult simulate(const Scenario& scenario, const SimCallbacks& callbacks = {});

struct OverheadReport {
  std::int64_t adjustments = 0;
  double overhead_fraction = 0.0;
};

OverheadReport overhead_report(const SimResult& result);

struct StalenessStats {
  std::map<WorkerId, std::map<std::int64_t, std::int64_t>> histogram;
  std::map<WorkerId, double> mean;
  double max_mean = 0.0;
};

/// Per-worker staleness distribution of an ASP run; kInvalidMode for BSP.
StalenessStats staleness_stats(const SimResult& result);

/// Commit order of an ASP run, for replaying it with real gradients.
std::vector<AspCommit> asp_schedule(const SimResult& result);

}  // namespace hetbatch
