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
#include <optional>
#include <span>
#include <string>

#include "hetbatch/allocator.hpp"
#include "hetbatch/controller.hpp"
#include "hetbatch/core.hpp"
#include "hetbatch/perfmodel.hpp"

namespace hetbatch {

enum class GlobalBatchMode { kConserving, kScaling };

const char* to_string(GlobalBatchMode mode);

struct GlobalBatchPolicy {
  GlobalBatchMode mode = GlobalBatchMode::kConserving;
  // Iterations of throughput compared before and after a readjustment.
  int monitor_window = 20;
  // Relative per-capacity throughput drop that triggers scaling down.
  double scale_down_trigger = 0.1;
  // BSP checkpoints are taken every this many logical iterations.
  int checkpoint_interval = 100;

  void validate() const;
  bool operator==(const GlobalBatchPolicy&) const = default;
};

enum class ActionKind {
  kRestartFromCheckpoint,
  kReadjust,
  kHold,
  kForceCheck,
  kAdmit,
  kScaleDown,
};

const char* to_string(ActionKind kind);

/// What the simulator must do in response to one cluster event.
struct Action {
  ActionKind kind = ActionKind::kHold;
  // Kill and relaunch all workers (charged as restart overhead).
  bool restart = false;
  // Roll training progress back to the last checkpoint.
  bool rewind = false;
  Decision decision = Decision::kHold;
  // Allocation over the live workers after the event.
  BatchAllocation allocation;
  std::int64_t target_global = 0;
  // Target before integer rounding, for the scaling policy.
  double exact_target = 0.0;
  DeflationState deflation;
  std::string detail;
};

/// Cluster view the policies reason about.
struct ElasticContext {
  ClusterSpec live;
  BatchAllocation alloc;
  std::int64_t target_global = 0;
  DeflationState deflation;
  CapacityPolicy capacity_policy = CapacityPolicy::kCores;
  double deadband = 0.05;
};

/// Capacity estimate scaled by the worker's current deflation factor.
double effective_capacity(const WorkerSpec& w, const ElasticContext& ctx);
double total_capacity(const ElasticContext& ctx);

/// Eager readjustment after losing `worker`: the survivors split the new
/// target (unchanged when conserving, capacity-proportionally shrunk when
/// scaling) in proportion to their current batches, gated by the deadband.
/// BSP restarts from the last checkpoint; ASP carries on.
Action on_preemption(const WorkerId& worker, const ElasticContext& ctx,
                     const GlobalBatchPolicy& policy);

/// Records the new deflation factor (1 reinflates) and asks the controller
/// for a check at the next iteration boundary.
Action on_deflation(const WorkerId& worker, double factor, const ElasticContext& ctx);

/// Admits a worker. Conserving spreads the current target over all workers
/// by capacity; scaling grows the target by the newcomer's capacity share.
Action on_addition(const WorkerSpec& worker, const ElasticContext& ctx,
                   const GlobalBatchPolicy& policy);

/// Processed samples per second over consecutive trace rows.
double aggregate_throughput(std::span<const IterationTrace> traces);

/// True iff the relative drop from `before` to `after` strictly exceeds `trigger`.
bool throughput_drop_exceeds(double before, double after, double trigger);

struct MonitorInput {
  std::span<const IterationTrace> before;
  std::span<const IterationTrace> after;
  double capacity_before = 1.0;
  double capacity_after = 1.0;
  // Global batch the scaling policy would use for the current capacity.
  std::int64_t scaled_target = 0;
};

/// Compares per-capacity cluster throughput around a conserving
/// readjustment; returns the scaled-down global batch when it fell by more
/// than the policy trigger.
std::optional<std::int64_t> monitor_and_scale_down(const MonitorInput& input,
                                                   const GlobalBatchPolicy& policy);

std::int64_t last_checkpoint(std::int64_t iteration, int interval);

}  // namespace hetbatch
