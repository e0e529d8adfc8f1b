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

#include "hetbatch/elasticity.hpp"

#include <cmath>

namespace hetbatch {

const char* to_string(GlobalBatchMode mode) {
  return mode == GlobalBatchMode::kScaling ? "scaling" : "conserving";
}

const char* to_string(ActionKind kind) {
  switch (kind) {
    case ActionKind::kRestartFromCheckpoint: return "restart_from_checkpoint";
    case ActionKind::kReadjust: return "readjust";
    case ActionKind::kHold: return "hold";
    case ActionKind::kForceCheck: return "force_check";
    case ActionKind::kAdmit: return "admit";
    case ActionKind::kScaleDown: return "scale_down";
  }
  return "hold";
}

void GlobalBatchPolicy::validate() const {
  if (monitor_window < 1) {
    throw Error(ErrorCode::kInvalidInput, "policy monitor_window must be >= 1");
  }
  if (!(scale_down_trigger > 0.0 && scale_down_trigger < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "policy scale_down_trigger must lie in (0,1)");
  }
  if (checkpoint_interval < 1) {
    throw Error(ErrorCode::kInvalidInput, "policy checkpoint_interval must be >= 1");
  }
}

double effective_capacity(const WorkerSpec& w, const ElasticContext& ctx) {
  const auto policy = effective_policy(ctx.live, ctx.capacity_policy);
  return capacity_estimate(w, policy) * ctx.deflation.of(w.id);
}

double total_capacity(const ElasticContext& ctx) {
  double sum = 0.0;
  for (const auto& w : ctx.live.workers) sum += effective_capacity(w, ctx);
  return sum;
}

Action on_preemption(const WorkerId& worker, const ElasticContext& ctx,
                     const GlobalBatchPolicy& policy) {
  if (!ctx.live.contains(worker) || !ctx.alloc.contains(worker)) {
    throw Error(ErrorCode::kInvalidEvent, "preemption of unknown worker '" + worker + "'");
  }
  if (ctx.live.workers.size() == 1) {
    throw Error(ErrorCode::kClusterExhausted,
                "last live worker '" + worker + "' was preempted");
  }
  const double cap_before = total_capacity(ctx);
  const double cap_after = cap_before - effective_capacity(ctx.live.worker(worker), ctx);

  Action a;
  a.deflation = ctx.deflation;
  a.deflation.factor.erase(worker);
  BatchAllocation survivors = ctx.alloc;
  survivors.erase(worker);

  if (policy.mode == GlobalBatchMode::kScaling) {
    a.exact_target = static_cast<double>(ctx.target_global) * cap_after / cap_before;
    a.target_global = std::max<std::int64_t>(static_cast<std::int64_t>(survivors.size()),
                                             std::llround(a.exact_target));
  } else {
    a.exact_target = static_cast<double>(ctx.target_global);
    a.target_global = ctx.target_global;
  }

  std::vector<double> weights(survivors.sizes().begin(), survivors.sizes().end());
  BatchAllocation redistributed({survivors.ids().begin(), survivors.ids().end()},
                                apportion(a.target_global, weights));
  a.decision = deadband_check(survivors, redistributed, ctx.deadband);
  a.allocation = a.decision == Decision::kAdjust ? redistributed : survivors;

  if (ctx.live.sync_mode == SyncMode::kBsp) {
    a.kind = ActionKind::kRestartFromCheckpoint;
    a.restart = true;
    a.rewind = true;
  } else {
    a.kind = a.decision == Decision::kAdjust ? ActionKind::kReadjust : ActionKind::kHold;
    a.restart = a.decision == Decision::kAdjust;
  }
  a.detail = "preempt " + worker;
  return a;
}

Action on_deflation(const WorkerId& worker, double factor, const ElasticContext& ctx) {
  if (!ctx.live.contains(worker)) {
    throw Error(ErrorCode::kInvalidEvent, "deflation of unknown worker '" + worker + "'");
  }
  Action a;
  a.kind = ActionKind::kForceCheck;
  a.deflation = ctx.deflation;
  a.deflation.set(worker, factor);
  a.allocation = ctx.alloc;
  a.target_global = ctx.target_global;
  a.exact_target = static_cast<double>(ctx.target_global);
  a.detail = (factor == 1.0 ? "reinflate " : "deflate ") + worker;
  return a;
}

Action on_addition(const WorkerSpec& worker, const ElasticContext& ctx,
                   const GlobalBatchPolicy& policy) {
  worker.validate();
  if (ctx.live.contains(worker.id)) {
    throw Error(ErrorCode::kInvalidEvent, "worker '" + worker.id + "' is already live");
  }
  ElasticContext grown = ctx;
  grown.live.workers.push_back(worker);
  const double cap_before = total_capacity(ctx);
  const double cap_after = total_capacity(grown);

  Action a;
  a.kind = ActionKind::kAdmit;
  a.restart = true;
  a.decision = Decision::kAdjust;
  a.deflation = ctx.deflation;
  if (policy.mode == GlobalBatchMode::kScaling) {
    // Recomputed from the grown cluster so capacity units stay consistent
    // when a GPU joins a CPU cluster.
    a.exact_target = static_cast<double>(ctx.target_global) * cap_after / cap_before;
    a.target_global = std::llround(a.exact_target);
  } else {
    a.exact_target = static_cast<double>(ctx.target_global);
    a.target_global = ctx.target_global;
  }
  const auto k = static_cast<std::int64_t>(grown.live.workers.size());
  a.target_global = std::max(a.target_global, k);

  std::vector<double> caps;
  std::vector<WorkerId> ids;
  for (const auto& w : grown.live.workers) {
    caps.push_back(effective_capacity(w, grown));
    ids.push_back(w.id);
  }
  a.allocation = BatchAllocation(std::move(ids), apportion(a.target_global, caps));
  a.detail = "add " + worker.id;
  return a;
}

double aggregate_throughput(std::span<const IterationTrace> traces) {
  if (traces.empty()) return 0.0;
  double samples = 0.0;
  double busy = 0.0;
  bool asp = false;
  for (const auto& t : traces) {
    asp = asp || !t.staleness.empty();
    busy += t.makespan;
    for (const auto& [id, secs] : t.per_worker_time) {
      (void)secs;
      if (t.allocation.contains(id)) samples += static_cast<double>(t.allocation.at(id));
    }
  }
  // BSP rounds are back to back apart from restarts, so the summed makespans
  // exclude restart downtime. ASP commits overlap; use the wall-clock span.
  double seconds = busy;
  if (asp) {
    seconds = traces.back().time_end - (traces.front().time_end - traces.front().makespan);
  }
  return seconds > 0.0 ? samples / seconds : 0.0;
}

bool throughput_drop_exceeds(double before, double after, double trigger) {
  if (!(before > 0.0)) return false;
  return (before - after) / before > trigger;
}

std::optional<std::int64_t> monitor_and_scale_down(const MonitorInput& input,
                                                   const GlobalBatchPolicy& policy) {
  if (policy.mode != GlobalBatchMode::kConserving) return std::nullopt;
  if (input.before.empty() || input.after.empty()) return std::nullopt;
  if (!(input.capacity_before > 0.0) || !(input.capacity_after > 0.0)) return std::nullopt;
  // Normalise by capacity so that losing a worker is not itself a "drop".
  const double before = aggregate_throughput(input.before) / input.capacity_before;
  const double after = aggregate_throughput(input.after) / input.capacity_after;
  if (!throughput_drop_exceeds(before, after, policy.scale_down_trigger)) {
    return std::nullopt;
  }
  return input.scaled_target;
}

std::int64_t last_checkpoint(std::int64_t iteration, int interval) {
  if (interval < 1) throw Error(ErrorCode::kInvalidInput, "checkpoint interval must be >= 1");
  return (iteration / interval) * interval;
}

}  // namespace hetbatch
