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
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hetbatch/core.hpp"

namespace hetbatch {

struct BatchBounds {
  std::int64_t min = 1;
  std::int64_t max = std::numeric_limits<std::int64_t>::max();

  std::int64_t clamp(std::int64_t b) const { return b < min ? min : (b > max ? max : b); }
  bool contains(std::int64_t b) const { return b >= min && b <= max; }
  bool operator==(const BatchBounds&) const = default;
};

using BoundsMap = std::map<WorkerId, BatchBounds>;

struct ControllerConfig {
  // Relative change any worker's batch must exceed before batches move.
  double deadband = 0.05;
  double ewma_alpha = 0.3;
  BatchBounds default_bounds;
  BoundsMap bounds;
  // Rescale proposals to the target global batch before rounding.
  bool conserve_global = true;
  // Iterations between adjustment checks.
  int window = 20;
  // Lower b_max to the previous batch when a batch increase lowered the
  // worker's measured throughput by more than drop_tolerance (relative).
  bool tighten_bmax_on_drop = true;
  double drop_tolerance = 0.0;

  void validate() const;
  BatchBounds bounds_for(const WorkerId& id) const;
  bool operator==(const ControllerConfig&) const = default;
};

enum class Decision { kHold, kAdjust };

const char* to_string(Decision d);

struct Adjustment {
  std::int64_t iteration = 0;
  BatchAllocation before;
  BatchAllocation after;
  std::string reason;
};

struct ThroughputSample {
  std::int64_t batch = 0;
  double throughput = 0.0;
};

/// Snapshot of a worker's throughput taken right before its batch grew.
struct PendingIncrease {
  std::int64_t old_batch = 0;
  double old_throughput = 0.0;
  std::int64_t new_batch = 0;
};

struct ControllerState {
  BatchAllocation current;
  std::int64_t target_global = 0;
  // Smoothed iteration times since the last adjustment.
  std::map<WorkerId, double> ewma_times;
  std::map<WorkerId, int> ewma_samples;
  std::int64_t last_adjust_iter = -1;
  int samples_since_check = 0;
  bool force_check = false;
  BoundsMap bounds;
  std::map<WorkerId, PendingIncrease> pending_increase;
  std::map<WorkerId, std::vector<ThroughputSample>> throughput_history;
  std::vector<Adjustment> adjustments;
  // Checks where bound saturation made the global batch unreachable.
  int conservation_abandoned = 0;
};

/// Folds one set of per-worker iteration times into the smoothed times:
/// mu = alpha*t + (1-alpha)*mu, with mu = t on the first sample after a reset.
void ewma_update(ControllerState& state, const std::map<WorkerId, double>& times,
                 double alpha);

/// Real-valued proportional proposal b_k * t_mean / mu_k, in allocation order.
/// With `conserve_target` the proposals are rescaled to sum to it.
std::vector<double> propose_batches(const BatchAllocation& current,
                                    const std::map<WorkerId, double>& smoothed,
                                    std::optional<std::int64_t> conserve_target);

/// Integer allocation from a real-valued proposal. Keeps `total` exactly, or
/// the rounded proposal sum when no total is given.
BatchAllocation round_proposal(const BatchAllocation& current,
                               const std::vector<double>& proposal,
                               std::optional<std::int64_t> total);

struct ClampResult {
  BatchAllocation allocation;
  bool conservation_abandoned = false;
};

/// Clamps every batch into its bounds. With a conservation target the
/// residual is redistributed over the unclamped workers in proportion to
/// their proposed batches until nothing moves; if every worker ends up
/// pinned the target is given up and the result says so.
ClampResult clamp_bounds(const BatchAllocation& proposal, const BoundsMap& bounds,
                         const BatchBounds& default_bounds,
                         std::optional<std::int64_t> conserve_target);

/// Adjust iff max_k |proposed_k - old_k| / old_k > deadband.
Decision deadband_check(const BatchAllocation& old_alloc,
                        const BatchAllocation& proposed, double deadband);

/// Applies the throughput-drop rule to one worker's bounds. Only batch
/// increases count. Returns true when b_max was lowered to old_batch.
bool update_bmax_on_drop(BatchBounds& bounds, std::int64_t old_batch,
                         std::int64_t new_batch, double old_throughput,
                         double new_throughput, double tolerance = 0.0);

struct StepResult {
  bool checked = false;
  Decision decision = Decision::kHold;
  BatchAllocation allocation;
  bool conservation_abandoned = false;
  std::vector<WorkerId> bmax_tightened;
};

/// Owns one control loop: smoothing, periodic checks, and the adjustment
/// log. Not thread-safe; give each loop its own instance.
class Controller {
 public:
  Controller(ControllerConfig config, BatchAllocation initial,
             std::optional<std::int64_t> target_global = std::nullopt);

  const ControllerConfig& config() const { return config_; }
  const ControllerState& state() const { return state_; }
  const BatchAllocation& current() const { return state_.current; }
  std::int64_t target_global() const { return state_.target_global; }
  BatchBounds bounds(const WorkerId& id) const;

  void observe(const std::map<WorkerId, double>& times);
  bool check_due() const;
  /// Runs one full adjustment check regardless of the window.
  StepResult check(std::int64_t iteration);
  /// observe() then check() when due. The trace must cover every live worker.
  StepResult step(const IterationTrace& trace);

  void force_check() { state_.force_check = true; }
  void reset_window();
  void set_target_global(std::int64_t target) { state_.target_global = target; }
  /// Lowers a worker's upper bound permanently.
  void tighten_max(const WorkerId& id, std::int64_t b_max);

  /// Adopts an allocation decided outside the loop (elasticity events).
  /// Records an adjustment when batches actually change.
  void adopt(const BatchAllocation& alloc, std::int64_t iteration,
             const std::string& reason);
  /// Membership changes that do not move any surviving batch.
  void remove_worker(const WorkerId& id);
  void add_worker(const WorkerId& id, std::int64_t batch);

 private:
  void record_adjustment(BatchAllocation next, std::int64_t iteration,
                         const std::string& reason);

  ControllerConfig config_;
  ControllerState state_;
};

}  // namespace hetbatch
