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

#include "hetbatch/controller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hetbatch/allocator.hpp"

namespace hetbatch {

void ControllerConfig::validate() const {
  if (!(deadband >= 0.0 && deadband < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "controller deadband must lie in [0,1)");
  }
  if (!(ewma_alpha > 0.0 && ewma_alpha <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "controller ewma_alpha must lie in (0,1]");
  }
  if (window < 1) throw Error(ErrorCode::kInvalidInput, "controller window must be >= 1");
  if (!(drop_tolerance >= 0.0 && drop_tolerance < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "controller drop_tolerance must lie in [0,1)");
  }
  auto check = [](const BatchBounds& b, const std::string& who) {
    if (b.min < 1 || b.max < b.min) {
      throw Error(ErrorCode::kInvalidInput, "invalid batch bounds for " + who);
    }
  };
  check(default_bounds, "default");
  for (const auto& [id, b] : bounds) check(b, "'" + id + "'");
}

BatchBounds ControllerConfig::bounds_for(const WorkerId& id) const {
  auto it = bounds.find(id);
  return it == bounds.end() ? default_bounds : it->second;
}

const char* to_string(Decision d) { return d == Decision::kAdjust ? "adjust" : "hold"; }

void ewma_update(ControllerState& state, const std::map<WorkerId, double>& times,
                 double alpha) {
  for (const auto& [id, t] : times) {
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw Error(ErrorCode::kInvalidMeasurement,
                  "non-positive iteration time for worker '" + id + "'");
    }
  }
  for (const auto& [id, t] : times) {
    auto [it, fresh] = state.ewma_times.try_emplace(id, t);
    if (!fresh) it->second = alpha * t + (1.0 - alpha) * it->second;
    ++state.ewma_samples[id];
  }
}

std::vector<double> propose_batches(const BatchAllocation& current,
                                    const std::map<WorkerId, double>& smoothed,
                                    std::optional<std::int64_t> conserve_target) {
  const auto ids = current.ids();
  const auto sizes = current.sizes();
  std::vector<double> mu(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = smoothed.find(ids[i]);
    if (it == smoothed.end() || !(it->second > 0.0)) {
      throw Error(ErrorCode::kInvalidState,
                  "no positive smoothed time for worker '" + ids[i] + "'");
    }
    mu[i] = it->second;
  }
  const double mean = std::accumulate(mu.begin(), mu.end(), 0.0) /
                      static_cast<double>(mu.size());
  std::vector<double> proposal(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    proposal[i] = static_cast<double>(sizes[i]) * mean / mu[i];
  }
  if (conserve_target) {
    const double sum = std::accumulate(proposal.begin(), proposal.end(), 0.0);
    const double scale = static_cast<double>(*conserve_target) / sum;
    for (auto& p : proposal) p *= scale;
  }
  return proposal;
}

BatchAllocation round_proposal(const BatchAllocation& current,
                               const std::vector<double>& proposal,
                               std::optional<std::int64_t> total) {
  const double sum = std::accumulate(proposal.begin(), proposal.end(), 0.0);
  const std::int64_t want =
      total ? *total
            : std::max<std::int64_t>(static_cast<std::int64_t>(proposal.size()),
                                     std::llround(sum));
  auto sizes = apportion(want, proposal);
  return BatchAllocation({current.ids().begin(), current.ids().end()}, std::move(sizes));
}

ClampResult clamp_bounds(const BatchAllocation& proposal, const BoundsMap& bounds,
                         const BatchBounds& default_bounds,
                         std::optional<std::int64_t> conserve_target) {
  const auto ids = proposal.ids();
  const auto n = ids.size();
  std::vector<BatchBounds> b(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = bounds.find(ids[i]);
    b[i] = it == bounds.end() ? default_bounds : it->second;
  }
  const std::vector<std::int64_t> original(proposal.sizes().begin(), proposal.sizes().end());
  std::vector<std::int64_t> values = original;

  if (!conserve_target) {
    for (std::size_t i = 0; i < n; ++i) values[i] = b[i].clamp(values[i]);
    return {BatchAllocation({ids.begin(), ids.end()}, std::move(values)), false};
  }

  const std::int64_t target = *conserve_target;
  std::int64_t lo_sum = 0, hi_sum = 0;
  bool hi_inf = false;
  for (const auto& x : b) {
    lo_sum += x.min;
    if (x.max == std::numeric_limits<std::int64_t>::max()) {
      hi_inf = true;
    } else {
      hi_sum += x.max;
    }
  }
  if (target <= lo_sum || (!hi_inf && target >= hi_sum)) {
    // Infeasible or degenerate: every worker sits on one of its bounds.
    const bool low = target <= lo_sum;
    for (std::size_t i = 0; i < n; ++i) values[i] = low ? b[i].min : b[i].max;
    const std::int64_t total = std::accumulate(values.begin(), values.end(), std::int64_t{0});
    return {BatchAllocation({ids.begin(), ids.end()}, std::move(values)), total != target};
  }

  // Water-fill: find the scale lambda with sum clamp(lambda * w_i) == target.
  // This is the fixed point of repeatedly clamping and redistributing the
  // residual in proportion to the original proposal.
  std::vector<double> w(original.begin(), original.end());
  auto clamped = [&](std::size_t i, double lambda) {
    const double lo = static_cast<double>(b[i].min);
    const double hi = static_cast<double>(b[i].max);
    return std::min(hi, std::max(lo, lambda * w[i]));
  };
  auto fill = [&](double lambda) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += clamped(i, lambda);
    return s;
  };
  std::vector<double> breaks;
  for (std::size_t i = 0; i < n; ++i) {
    breaks.push_back(static_cast<double>(b[i].min) / w[i]);
    if (b[i].max != std::numeric_limits<std::int64_t>::max()) {
      breaks.push_back(static_cast<double>(b[i].max) / w[i]);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  const double t = static_cast<double>(target);
  double seg_lo = 0.0;
  double seg_hi = -1.0;
  for (double bp : breaks) {
    if (fill(bp) >= t) {
      seg_hi = bp;
      break;
    }
    seg_lo = bp;
  }
  if (seg_hi < 0.0) seg_hi = std::max(seg_lo, 1.0) * 2.0 + t;  // past the last break
  const double mid = 0.5 * (seg_lo + seg_hi);
  double fixed = 0.0, free_w = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = mid * w[i];
    if (x <= static_cast<double>(b[i].min)) {
      fixed += static_cast<double>(b[i].min);
    } else if (x >= static_cast<double>(b[i].max)) {
      fixed += static_cast<double>(b[i].max);
    } else {
      free_w += w[i];
    }
  }
  const double lambda = free_w > 0.0 ? (t - fixed) / free_w : mid;

  // Integer rounding inside the bounds: floor, then hand out the remainder by
  // largest fractional part (ties: larger share, then higher index).
  std::vector<double> x(n), frac(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = clamped(i, lambda);
    auto f = static_cast<std::int64_t>(std::floor(x[i] + 1e-9));
    f = b[i].clamp(f);
    values[i] = f;
    frac[i] = x[i] - static_cast<double>(f);
    assigned += f;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    if (frac[a] != frac[c]) return frac[a] > frac[c];
    if (x[a] != x[c]) return x[a] > x[c];
    return a > c;
  });
  for (std::int64_t left = target - assigned; left > 0;) {
    bool gave = false;
    for (auto i : order) {
      if (left == 0) break;
      if (values[i] < b[i].max) {
        ++values[i];
        --left;
        gave = true;
      }
    }
    if (!gave) break;
  }
  for (std::int64_t extra = assigned - target; extra > 0;) {
    bool took = false;
    for (auto it = order.rbegin(); it != order.rend() && extra > 0; ++it) {
      if (values[*it] > b[*it].min) {
        --values[*it];
        --extra;
        took = true;
      }
    }
    if (!took) break;
  }
  const std::int64_t total = std::accumulate(values.begin(), values.end(), std::int64_t{0});
  return {BatchAllocation({ids.begin(), ids.end()}, std::move(values)), total != target};
}

Decision deadband_check(const BatchAllocation& old_alloc,
                        const BatchAllocation& proposed, double deadband) {
  if (old_alloc.size() != proposed.size()) {
    throw Error(ErrorCode::kInvalidInput, "deadband check over different worker sets");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < old_alloc.size(); ++i) {
    const auto& id = old_alloc.ids()[i];
    const double before = static_cast<double>(old_alloc.sizes()[i]);
    const double after = static_cast<double>(proposed.at(id));
    worst = std::max(worst, std::abs(after - before) / before);
  }
  return worst > deadband ? Decision::kAdjust : Decision::kHold;
}

bool update_bmax_on_drop(BatchBounds& bounds, std::int64_t old_batch,
                         std::int64_t new_batch, double old_throughput,
                         double new_throughput, double tolerance) {
  if (new_batch <= old_batch) return false;
  if (!(new_throughput < old_throughput * (1.0 - tolerance))) return false;
  bounds.max = std::max(bounds.min, std::min(bounds.max, old_batch));
  return true;
}

Controller::Controller(ControllerConfig config, BatchAllocation initial,
                       std::optional<std::int64_t> target_global)
    : config_(std::move(config)) {
  config_.validate();
  if (initial.empty()) {
    throw Error(ErrorCode::kInvalidInput, "controller needs at least one worker");
  }
  state_.target_global = target_global.value_or(initial.global());
  for (const auto& id : initial.ids()) state_.bounds[id] = config_.bounds_for(id);
  state_.current = std::move(initial);
}

BatchBounds Controller::bounds(const WorkerId& id) const {
  auto it = state_.bounds.find(id);
  return it == state_.bounds.end() ? config_.bounds_for(id) : it->second;
}

void Controller::observe(const std::map<WorkerId, double>& times) {
  for (const auto& [id, t] : times) {
    if (!state_.current.contains(id)) {
      throw Error(ErrorCode::kInvalidState, "time reported for unknown worker '" + id + "'");
    }
  }
  ewma_update(state_, times, config_.ewma_alpha);
  ++state_.samples_since_check;
}

bool Controller::check_due() const {
  return state_.force_check || state_.samples_since_check >= config_.window;
}

StepResult Controller::check(std::int64_t iteration) {
  StepResult r;
  r.allocation = state_.current;
  for (const auto& id : state_.current.ids()) {
    if (!state_.ewma_times.count(id)) {
      // Not every worker has reported since the last reset; try again later.
      state_.force_check = true;
      return r;
    }
  }
  r.checked = true;
  state_.samples_since_check = 0;
  state_.force_check = false;

  if (config_.tighten_bmax_on_drop) {
    for (const auto& [id, pending] : state_.pending_increase) {
      if (!state_.current.contains(id) || state_.current.at(id) != pending.new_batch) continue;
      const double now = static_cast<double>(pending.new_batch) / state_.ewma_times.at(id);
      state_.throughput_history[id].push_back({pending.new_batch, now});
      if (update_bmax_on_drop(state_.bounds[id], pending.old_batch, pending.new_batch,
                              pending.old_throughput, now, config_.drop_tolerance)) {
        r.bmax_tightened.push_back(id);
      }
    }
  }
  state_.pending_increase.clear();

  const std::optional<std::int64_t> target =
      config_.conserve_global ? std::optional(state_.target_global) : std::nullopt;
  BatchAllocation rounded = state_.current;
  if (state_.current.size() > 1) {
    const auto proposal = propose_batches(state_.current, state_.ewma_times, target);
    rounded = round_proposal(state_.current, proposal, target);
  }
  auto clamped = clamp_bounds(rounded, state_.bounds, config_.default_bounds, target);
  if (clamped.conservation_abandoned) ++state_.conservation_abandoned;
  r.conservation_abandoned = clamped.conservation_abandoned;

  bool out_of_bounds = false;
  for (const auto& id : state_.current.ids()) {
    out_of_bounds = out_of_bounds || !bounds(id).contains(state_.current.at(id));
  }
  r.decision = deadband_check(state_.current, clamped.allocation, config_.deadband);
  if (out_of_bounds && clamped.allocation != state_.current) r.decision = Decision::kAdjust;
  if (r.decision == Decision::kAdjust) {
    record_adjustment(clamped.allocation, iteration, out_of_bounds ? "bounds" : "controller");
  }
  r.allocation = state_.current;
  return r;
}

StepResult Controller::step(const IterationTrace& trace) {
  for (const auto& id : state_.current.ids()) {
    if (!trace.per_worker_time.count(id)) {
      throw Error(ErrorCode::kInvalidState,
                  "iteration " + std::to_string(trace.iteration) +
                      " has no time for live worker '" + id + "'");
    }
  }
  observe(trace.per_worker_time);
  if (!check_due()) {
    StepResult r;
    r.allocation = state_.current;
    return r;
  }
  return check(trace.iteration);
}

void Controller::reset_window() {
  state_.ewma_times.clear();
  state_.ewma_samples.clear();
  state_.samples_since_check = 0;
}

void Controller::tighten_max(const WorkerId& id, std::int64_t b_max) {
  if (!state_.bounds.count(id)) state_.bounds[id] = config_.bounds_for(id);
  auto& b = state_.bounds[id];
  b.max = std::max(b.min, std::min(b.max, b_max));
}

void Controller::adopt(const BatchAllocation& alloc, std::int64_t iteration,
                       const std::string& reason) {
  for (const auto& id : alloc.ids()) {
    if (!state_.bounds.count(id)) state_.bounds[id] = config_.bounds_for(id);
  }
  if (alloc == state_.current) {
    reset_window();
    return;
  }
  record_adjustment(alloc, iteration, reason);
}

void Controller::remove_worker(const WorkerId& id) {
  state_.current.erase(id);
  state_.ewma_times.erase(id);
  state_.ewma_samples.erase(id);
  state_.pending_increase.erase(id);
}

void Controller::add_worker(const WorkerId& id, std::int64_t batch) {
  state_.current.append(id, batch);
  if (!state_.bounds.count(id)) state_.bounds[id] = config_.bounds_for(id);
}

void Controller::record_adjustment(BatchAllocation next, std::int64_t iteration,
                                   const std::string& reason) {
  state_.pending_increase.clear();
  for (const auto& id : next.ids()) {
    if (!state_.current.contains(id)) continue;
    const auto before = state_.current.at(id);
    const auto after = next.at(id);
    auto mu = state_.ewma_times.find(id);
    if (mu == state_.ewma_times.end()) continue;
    const double thpt = static_cast<double>(before) / mu->second;
    state_.throughput_history[id].push_back({before, thpt});
    if (after > before) state_.pending_increase[id] = {before, thpt, after};
  }
  state_.adjustments.push_back({iteration, state_.current, next, reason});
  state_.current = std::move(next);
  state_.last_adjust_iter = iteration;
  reset_window();
}

}  // namespace hetbatch
