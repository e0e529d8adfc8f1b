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

#include "hetbatch/simkernel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <set>

#include "rng.hpp"

namespace hetbatch {

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kPreempt: return "preempt";
    case EventKind::kDeflate: return "deflate";
    case EventKind::kReinflate: return "reinflate";
    case EventKind::kAdd: return "add";
  }
  return "preempt";
}

const char* to_string(InitialAllocKind kind) {
  switch (kind) {
    case InitialAllocKind::kUniform: return "uniform";
    case InitialAllocKind::kStatic: return "static";
    case InitialAllocKind::kExplicit: return "explicit";
  }
  return "uniform";
}

void ClusterEvent::validate() const {
  if (!(at >= 0.0) || !std::isfinite(at)) {
    throw Error(ErrorCode::kConfig, "event time must be a finite value >= 0");
  }
  if (kind == EventKind::kAdd) {
    added.validate();
    return;
  }
  if (worker.empty()) throw Error(ErrorCode::kConfig, "event has no target worker");
  if (kind == EventKind::kDeflate && !(factor > 0.0 && factor < 1.0)) {
    throw Error(ErrorCode::kConfig, "deflate factor must lie in (0,1)");
  }
}

BatchAllocation make_initial_allocation(const ClusterSpec& cluster,
                                        const InitialAllocation& init) {
  cluster.validate();
  std::vector<WorkerId> ids;
  for (const auto& w : cluster.workers) ids.push_back(w.id);
  switch (init.kind) {
    case InitialAllocKind::kUniform:
      if (init.b0 < 1) throw Error(ErrorCode::kConfig, "initial b0 must be >= 1");
      return BatchAllocation(std::move(ids),
                             std::vector<std::int64_t>(cluster.workers.size(), init.b0));
    case InitialAllocKind::kStatic:
      return static_allocation(cluster, init.b0, init.policy);
    case InitialAllocKind::kExplicit:
      if (init.sizes.size() != cluster.workers.size()) {
        throw Error(ErrorCode::kConfig, "explicit allocation needs one size per worker");
      }
      return BatchAllocation(std::move(ids), init.sizes);
  }
  throw Error(ErrorCode::kConfig, "unknown initial allocation kind");
}

const PerfParams& Scenario::perf_for(const WorkerId& id) const {
  auto it = perf.find(id);
  return it == perf.end() ? default_perf : it->second;
}

void Scenario::validate() const {
  try {
    cluster.validate();
    default_perf.validate();
    for (const auto& [id, p] : perf) p.validate();
    controller.validate();
    policy.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  if (!(restart_cost >= 0.0) || !(sync_cost >= 0.0)) {
    throw Error(ErrorCode::kConfig, "restart_cost and sync_cost must be >= 0");
  }
  if (horizon.iterations < 0 || !(horizon.seconds >= 0.0)) {
    throw Error(ErrorCode::kConfig, "horizon limits must be >= 0");
  }
  if (horizon.iterations == 0 && horizon.seconds == 0.0) {
    throw Error(ErrorCode::kConfig, "horizon needs an iteration or time limit");
  }
  if (!(asp_check_seconds > 0.0)) {
    throw Error(ErrorCode::kConfig, "asp_check_seconds must be > 0");
  }
  try {
    make_initial_allocation(cluster, initial);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }

  std::set<WorkerId> known;
  for (const auto& w : cluster.workers) known.insert(w.id);
  double last = 0.0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& ev = events[i];
    const std::string where = "events[" + std::to_string(i) + "]: ";
    try {
      ev.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, where + e.what());
    }
    if (ev.at < last) throw Error(ErrorCode::kConfig, where + "events must be sorted by time");
    last = ev.at;
    if (ev.kind == EventKind::kAdd) {
      if (!known.insert(ev.added.id).second) {
        throw Error(ErrorCode::kConfig, where + "worker '" + ev.added.id + "' already exists");
      }
    } else if (!known.count(ev.worker)) {
      throw Error(ErrorCode::kConfig, where + "unknown worker '" + ev.worker + "'");
    }
  }
}

namespace {

class Simulation {
 public:
  Simulation(const Scenario& scenario, const SimCallbacks& callbacks)
      : sc_(scenario),
        cb_(callbacks),
        rng_(scenario.seed),
        live_(scenario.cluster),
        ctl_(scenario.controller, make_initial_allocation(scenario.cluster, scenario.initial)) {
    result_.mode = live_.sync_mode;
    result_.initial_alloc = ctl_.current();
  }

  SimResult run() {
    if (live_.sync_mode == SyncMode::kBsp) {
      run_bsp();
    } else {
      run_asp();
    }
    finish();
    return std::move(result_);
  }

 private:
  // --- shared machinery -------------------------------------------------

  ElasticContext context() const {
    ElasticContext ctx;
    ctx.live = live_;
    ctx.alloc = ctl_.current();
    ctx.target_global = ctl_.target_global();
    ctx.deflation = deflation_;
    ctx.capacity_policy = sc_.initial.policy;
    ctx.deadband = sc_.controller.deadband;
    return ctx;
  }

  void charge_restart() {
    now_ += sc_.restart_cost;
    overhead_ += sc_.restart_cost;
    pending_overhead_ += sc_.restart_cost;
    ++result_.restarts;
  }

  double noise_factor(const PerfParams& p) {
    switch (p.noise.kind) {
      case NoiseKind::kNone: return 1.0;
      case NoiseKind::kUniform: return 1.0 + p.noise.amplitude * (2.0 * rng_.uniform() - 1.0);
      case NoiseKind::kLognormal: return std::exp(p.noise.amplitude * rng_.normal());
    }
    return 1.0;
  }

  // Seconds for one mini-batch on `id`, or nullopt after handling an
  // out-of-memory failure (the caller retries with the clamped allocation).
  std::optional<double> compute_time(const WorkerId& id) {
    const auto& spec = live_.worker(id);
    const auto& perf = sc_.perf_for(id);
    double t = 0.0;
    try {
      t = iteration_time(spec, perf, ctl_.current().at(id), deflation_.of(id));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kOutOfMemory) throw;
      handle_oom(spec, e.what());
      return std::nullopt;
    }
    return t * noise_factor(perf);
  }

  void handle_oom(const WorkerSpec& spec, const std::string& what) {
    ctl_.tighten_max(spec.id, spec.mem_capacity);
    const auto target = sc_.controller.conserve_global
                            ? std::optional(ctl_.target_global())
                            : std::nullopt;
    auto clamped = clamp_bounds(ctl_.current(), ctl_.state().bounds,
                                sc_.controller.default_bounds, target);
    ctl_.adopt(clamped.allocation, iter_, "oom");
    charge_restart();
    result_.notes.push_back("iteration " + std::to_string(iter_) + ": " + what +
                            "; batch clamped to memory capacity");
  }

  void note_step(const StepResult& r, std::int64_t iteration) {
    for (const auto& id : r.bmax_tightened) {
      result_.notes.push_back("iteration " + std::to_string(iteration) + ": b_max of '" + id +
                              "' lowered to " + std::to_string(ctl_.bounds(id).max) +
                              " after a throughput drop");
    }
    if (r.conservation_abandoned) {
      result_.notes.push_back("iteration " + std::to_string(iteration) +
                              ": bounds saturated, global batch not conserved");
    }
  }

  bool event_due(double t) const {
    return next_event_ < sc_.events.size() && sc_.events[next_event_].at <= t;
  }

  void emit_action(ActionRecord rec) {
    if (cb_.on_action) cb_.on_action(rec);
    result_.actions.push_back(std::move(rec));
  }

  void apply_event(std::size_t idx) {
    const auto& ev = sc_.events[idx];
    ActionRecord rec;
    rec.event_id = static_cast<std::int64_t>(idx);
    rec.at = ev.at;
    rec.fired_at = now_;
    rec.iteration = iter_;
    rec.event = ev.kind;
    rec.worker = ev.kind == EventKind::kAdd ? ev.added.id : ev.worker;

    const auto ctx = context();
    Action a;
    try {
      switch (ev.kind) {
        case EventKind::kPreempt:
          a = on_preemption(ev.worker, ctx, sc_.policy);
          break;
        case EventKind::kDeflate:
          a = on_deflation(ev.worker, ev.factor, ctx);
          break;
        case EventKind::kReinflate:
          a = on_deflation(ev.worker, 1.0, ctx);
          break;
        case EventKind::kAdd:
          a = on_addition(ev.added, ctx, sc_.policy);
          break;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kClusterExhausted) {
        rec.outcome = "cluster_exhausted";
        emit_action(std::move(rec));
      }
      throw;
    }

    deflation_ = a.deflation;
    switch (ev.kind) {
      case EventKind::kPreempt: {
        const double cap_before = total_capacity(ctx);
        auto& ws = live_.workers;
        ws.erase(std::remove_if(ws.begin(), ws.end(),
                                [&](const WorkerSpec& w) { return w.id == ev.worker; }),
                 ws.end());
        slots_.erase(ev.worker);
        ctl_.remove_worker(ev.worker);
        ctl_.set_target_global(a.target_global);
        if (a.decision == Decision::kAdjust) {
          ctl_.adopt(a.allocation, iter_, "preemption");
        } else {
          ctl_.reset_window();
        }
        if (a.restart) charge_restart();
        if (a.rewind) iter_ = last_checkpoint(iter_, sc_.policy.checkpoint_interval);
        if (sc_.policy.mode == GlobalBatchMode::kConserving && a.decision == Decision::kAdjust) {
          start_monitor(rec.event_id, cap_before);
        }
        break;
      }
      case EventKind::kDeflate:
      case EventKind::kReinflate:
        ctl_.reset_window();
        ctl_.force_check();
        break;
      case EventKind::kAdd:
        live_.workers.push_back(ev.added);
        ctl_.set_target_global(a.target_global);
        ctl_.adopt(a.allocation, iter_, "addition");
        charge_restart();
        break;
    }
    const bool restart = a.restart;
    rec.outcome = to_string(a.kind);
    rec.action = std::move(a);
    emit_action(std::move(rec));
    // A kill-restart discards every in-flight ASP mini-batch.
    if (live_.sync_mode == SyncMode::kAsp && restart) restart_all();
  }

  // --- global batch monitoring ------------------------------------------

  struct Monitor {
    std::int64_t event_id = 0;
    std::vector<IterationTrace> before;
    std::vector<IterationTrace> after;
    double cap_before = 0.0;
    double cap_after = 0.0;
    std::int64_t scaled_target = 0;
  };

  void start_monitor(std::int64_t event_id, double cap_before) {
    Monitor m;
    m.event_id = event_id;
    m.before.assign(history_.begin(), history_.end());
    m.cap_before = cap_before;
    m.cap_after = total_capacity(context());
    m.scaled_target = std::max<std::int64_t>(
        static_cast<std::int64_t>(live_.workers.size()),
        std::llround(static_cast<double>(ctl_.target_global()) * m.cap_after / cap_before));
    monitor_ = std::move(m);
  }

  void record_history(const IterationTrace& row) {
    history_.push_back(row);
    while (history_.size() > static_cast<std::size_t>(sc_.policy.monitor_window)) {
      history_.pop_front();
    }
    if (!monitor_) return;
    monitor_->after.push_back(row);
    if (monitor_->after.size() < static_cast<std::size_t>(sc_.policy.monitor_window)) return;

    Monitor m = std::move(*monitor_);
    monitor_.reset();
    MonitorInput in;
    in.before = m.before;
    in.after = m.after;
    in.capacity_before = m.cap_before;
    in.capacity_after = m.cap_after;
    in.scaled_target = m.scaled_target;
    const auto scaled = monitor_and_scale_down(in, sc_.policy);
    if (!scaled || *scaled >= ctl_.target_global()) return;

    ctl_.set_target_global(*scaled);
    const auto& cur = ctl_.current();
    std::vector<double> weights(cur.sizes().begin(), cur.sizes().end());
    BatchAllocation next({cur.ids().begin(), cur.ids().end()}, apportion(*scaled, weights));
    ActionRecord rec;
    rec.event_id = m.event_id;
    rec.at = now_;
    rec.fired_at = now_;
    rec.iteration = iter_;
    rec.event = EventKind::kPreempt;
    rec.outcome = to_string(ActionKind::kScaleDown);
    rec.action.kind = ActionKind::kScaleDown;
    rec.action.restart = true;
    rec.action.decision = Decision::kAdjust;
    rec.action.allocation = next;
    rec.action.target_global = *scaled;
    rec.action.exact_target = static_cast<double>(*scaled);
    rec.action.deflation = deflation_;
    rec.action.detail = "throughput drop after conserving readjustment";
    ctl_.adopt(next, iter_, "scale_down");
    charge_restart();
    emit_action(std::move(rec));
    if (live_.sync_mode == SyncMode::kAsp) restart_all();
  }

  void emit_row(IterationTrace row) {
    row.overhead_seconds += pending_overhead_;
    pending_overhead_ = 0.0;
    if (cb_.on_trace) cb_.on_trace(row);
    result_.traces.push_back(row);
    record_history(result_.traces.back());
  }

  // --- BSP ----------------------------------------------------------------

  void run_bsp() {
    const auto& h = sc_.horizon;
    while (true) {
      if (h.iterations > 0 && iter_ >= h.iterations) break;
      if (h.seconds > 0.0 && now_ >= h.seconds) break;
      while (event_due(now_)) apply_event(next_event_++);

      std::map<WorkerId, double> times;
      bool retry = false;
      for (const auto& id : ctl_.current().ids()) {
        auto t = compute_time(id);
        if (!t) {
          retry = true;
          break;
        }
        times[id] = *t;
      }
      if (retry) continue;
      double slowest = 0.0;
      for (const auto& [id, t] : times) slowest = std::max(slowest, t);
      const double makespan = slowest + sc_.sync_cost;

      // A preemption inside the round loses the in-flight work.
      if (next_event_ < sc_.events.size()) {
        const auto& ev = sc_.events[next_event_];
        if (ev.kind == EventKind::kPreempt && ev.at < now_ + makespan) {
          idle_ += ev.at - now_;
          now_ = ev.at;
          continue;
        }
      }

      now_ += makespan;
      IterationTrace row;
      row.iteration = iter_;
      row.round = round_++;
      row.time_end = now_;
      row.per_worker_time = std::move(times);
      row.makespan = makespan;
      row.allocation = ctl_.current();
      ++iter_;
      if (sc_.controller_enabled) {
        const auto r = ctl_.step(row);
        note_step(r, row.iteration);
        if (r.decision == Decision::kAdjust) {
          row.adjustment_made = true;
          charge_restart();
        }
      }
      emit_row(std::move(row));
    }
  }

  // --- ASP ----------------------------------------------------------------

  struct Slot {
    double done = 0.0;
    double compute = 0.0;
    std::int64_t fetch_version = 0;
  };

  // Starts (or restarts) a worker's next mini-batch at the current time.
  bool schedule(const WorkerId& id) {
    auto t = compute_time(id);
    if (!t) return false;
    auto& s = slots_[id];
    s.compute = *t;
    s.done = now_ + *t + sc_.sync_cost;
    s.fetch_version = version_;
    return true;
  }

  void restart_all() {
    slots_.clear();
    // An out-of-memory clamp restarts everyone again, so loop until clean.
    for (bool clean = false; !clean;) {
      clean = true;
      slots_.clear();
      for (const auto& id : ctl_.current().ids()) {
        if (!schedule(id)) {
          clean = false;
          break;
        }
      }
    }
  }

  void run_asp() {
    const auto& h = sc_.horizon;
    while (event_due(now_)) apply_event(next_event_++);
    restart_all();
    double last_check = 0.0;
    while (true) {
      if (h.iterations > 0 && iter_ >= h.iterations) break;
      if (h.seconds > 0.0 && now_ >= h.seconds) break;

      // Earliest completion, ties broken by worker id.
      auto next = std::min_element(slots_.begin(), slots_.end(), [](const auto& a, const auto& b) {
        if (a.second.done != b.second.done) return a.second.done < b.second.done;
        return a.first < b.first;
      });
      if (event_due(next->second.done)) {
        now_ = std::max(now_, sc_.events[next_event_].at);
        apply_event(next_event_++);
        continue;
      }

      const WorkerId id = next->first;
      const Slot slot = next->second;
      now_ = slot.done;
      IterationTrace row;
      row.iteration = iter_;
      row.round = round_++;
      row.time_end = now_;
      row.per_worker_time[id] = slot.compute;
      row.makespan = slot.compute + sc_.sync_cost;
      row.allocation = ctl_.current();
      const std::int64_t staleness = version_ - slot.fetch_version;
      row.staleness[id] = staleness;
      ++result_.staleness_histogram[id][staleness];
      ++version_;
      ++iter_;

      bool restarted = false;
      if (sc_.controller_enabled) {
        ctl_.observe(row.per_worker_time);
        if (ctl_.state().force_check || now_ >= last_check + sc_.asp_check_seconds) {
          const auto r = ctl_.check(row.iteration);
          note_step(r, row.iteration);
          if (r.checked) last_check = now_;
          if (r.decision == Decision::kAdjust) {
            row.adjustment_made = true;
            charge_restart();
            restart_all();
            restarted = true;
          }
        }
      }
      if (!restarted && !schedule(id)) restart_all();
      emit_row(std::move(row));
    }
  }

  void finish() {
    result_.total_time = now_;
    result_.overhead_time = overhead_;
    result_.idle_time = idle_;
    result_.overhead_fraction = now_ > 0.0 ? overhead_ / now_ : 0.0;
    result_.iterations_completed = iter_;
    result_.final_alloc = ctl_.current();
    result_.final_target_global = ctl_.target_global();
    result_.adjustments = ctl_.state().adjustments;
  }

  const Scenario& sc_;
  const SimCallbacks& cb_;
  detail::Rng rng_;
  ClusterSpec live_;
  DeflationState deflation_;
  Controller ctl_;
  SimResult result_;

  double now_ = 0.0;
  double overhead_ = 0.0;
  double idle_ = 0.0;
  double pending_overhead_ = 0.0;
  std::int64_t iter_ = 0;
  std::int64_t round_ = 0;
  std::int64_t version_ = 0;
  std::size_t next_event_ = 0;
  std::map<WorkerId, Slot> slots_;
  std::deque<IterationTrace> history_;
  std::optional<Monitor> monitor_;
};

}  // namespace

SimResult simulate(const Scenario& scenario, const SimCallbacks& callbacks) {
  scenario.validate();
  Simulation sim(scenario, callbacks);
  return sim.run();
}

OverheadReport overhead_report(const SimResult& result) {
  OverheadReport r;
  r.adjustments = static_cast<std::int64_t>(result.adjustments.size());
  r.overhead_fraction =
      result.total_time > 0.0 ? result.overhead_time / result.total_time : 0.0;
  return r;
}

StalenessStats staleness_stats(const SimResult& result) {
  if (result.mode != SyncMode::kAsp) {
    throw Error(ErrorCode::kInvalidMode, "staleness statistics need an ASP run");
  }
  StalenessStats s;
  s.histogram = result.staleness_histogram;
  for (const auto& [id, hist] : s.histogram) {
    double total = 0.0;
    double count = 0.0;
    for (const auto& [value, n] : hist) {
      total += static_cast<double>(value) * static_cast<double>(n);
      count += static_cast<double>(n);
    }
    const double mean = count > 0.0 ? total / count : 0.0;
    s.mean[id] = mean;
    s.max_mean = std::max(s.max_mean, mean);
  }
  return s;
}

std::vector<AspCommit> asp_schedule(const SimResult& result) {
  if (result.mode != SyncMode::kAsp) {
    throw Error(ErrorCode::kInvalidMode, "commit schedule needs an ASP run");
  }
  std::vector<AspCommit> out;
  out.reserve(result.traces.size());
  for (const auto& row : result.traces) {
    for (const auto& [id, s] : row.staleness) {
      out.push_back({id, row.iteration - s, row.allocation.at(id)});
    }
  }
  return out;
}

}  // namespace hetbatch
