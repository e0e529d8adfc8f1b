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

#include <numeric>
#include <set>

#include "doctest.h"
#include "hetbatch/simkernel.hpp"
#include "oracles.hpp"

using namespace hetbatch;

namespace {

Scenario cluster_of(std::vector<int> cores, SyncMode mode = SyncMode::kBsp) {
  Scenario s;
  for (std::size_t i = 0; i < cores.size(); ++i) {
    s.cluster.workers.push_back(
        {WorkerId(1, static_cast<char>('a' + i)), cores[i], static_cast<double>(cores[i])});
  }
  s.cluster.sync_mode = mode;
  s.default_perf = ideal_linear_params();
  s.initial.kind = InitialAllocKind::kUniform;
  s.initial.b0 = 128;
  s.horizon.iterations = 200;
  return s;
}

std::vector<std::int64_t> sizes(const BatchAllocation& a) {
  return {a.sizes().begin(), a.sizes().end()};
}

ClusterEvent event(double at, EventKind kind, WorkerId w, double factor = 1.0) {
  ClusterEvent e;
  e.at = at;
  e.kind = kind;
  e.worker = std::move(w);
  e.factor = factor;
  return e;
}

void check_bsp_invariants(const Scenario& s, const SimResult& r) {
  double makespans = 0.0;
  for (const auto& row : r.traces) {
    double slowest = 0.0;
    for (const auto& [id, t] : row.per_worker_time) slowest = std::max(slowest, t);
    CHECK(row.makespan == doctest::Approx(slowest + s.sync_cost));
    CHECK(row.staleness.empty());
    makespans += row.makespan;
  }
  CHECK(r.total_time == doctest::Approx(makespans + r.overhead_time + r.idle_time));
  CHECK(r.total_time >= makespans);
  if (r.total_time > 0) CHECK(r.overhead_fraction == doctest::Approx(r.overhead_time / r.total_time));
}

}  // namespace

TEST_SUITE("simkernel") {
  TEST_CASE("homogeneous cluster runs without adjustments") {
    auto s = cluster_of({10, 10, 10});
    s.horizon.iterations = 500;
    const auto r = simulate(s);
    CHECK(r.adjustments.empty());
    CHECK(r.traces.size() == 500);
    for (const auto& row : r.traces) CHECK(row.makespan == doctest::Approx(12.8));
    CHECK(r.overhead_fraction == 0.0);
    check_bsp_invariants(s, r);
  }

  TEST_CASE("straggler makespan ratio matches the closed form") {
    auto uni = cluster_of({3, 9, 18});
    uni.controller_enabled = false;
    auto stat = uni;
    stat.initial.kind = InitialAllocKind::kStatic;
    const auto ru = simulate(uni);
    const auto rs = simulate(stat);
    const std::vector<double> caps{3, 9, 18};
    const double mu = oracle::linear_makespan({128, 128, 128}, caps);
    const double ms = oracle::linear_makespan(sizes(rs.final_alloc), caps);
    CHECK(ru.traces[5].makespan == doctest::Approx(mu));
    CHECK(rs.traces[5].makespan == doctest::Approx(ms));
    const double ratio = ru.traces[5].makespan / rs.traces[5].makespan;
    CHECK(ratio == doctest::Approx((128.0 / 3) / (384.0 / 30)).epsilon(0.01));
  }

  TEST_CASE("post-convergence makespan equals global batch over capacity") {
    auto s = cluster_of({3, 9, 18});
    s.sync_cost = 0.5;
    s.horizon.iterations = 300;
    const auto r = simulate(s);
    REQUIRE(r.adjustments.size() == 1);
    const double ideal = 384.0 / 30.0 + s.sync_cost;
    const auto bmin = *std::min_element(r.final_alloc.sizes().begin(), r.final_alloc.sizes().end());
    CHECK(std::abs(r.traces.back().makespan - ideal) / ideal <= 1.0 / static_cast<double>(bmin));
    check_bsp_invariants(s, r);
  }

  TEST_CASE("overhead accounting") {
    auto none = cluster_of({8, 8});
    CHECK(overhead_report(simulate(none)).overhead_fraction == 0.0);

    auto s = cluster_of({3, 9, 18});
    s.restart_cost = 60;
    s.horizon.iterations = 0;
    s.horizon.seconds = 7200;
    const auto r = simulate(s);
    const auto rep = overhead_report(r);
    CHECK(rep.adjustments == 1);
    CHECK(r.overhead_time == 60.0);
    CHECK(rep.overhead_fraction == doctest::Approx(60.0 / r.total_time));
    CHECK(rep.overhead_fraction == doctest::Approx(60.0 / 7200.0).epsilon(0.01));
    check_bsp_invariants(s, r);
  }

  TEST_CASE("deflation and reinflation move the allocation and back") {
    auto s = cluster_of({16, 16, 16});
    s.horizon.iterations = 400;
    s.restart_cost = 0;
    s.events = {event(100 * 8.0, EventKind::kDeflate, "a", 0.25),
                event(3000, EventKind::kReinflate, "a")};
    const auto r = simulate(s);
    REQUIRE(r.adjustments.size() == 2);
    CHECK(sizes(r.adjustments[0].after) == std::vector<std::int64_t>{42, 171, 171});
    CHECK(sizes(r.adjustments[1].after) == std::vector<std::int64_t>{128, 128, 128});
    CHECK(r.actions.size() == 2);
    CHECK(r.actions[0].action.kind == ActionKind::kForceCheck);
    check_bsp_invariants(s, r);
  }

  TEST_CASE("a tiny deflation stays inside the deadband") {
    auto s = cluster_of({50, 50, 50});
    s.events = {event(100, EventKind::kDeflate, "a", 0.98)};
    const auto r = simulate(s);
    CHECK(r.adjustments.empty());
    CHECK(r.actions.size() == 1);
  }

  TEST_CASE("bsp preemption rewinds to the last checkpoint") {
    auto s = cluster_of({8, 8, 8});
    s.policy.checkpoint_interval = 10;
    s.horizon.iterations = 60;
    s.restart_cost = 30;
    // Rounds take 16 s; the event lands inside round 25.
    s.events = {event(16.0 * 25 + 3, EventKind::kPreempt, "c")};
    const auto r = simulate(s);
    REQUIRE(r.actions.size() == 1);
    CHECK(r.actions[0].action.rewind);
    CHECK(r.actions[0].iteration == 25);
    // The next row restarts from iteration 20 with the survivors.
    const auto it = std::find_if(r.traces.begin(), r.traces.end(),
                                 [](const IterationTrace& t) { return t.allocation.size() == 2; });
    REQUIRE(it != r.traces.end());
    CHECK(it->iteration == 20);
    CHECK(sizes(it->allocation) == std::vector<std::int64_t>{192, 192});
    CHECK(r.idle_time == doctest::Approx(3.0));
    CHECK(r.iterations_completed == 60);
    check_bsp_invariants(s, r);
  }

  TEST_CASE("every event yields exactly one action and fires no earlier than its time") {
    auto s = cluster_of({4, 8, 12, 16});
    s.horizon.iterations = 400;
    ClusterEvent add;
    add.at = 900;
    add.kind = EventKind::kAdd;
    add.added = {"e", 6, 6.0};
    s.events = {event(100, EventKind::kDeflate, "d", 0.5), event(300, EventKind::kPreempt, "b"),
                event(500, EventKind::kReinflate, "d"), add, event(1500, EventKind::kPreempt, "a")};
    std::vector<std::int64_t> seen;
    std::vector<double> row_ends;
    SimCallbacks cb;
    cb.on_action = [&](const ActionRecord& a) { seen.push_back(a.event_id); };
    const auto r = simulate(s, cb);
    std::map<std::int64_t, int> primary;
    for (const auto& a : r.actions) {
      if (a.action.kind != ActionKind::kScaleDown) ++primary[a.event_id];
      CHECK(a.fired_at >= a.at);
    }
    for (std::int64_t i = 0; i < 5; ++i) CHECK(primary[i] == 1);
    CHECK(seen.size() == r.actions.size());
    // Rows before an event's firing never carry its effects.
    for (const auto& a : r.actions) {
      for (const auto& row : r.traces) {
        if (row.time_end <= a.at && a.event == EventKind::kPreempt) {
          CHECK(row.allocation.contains(a.worker));
        }
      }
    }
    check_bsp_invariants(s, r);
  }

  TEST_CASE("exhausting the cluster throws after streaming rows") {
    auto s = cluster_of({4, 4});
    s.horizon.iterations = 100000;
    s.events = {event(100, EventKind::kPreempt, "a"), event(200, EventKind::kPreempt, "b")};
    std::size_t rows = 0;
    std::vector<std::string> outcomes;
    SimCallbacks cb;
    cb.on_trace = [&](const IterationTrace&) { ++rows; };
    cb.on_action = [&](const ActionRecord& a) { outcomes.push_back(a.outcome); };
    try {
      (void)simulate(s, cb);
      FAIL("expected exhaustion");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kClusterExhausted);
    }
    CHECK(rows > 0);
    REQUIRE(outcomes.size() == 2);
    CHECK(outcomes.back() == "cluster_exhausted");
  }

  TEST_CASE("gpu out of memory clamps the batch and tightens b_max") {
    Scenario s = cluster_of({8});
    s.cluster.workers = {{"cpu", 8, 8.0}, {"gpu", 1, 24.0, 200, WorkerKind::kGpu}};
    s.initial.kind = InitialAllocKind::kStatic;
    s.initial.b0 = 256;
    const auto r = simulate(s);
    CHECK(r.final_alloc.at("gpu") <= 200);
    CHECK(r.final_alloc.global() == 512);
    REQUIRE_FALSE(r.notes.empty());
    CHECK(r.notes.front().find("memory") != std::string::npos);
    CHECK(r.adjustments.front().reason == "oom");
    for (const auto& row : r.traces) CHECK(row.allocation.at("gpu") <= 200);
  }

  TEST_CASE("conserving overload triggers a scale down to the scaled target") {
    auto s = cluster_of({8, 8, 8});
    for (auto& w : s.cluster.workers) w.mem_capacity = 150;
    s.default_perf.cpu_decline = 0.01;
    s.policy.mode = GlobalBatchMode::kConserving;
    s.policy.monitor_window = 10;
    s.policy.scale_down_trigger = 0.1;
    s.horizon.iterations = 200;
    s.events = {event(16.0 * 50, EventKind::kPreempt, "c")};
    const auto r = simulate(s);
    CHECK(r.final_target_global == 256);
    CHECK(sizes(r.final_alloc) == std::vector<std::int64_t>{128, 128});
    const auto sd = std::find_if(r.actions.begin(), r.actions.end(), [](const ActionRecord& a) {
      return a.action.kind == ActionKind::kScaleDown;
    });
    REQUIRE(sd != r.actions.end());
    CHECK(sd->event_id == 0);
  }

  TEST_CASE("no scale down without a throughput drop") {
    auto s = cluster_of({8, 8, 8});
    s.policy.monitor_window = 10;
    s.events = {event(16.0 * 50, EventKind::kPreempt, "c")};
    const auto r = simulate(s);
    CHECK(r.final_target_global == 384);
    CHECK(sizes(r.final_alloc) == std::vector<std::int64_t>{192, 192});
  }

  TEST_CASE("asp preemption readjusts once at the event") {
    auto s = cluster_of({3, 9, 18}, SyncMode::kAsp);
    s.initial.kind = InitialAllocKind::kStatic;
    s.controller_enabled = false;
    s.horizon.iterations = 2000;
    s.events = {event(600, EventKind::kPreempt, "b")};
    const auto r = simulate(s);
    REQUIRE(r.actions.size() == 1);
    CHECK(r.actions[0].action.kind == ActionKind::kReadjust);
    CHECK_FALSE(r.actions[0].action.rewind);
    CHECK(r.adjustments.size() == 1);
    CHECK(r.adjustments[0].reason == "preemption");
    CHECK(r.iterations_completed == 2000);
    bool after = false;
    for (const auto& row : r.traces) {
      if (row.time_end > 600) {
        after = true;
        CHECK_FALSE(row.allocation.contains("b"));
      }
    }
    CHECK(after);
  }

  TEST_CASE("staleness statistics") {
    SUBCASE("single worker is never stale") {
      auto s = cluster_of({4}, SyncMode::kAsp);
      const auto st = staleness_stats(simulate(s));
      CHECK(st.max_mean == 0.0);
    }
    SUBCASE("two equal workers alternate") {
      auto s = cluster_of({4, 4}, SyncMode::kAsp);
      s.horizon.iterations = 1000;
      const auto st = staleness_stats(simulate(s));
      CHECK(st.mean.at("a") == doctest::Approx(1.0).epsilon(0.01));
      CHECK(st.mean.at("b") == doctest::Approx(1.0).epsilon(0.01));
    }
    SUBCASE("proportional batches lower the worst staleness") {
      auto uni = cluster_of({3, 9, 18}, SyncMode::kAsp);
      uni.controller_enabled = false;
      uni.horizon.iterations = 3000;
      auto prop = uni;
      prop.initial.kind = InitialAllocKind::kStatic;
      const auto su = staleness_stats(simulate(uni));
      const auto sp = staleness_stats(simulate(prop));
      CHECK(sp.max_mean < su.max_mean);
      CHECK(sp.mean.at("a") < su.mean.at("a"));
    }
    SUBCASE("bsp has no staleness") {
      CHECK_THROWS_AS(staleness_stats(simulate(cluster_of({2, 2}))), Error);
    }
  }

  TEST_CASE("asp schedule replays commit order") {
    auto s = cluster_of({3, 9}, SyncMode::kAsp);
    s.horizon.iterations = 100;
    const auto r = simulate(s);
    const auto sched = asp_schedule(r);
    REQUIRE(sched.size() == 100);
    for (std::size_t i = 0; i < sched.size(); ++i) {
      CHECK(sched[i].read_version <= static_cast<std::int64_t>(i));
      CHECK(sched[i].read_version >= 0);
    }
  }

  TEST_CASE("determinism and seed sensitivity") {
    auto s = cluster_of({3, 9, 18});
    s.default_perf.noise = {NoiseKind::kLognormal, 0.05};
    s.controller.deadband = 0.0;
    s.seed = 1;
    const auto a = simulate(s);
    const auto b = simulate(s);
    REQUIRE(a.traces.size() == b.traces.size());
    for (std::size_t i = 0; i < a.traces.size(); ++i) {
      CHECK(a.traces[i].makespan == b.traces[i].makespan);
      CHECK(a.traces[i].allocation == b.traces[i].allocation);
    }
    s.seed = 2;
    const auto c = simulate(s);
    CHECK(c.traces[3].makespan != a.traces[3].makespan);
  }

  TEST_CASE("scenario validation") {
    auto s = cluster_of({2, 2});
    s.events = {event(10, EventKind::kPreempt, "a"), event(5, EventKind::kPreempt, "b")};
    CHECK_THROWS_AS(simulate(s), Error);
    s.events = {event(10, EventKind::kPreempt, "zz")};
    CHECK_THROWS_AS(simulate(s), Error);
    s.events = {event(10, EventKind::kDeflate, "a", 1.5)};
    CHECK_THROWS_AS(simulate(s), Error);
    s.events.clear();
    s.horizon = {0, 0.0};
    CHECK_THROWS_AS(simulate(s), Error);
  }
}
