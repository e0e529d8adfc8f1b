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

#include "hetbatch/runner.hpp"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "json.hpp"

namespace hetbatch {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return kExitConfig;
    case ErrorCode::kInfeasible: return kExitInfeasible;
    case ErrorCode::kClusterExhausted: return kExitExhausted;
    case ErrorCode::kNumericalFailure: return kExitNumerical;
    default: return kExitFailure;
  }
}

const char* to_string(CompareMetric metric) {
  switch (metric) {
    case CompareMetric::kTotalTime: return "total_time";
    case CompareMetric::kMeanMakespan: return "mean_makespan";
    case CompareMetric::kIterationsToLoss: return "iterations_to_loss";
  }
  return "total_time";
}

CompareMetric parse_metric(const std::string& name) {
  if (name == "total_time") return CompareMetric::kTotalTime;
  if (name == "mean_makespan") return CompareMetric::kMeanMakespan;
  if (name == "iterations_to_loss") return CompareMetric::kIterationsToLoss;
  throw Error(ErrorCode::kConfig, "unknown metric '" + name +
                                      "' (expected total_time, mean_makespan or iterations_to_loss)");
}

namespace {

ordered alloc_json(const BatchAllocation& a) {
  ordered j = ordered::object();
  for (std::size_t i = 0; i < a.size(); ++i) j[a.ids()[i]] = a.sizes()[i];
  return j;
}

template <typename M>
ordered map_json(const M& m) {
  ordered j = ordered::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

std::string trace_line(const IterationTrace& t) {
  ordered j;
  j["schema_version"] = kTraceSchemaVersion;
  j["type"] = "iteration";
  j["iteration"] = t.iteration;
  j["round"] = t.round;
  j["time_end"] = t.time_end;
  j["makespan"] = t.makespan;
  j["per_worker_time"] = map_json(t.per_worker_time);
  j["allocation"] = alloc_json(t.allocation);
  j["global_batch"] = t.allocation.global();
  j["adjustment"] = t.adjustment_made;
  if (!t.staleness.empty()) j["staleness"] = map_json(t.staleness);
  j["overhead"] = t.overhead_seconds;
  return j.dump() + "\n";
}

std::string action_line(const ActionRecord& r) {
  ordered j;
  j["schema_version"] = kTraceSchemaVersion;
  j["type"] = "action";
  j["event_id"] = r.event_id;
  j["event"] = to_string(r.event);
  j["worker"] = r.worker;
  j["at"] = r.at;
  j["fired_at"] = r.fired_at;
  j["iteration"] = r.iteration;
  j["outcome"] = r.outcome;
  j["action"] = to_string(r.action.kind);
  j["decision"] = to_string(r.action.decision);
  j["restart"] = r.action.restart;
  j["rewind"] = r.action.rewind;
  j["allocation"] = alloc_json(r.action.allocation);
  j["target_global"] = r.action.target_global;
  if (!r.action.detail.empty()) j["detail"] = r.action.detail;
  return j.dump() + "\n";
}

std::string loss_line(const LossPoint& p, bool asp) {
  ordered j;
  j["schema_version"] = kTraceSchemaVersion;
  j["iteration"] = p.iteration;
  j["loss"] = p.loss;
  j["global_batch"] = p.global_batch;
  j["allocation"] = alloc_json(p.allocation);
  if (asp) j["staleness"] = p.staleness;
  return j.dump() + "\n";
}

double mean_makespan(const SimResult& r) {
  if (r.traces.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : r.traces) s += t.makespan;
  return s / static_cast<double>(r.traces.size());
}

std::string summary_text(const ScenarioFile& file, const RunOutcome& out,
                         const std::optional<Scenario>& resolved) {
  ordered j;
  j["schema_version"] = kTraceSchemaVersion;
  j["name"] = file.name;
  j["mode"] = to_string(file.mode);
  j["seed"] = file.scenario.seed;
  j["status"] = out.error ? "error" : "ok";
  j["exit_code"] = out.exit_code;
  if (out.error) {
    j["error"] = {{"code", error_code_name(*out.error)}, {"message", out.message}};
  }
  if (resolved) {
    j["sync_mode"] = to_string(resolved->cluster.sync_mode);
    ordered workers = ordered::array();
    for (const auto& w : resolved->cluster.workers) workers.push_back(w.id);
    j["workers"] = workers;
    j["heterogeneity_level"] = heterogeneity_level(resolved->cluster);
  }
  j["rows_emitted"] = out.rows_emitted;
  if (out.sim) {
    const auto& s = *out.sim;
    j["total_time"] = s.total_time;
    j["overhead_time"] = s.overhead_time;
    j["idle_time"] = s.idle_time;
    j["overhead_fraction"] = s.overhead_fraction;
    j["iterations_completed"] = s.iterations_completed;
    j["mean_makespan"] = mean_makespan(s);
    j["restarts"] = s.restarts;
    j["adjustments"] = static_cast<std::int64_t>(s.adjustments.size());
    ordered log = ordered::array();
    for (const auto& a : s.adjustments) {
      log.push_back({{"iteration", a.iteration},
                     {"reason", a.reason},
                     {"before", alloc_json(a.before)},
                     {"after", alloc_json(a.after)}});
    }
    j["adjustment_log"] = log;
    j["initial_allocation"] = alloc_json(s.initial_alloc);
    j["final_allocation"] = alloc_json(s.final_alloc);
    j["final_global_batch"] = s.final_target_global;
    j["events"] = static_cast<std::int64_t>(s.actions.size());
    j["notes"] = s.notes;
    if (s.mode == SyncMode::kAsp) {
      const auto st = staleness_stats(s);
      ordered mean = map_json(st.mean);
      ordered hist = ordered::object();
      for (const auto& [w, h] : st.histogram) {
        ordered hw = ordered::object();
        for (const auto& [k, c] : h) hw[std::to_string(k)] = c;
        hist[w] = hw;
      }
      j["staleness"] = {{"mean", mean}, {"max_mean", st.max_mean}, {"histogram", hist}};
    }
  }
  if (out.train) {
    const auto& t = *out.train;
    ordered loss;
    loss["final_loss"] = t.losses.empty() ? 0.0 : t.losses.back().loss;
    loss["iterations_to_loss"] = out.iterations_to_loss;
    loss["final_params"] = t.final_params;
    ordered curve = ordered::array();
    for (const auto& p : t.losses) curve.push_back({p.iteration, p.loss});
    loss["curve"] = curve;
    j["loss"] = loss;
  }
  return j.dump(2) + "\n";
}

void fail_at_iteration(const Error& e, std::int64_t iteration) {
  throw Error(e.code(), "iteration " + std::to_string(iteration) + ": " + e.what());
}

}  // namespace

RunOutcome execute(const ScenarioFile& file) {
  RunOutcome out;
  std::optional<Scenario> resolved;
  std::ostringstream trace;
  std::int64_t last_iteration = 0;
  try {
    resolved = resolve(file);
    const Scenario& s = *resolved;
    const bool need_sim = file.mode != RunMode::kTrain || s.cluster.sync_mode == SyncMode::kAsp;
    if (need_sim) {
      SimCallbacks cb;
      cb.on_trace = [&](const IterationTrace& t) {
        trace << trace_line(t);
        ++out.rows_emitted;
        last_iteration = t.iteration;
      };
      cb.on_action = [&](const ActionRecord& r) { trace << action_line(r); };
      try {
        out.sim = simulate(s, cb);
      } catch (const Error& e) {
        fail_at_iteration(e, last_iteration);
      }
    }
    if (file.mode != RunMode::kSimulate) {
      const auto& tr = *file.trainer;
      const auto data = make_dataset(tr.data);
      auto model = ModelSpec::zeros(tr.data.kind, tr.data.dim, tr.eta);
      BatchAllocation alloc = make_initial_allocation(s.cluster, s.initial);
      if (tr.allocation == TrainAllocation::kFinal && out.sim) alloc = out.sim->final_alloc;
      std::ostringstream loss;
      try {
        if (s.cluster.sync_mode == SyncMode::kBsp) {
          out.train = train_bsp(model, data, alloc, tr.config);
        } else {
          auto schedule = asp_schedule(*out.sim);
          if (static_cast<std::int64_t>(schedule.size()) > tr.config.iterations) {
            schedule.resize(static_cast<std::size_t>(tr.config.iterations));
          }
          out.train = train_asp(model, data, out.sim->initial_alloc, schedule, tr.config);
        }
      } catch (const Error& e) {
        throw Error(e.code(), std::string("trainer: ") + e.what());
      }
      const bool asp = s.cluster.sync_mode == SyncMode::kAsp;
      for (const auto& p : out.train->losses) {
        loss << loss_line(p, asp);
        if (out.iterations_to_loss < 0 && p.loss <= tr.loss_threshold) {
          out.iterations_to_loss = p.iteration + 1;
        }
      }
      out.loss_text = loss.str();
    }
  } catch (const Error& e) {
    out.error = e.code();
    out.message = e.what();
    out.exit_code = exit_code_for(e.code());
  } catch (const std::exception& e) {
    out.error = ErrorCode::kInvalidState;
    out.message = e.what();
    out.exit_code = kExitFailure;
  }
  out.trace_text = trace.str();
  out.summary_text = summary_text(file, out, resolved);
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  f << text;
  f.flush();
  if (!f) throw Error(ErrorCode::kIo, "short write to '" + path.string() + "'");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunOutcome run_file(const ScenarioFile& file, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create output directory '" + out_dir + "'");
  RunOutcome out = execute(file);
  const fs::path dir(out_dir);
  write_file(dir / file.output.trace, out.trace_text);
  write_file(dir / file.output.summary, out.summary_text);
  const bool trained = file.mode != RunMode::kSimulate;
  if (trained) write_file(dir / file.output.loss, out.loss_text);

  ordered m;
  m["schema_version"] = kTraceSchemaVersion;
  m["tool"] = "hetbatch";
  m["created_at"] = utc_timestamp();
  m["scenario"] = file.name;
  m["seed"] = file.scenario.seed;
  m["exit_code"] = out.exit_code;
  m["status"] = out.error ? "error" : "ok";
  ordered files = ordered::object();
  files["trace"] = file.output.trace;
  files["summary"] = file.output.summary;
  if (trained) files["loss"] = file.output.loss;
  m["files"] = files;
  write_file(dir / file.output.manifest, m.dump(2) + "\n");
  return out;
}

RunOutcome run(const std::string& scenario_path, const Overrides& overrides,
               std::optional<std::uint64_t> seed, const std::string& out_dir) {
  std::ifstream in(scenario_path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read scenario file '" + scenario_path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  Overrides all = overrides;
  if (seed) all.emplace_back("seed", std::to_string(*seed));
  return run_file(parse_scenario(buf.str(), all), out_dir);
}

namespace {

double metric_value(const RunOutcome& out, CompareMetric metric, const std::string& label) {
  if (out.error) {
    throw Error(*out.error, "scenario " + label + ": " + out.message);
  }
  switch (metric) {
    case CompareMetric::kTotalTime:
      if (!out.sim) throw Error(ErrorCode::kInvalidMode, "scenario " + label + " did not simulate");
      return out.sim->total_time;
    case CompareMetric::kMeanMakespan:
      if (!out.sim) throw Error(ErrorCode::kInvalidMode, "scenario " + label + " did not simulate");
      return mean_makespan(*out.sim);
    case CompareMetric::kIterationsToLoss:
      if (!out.train) throw Error(ErrorCode::kInvalidMode, "scenario " + label + " did not train");
      if (out.iterations_to_loss < 0) {
        throw Error(ErrorCode::kNumericalFailure,
                    "scenario " + label + " never reached the loss threshold");
      }
      return static_cast<double>(out.iterations_to_loss);
  }
  return 0.0;
}

}  // namespace

CompareReport compare(const ScenarioFile& a, const ScenarioFile& b, CompareMetric metric) {
  auto fa = std::async(std::launch::async, [&a] { return execute(a); });
  auto fb = std::async(std::launch::async, [&b] { return execute(b); });
  const RunOutcome ra = fa.get();
  const RunOutcome rb = fb.get();
  CompareReport r;
  r.metric = metric;
  r.value_a = metric_value(ra, metric, "a");
  r.value_b = metric_value(rb, metric, "b");
  if (!(r.value_b > 0.0)) {
    throw Error(ErrorCode::kNumericalFailure, "scenario b has a zero metric; ratio undefined");
  }
  r.ratio = r.value_a / r.value_b;
  ordered j;
  j["metric"] = to_string(metric);
  j["a"] = {{"name", a.name}, {"value", r.value_a}};
  j["b"] = {{"name", b.name}, {"value", r.value_b}};
  j["ratio"] = r.ratio;
  r.text = j.dump(2) + "\n";
  return r;
}

}  // namespace hetbatch
