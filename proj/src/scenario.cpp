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

#include "hetbatch/scenario.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace hetbatch {

using nlohmann::json;

const char* to_string(RunMode mode) {
  switch (mode) {
    case RunMode::kSimulate: return "simulate";
    case RunMode::kTrain: return "train";
    case RunMode::kBoth: return "both";
  }
  return "simulate";
}

namespace {

constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max();

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::kConfig, path + ": " + msg);
}

// Strict view over one JSON object: typed getters with defaults, and a
// finish() that rejects keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }
  ~Reader() = default;

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d == std::floor(d) && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    fail(at(key), "expected an integer");
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    fail(at(key), "expected a non-negative integer");
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  template <typename E>
  E choice(const std::string& key, E fallback,
           std::initializer_list<std::pair<const char*, E>> options) {
    if (!has(key)) return fallback;
    const auto s = string(key, "");
    std::string names;
    for (const auto& [name, value] : options) {
      if (s == name) return value;
      names += names.empty() ? name : std::string(", ") + name;
    }
    fail(at(key), "unknown value '" + s + "' (expected one of: " + names + ")");
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(at(key), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

WorkerKind read_kind(Reader& r) {
  return r.choice<WorkerKind>("kind", WorkerKind::kCpu,
                              {{"CPU", WorkerKind::kCpu}, {"GPU", WorkerKind::kGpu}});
}

WorkerSpec read_worker(const json& j, const std::string& path) {
  Reader r(j, path);
  WorkerSpec w;
  w.id = r.string("id", "");
  if (w.id.empty()) fail(r.at("id"), "worker id is required");
  w.cores = static_cast<int>(r.integer("cores", 1));
  w.flops = r.number("flops", static_cast<double>(w.cores));
  w.mem_capacity = r.integer("mem_capacity", w.mem_capacity);
  w.kind = read_kind(r);
  r.finish();
  try {
    w.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return w;
}

json write_worker(const WorkerSpec& w) {
  return {{"id", w.id},
          {"cores", w.cores},
          {"flops", w.flops},
          {"mem_capacity", w.mem_capacity},
          {"kind", to_string(w.kind)}};
}

PerfParams read_perf(const json& j, const std::string& path, const PerfParams& base) {
  Reader r(j, path);
  PerfParams p = base;
  p.base_rate = r.number("base_rate", p.base_rate);
  p.amdahl_p = r.number("amdahl_p", p.amdahl_p);
  p.b_half = r.number("b_half", p.b_half);
  p.cpu_decline = r.number("cpu_decline", p.cpu_decline);
  p.gpu_cliff = r.boolean("gpu_cliff", p.gpu_cliff);
  if (r.has("noise")) {
    Reader n(r.raw("noise"), r.at("noise"));
    p.noise.kind = n.choice<NoiseKind>("kind", NoiseKind::kNone,
                                       {{"none", NoiseKind::kNone},
                                        {"uniform", NoiseKind::kUniform},
                                        {"lognormal", NoiseKind::kLognormal}});
    p.noise.amplitude = n.number("amplitude", 0.0);
    n.finish();
  }
  r.finish();
  try {
    p.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return p;
}

json write_perf(const PerfParams& p) {
  return {{"base_rate", p.base_rate},
          {"amdahl_p", p.amdahl_p},
          {"b_half", p.b_half},
          {"cpu_decline", p.cpu_decline},
          {"gpu_cliff", p.gpu_cliff},
          {"noise", {{"kind", to_string(p.noise.kind)}, {"amplitude", p.noise.amplitude}}}};
}

BatchBounds read_bounds(const json& j, const std::string& path, BatchBounds base) {
  Reader r(j, path);
  base.min = r.integer("min", base.min);
  base.max = r.integer("max", base.max);
  r.finish();
  if (base.min < 1 || base.max < base.min) fail(path, "need 1 <= min <= max");
  return base;
}

json write_bounds(const BatchBounds& b) {
  json j = {{"min", b.min}, {"max", nullptr}};
  if (b.max != kUnbounded) j["max"] = b.max;
  return j;
}

ControllerConfig read_controller(Reader& r, bool& enabled) {
  ControllerConfig c;
  enabled = r.boolean("enabled", true);
  c.deadband = r.number("deadband", c.deadband);
  c.ewma_alpha = r.number("ewma_alpha", c.ewma_alpha);
  c.window = static_cast<int>(r.integer("window", c.window));
  c.conserve_global = r.boolean("conserve_global", c.conserve_global);
  c.tighten_bmax_on_drop = r.boolean("tighten_bmax_on_drop", c.tighten_bmax_on_drop);
  c.drop_tolerance = r.number("drop_tolerance", c.drop_tolerance);
  if (r.has("default_bounds")) {
    c.default_bounds = read_bounds(r.raw("default_bounds"), r.at("default_bounds"), {});
  }
  if (r.has("bounds")) {
    const auto& b = r.raw("bounds");
    if (!b.is_object()) fail(r.at("bounds"), "expected an object keyed by worker id");
    for (const auto& [id, v] : b.items()) {
      c.bounds[id] = read_bounds(v, r.at("bounds") + "." + id, c.default_bounds);
    }
  }
  r.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    fail(r.path(), e.what());
  }
  return c;
}

json write_controller(const ControllerConfig& c, bool enabled) {
  json bounds = json::object();
  for (const auto& [id, b] : c.bounds) bounds[id] = write_bounds(b);
  return {{"enabled", enabled},
          {"deadband", c.deadband},
          {"ewma_alpha", c.ewma_alpha},
          {"window", c.window},
          {"conserve_global", c.conserve_global},
          {"tighten_bmax_on_drop", c.tighten_bmax_on_drop},
          {"drop_tolerance", c.drop_tolerance},
          {"default_bounds", write_bounds(c.default_bounds)},
          {"bounds", bounds}};
}

CapacityPolicy read_policy_choice(Reader& r) {
  return r.choice<CapacityPolicy>("policy", CapacityPolicy::kCores,
                                  {{"cores", CapacityPolicy::kCores},
                                   {"flops", CapacityPolicy::kFlops}});
}

VmType read_vm_type(const json& j, const std::string& path) {
  Reader r(j, path);
  VmType t;
  t.name = r.string("name", "");
  t.cores = static_cast<int>(r.integer("cores", 1));
  t.flops = r.number("flops", static_cast<double>(t.cores));
  t.mem_capacity = r.integer("mem_capacity", t.mem_capacity);
  t.kind = read_kind(r);
  t.cost_rate = r.number("cost_rate", 0.0);
  t.preempt_prob = r.number("preempt_prob", 0.0);
  r.finish();
  try {
    t.validate();
  } catch (const Error& e) {
    fail(path, e.what());
  }
  return t;
}

json write_vm_type(const VmType& t) {
  return {{"name", t.name},         {"cores", t.cores},
          {"flops", t.flops},       {"mem_capacity", t.mem_capacity},
          {"kind", to_string(t.kind)}, {"cost_rate", t.cost_rate},
          {"preempt_prob", t.preempt_prob}};
}

ScenarioFile from_json(const json& doc) {
  Reader root(doc, "");
  const auto version = root.integer("schema_version", kScenarioSchemaVersion);
  if (version != kScenarioSchemaVersion) {
    fail("schema_version", "unsupported version " + std::to_string(version));
  }
  ScenarioFile f;
  Scenario& s = f.scenario;
  f.name = root.string("name", "");
  f.mode = root.choice<RunMode>("mode", RunMode::kSimulate,
                                {{"simulate", RunMode::kSimulate},
                                 {"train", RunMode::kTrain},
                                 {"both", RunMode::kBoth}});
  s.seed = root.unsigned_integer("seed", 0);

  if (root.has("portfolio")) {
    Reader p(root.raw("portfolio"), "portfolio");
    PortfolioSection section;
    if (!p.has("vm_types") || !p.raw("vm_types").is_array()) {
      fail("portfolio.vm_types", "expected a list of vm types");
    }
    const auto& types = p.raw("vm_types");
    for (std::size_t i = 0; i < types.size(); ++i) {
      section.vm_types.push_back(
          read_vm_type(types[i], "portfolio.vm_types[" + std::to_string(i) + "]"));
    }
    if (section.vm_types.empty()) fail("portfolio.vm_types", "needs at least one vm type");
    section.demand = static_cast<int>(p.integer("demand", 1));
    section.alpha = p.number("alpha", 0.0);
    section.max_count = static_cast<int>(p.integer("max_count", 4));
    p.finish();
    if (section.demand < 1) fail("portfolio.demand", "must be >= 1");
    if (!(section.alpha >= 0.0)) fail("portfolio.alpha", "must be >= 0");
    if (section.max_count < 1) fail("portfolio.max_count", "must be >= 1");
    f.portfolio = std::move(section);
  }

  if (!root.has("cluster")) fail("cluster", "section is required");
  {
    Reader c(root.raw("cluster"), "cluster");
    s.cluster.sync_mode = c.choice<SyncMode>("sync_mode", SyncMode::kBsp,
                                             {{"BSP", SyncMode::kBsp}, {"ASP", SyncMode::kAsp}});
    if (c.has("workers")) {
      const auto& ws = c.raw("workers");
      if (!ws.is_array()) fail("cluster.workers", "expected a list");
      for (std::size_t i = 0; i < ws.size(); ++i) {
        s.cluster.workers.push_back(read_worker(ws[i], "cluster.workers[" + std::to_string(i) + "]"));
      }
    }
    c.finish();
    if (f.portfolio && !s.cluster.workers.empty()) {
      fail("cluster.workers", "must be omitted when a portfolio section is given");
    }
    if (!f.portfolio) {
      try {
        s.cluster.validate();
      } catch (const Error& e) {
        fail("cluster", e.what());
      }
    }
  }

  if (root.has("perf")) {
    Reader p(root.raw("perf"), "perf");
    if (p.has("default")) s.default_perf = read_perf(p.raw("default"), "perf.default", {});
    if (p.has("workers")) {
      const auto& ws = p.raw("workers");
      if (!ws.is_object()) fail("perf.workers", "expected an object keyed by worker id");
      for (const auto& [id, v] : ws.items()) {
        s.perf[id] = read_perf(v, "perf.workers." + id, s.default_perf);
      }
    }
    p.finish();
  }

  if (root.has("controller")) {
    Reader c(root.raw("controller"), "controller");
    s.controller = read_controller(c, s.controller_enabled);
  }

  if (root.has("initial_allocation")) {
    Reader a(root.raw("initial_allocation"), "initial_allocation");
    s.initial.kind = a.choice<InitialAllocKind>("kind", InitialAllocKind::kUniform,
                                                {{"uniform", InitialAllocKind::kUniform},
                                                 {"static", InitialAllocKind::kStatic},
                                                 {"explicit", InitialAllocKind::kExplicit}});
    s.initial.b0 = a.integer("b0", s.initial.b0);
    s.initial.policy = read_policy_choice(a);
    if (a.has("sizes")) {
      const auto& sizes = a.raw("sizes");
      if (!sizes.is_array()) fail("initial_allocation.sizes", "expected a list of integers");
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!sizes[i].is_number_integer() || sizes[i].get<std::int64_t>() < 1) {
          fail("initial_allocation.sizes[" + std::to_string(i) + "]", "expected an integer >= 1");
        }
        s.initial.sizes.push_back(sizes[i].get<std::int64_t>());
      }
    }
    a.finish();
    if (s.initial.b0 < 1) fail("initial_allocation.b0", "must be >= 1");
    if (s.initial.kind == InitialAllocKind::kExplicit && s.initial.sizes.empty()) {
      fail("initial_allocation.sizes", "required for explicit allocations");
    }
  }

  if (root.has("events")) {
    const auto& evs = root.raw("events");
    if (!evs.is_array()) fail("events", "expected a list");
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const std::string path = "events[" + std::to_string(i) + "]";
      Reader e(evs[i], path);
      ClusterEvent ev;
      ev.at = e.number("at", 0.0);
      ev.kind = e.choice<EventKind>("kind", EventKind::kPreempt,
                                    {{"preempt", EventKind::kPreempt},
                                     {"deflate", EventKind::kDeflate},
                                     {"reinflate", EventKind::kReinflate},
                                     {"add", EventKind::kAdd}});
      if (ev.kind == EventKind::kAdd) {
        if (!e.has("worker") || !e.raw("worker").is_object()) {
          fail(e.at("worker"), "add events need a worker object");
        }
        ev.added = read_worker(e.raw("worker"), e.at("worker"));
        if (e.has("perf")) s.perf[ev.added.id] = read_perf(e.raw("perf"), e.at("perf"), s.default_perf);
      } else {
        ev.worker = e.string("worker", "");
        if (ev.kind == EventKind::kDeflate) ev.factor = e.number("factor", 0.0);
      }
      e.finish();
      try {
        ev.validate();
      } catch (const Error& err) {
        fail(path, err.what());
      }
      s.events.push_back(std::move(ev));
    }
  }

  if (root.has("policy")) {
    Reader p(root.raw("policy"), "policy");
    s.policy.mode = p.choice<GlobalBatchMode>("global_batch", GlobalBatchMode::kConserving,
                                              {{"conserving", GlobalBatchMode::kConserving},
                                               {"scaling", GlobalBatchMode::kScaling}});
    s.policy.monitor_window = static_cast<int>(p.integer("monitor_window", s.policy.monitor_window));
    s.policy.scale_down_trigger = p.number("scale_down_trigger", s.policy.scale_down_trigger);
    s.policy.checkpoint_interval =
        static_cast<int>(p.integer("checkpoint_interval", s.policy.checkpoint_interval));
    p.finish();
    try {
      s.policy.validate();
    } catch (const Error& e) {
      fail("policy", e.what());
    }
  }

  s.restart_cost = root.number("restart_cost", s.restart_cost);
  s.sync_cost = root.number("sync_cost", s.sync_cost);
  s.asp_check_seconds = root.number("asp_check_seconds", s.asp_check_seconds);
  if (root.has("horizon")) {
    Reader h(root.raw("horizon"), "horizon");
    s.horizon.iterations = h.integer("iterations", s.horizon.iterations);
    s.horizon.seconds = h.number("seconds", s.horizon.seconds);
    h.finish();
  }

  if (root.has("trainer")) {
    Reader t(root.raw("trainer"), "trainer");
    TrainerSection tr;
    tr.data.kind = t.choice<ModelKind>("model", ModelKind::kLinearRegression,
                                       {{"linear", ModelKind::kLinearRegression},
                                        {"logistic", ModelKind::kLogisticRegression}});
    tr.data.dim = static_cast<int>(t.integer("dim", tr.data.dim));
    tr.data.n = t.integer("n", tr.data.n);
    tr.data.noise_sigma = t.number("noise_sigma", tr.data.noise_sigma);
    tr.data.seed = t.unsigned_integer("data_seed", s.seed);
    tr.eta = t.number("eta", tr.eta);
    tr.config.iterations = t.integer("iterations", tr.config.iterations);
    tr.config.lr_decay = t.number("lr_decay", tr.config.lr_decay);
    tr.config.scaling = t.choice<AggregationScaling>(
        "aggregation", AggregationScaling::kWeightedMean,
        {{"weighted_mean", AggregationScaling::kWeightedMean},
         {"literal", AggregationScaling::kLiteral}});
    tr.config.seed = t.unsigned_integer("sample_seed", s.seed);
    tr.allocation = t.choice<TrainAllocation>("allocation", TrainAllocation::kInitial,
                                              {{"initial", TrainAllocation::kInitial},
                                               {"final", TrainAllocation::kFinal}});
    tr.loss_threshold = t.number("loss_threshold", 0.0);
    t.finish();
    if (tr.data.dim < 1 || tr.data.n < 1) fail("trainer", "dim and n must be >= 1");
    if (!(tr.eta > 0.0)) fail("trainer.eta", "must be > 0");
    if (tr.config.iterations < 1) fail("trainer.iterations", "must be >= 1");
    if (!(tr.config.lr_decay >= 0.0)) fail("trainer.lr_decay", "must be >= 0");
    if (!(tr.data.noise_sigma >= 0.0)) fail("trainer.noise_sigma", "must be >= 0");
    f.trainer = tr;
  }
  if (f.mode != RunMode::kSimulate && !f.trainer) {
    fail("trainer", "section is required for mode '" + std::string(to_string(f.mode)) + "'");
  }

  if (root.has("output")) {
    Reader o(root.raw("output"), "output");
    f.output.trace = o.string("trace", f.output.trace);
    f.output.summary = o.string("summary", f.output.summary);
    f.output.manifest = o.string("manifest", f.output.manifest);
    f.output.loss = o.string("loss", f.output.loss);
    o.finish();
  }
  root.finish();

  if (!f.portfolio) {
    try {
      s.validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, e.what());
    }
  }
  return f;
}

json to_json(const ScenarioFile& f) {
  const Scenario& s = f.scenario;
  json doc;
  doc["schema_version"] = kScenarioSchemaVersion;
  doc["name"] = f.name;
  doc["mode"] = to_string(f.mode);
  doc["seed"] = s.seed;
  json workers = json::array();
  for (const auto& w : s.cluster.workers) workers.push_back(write_worker(w));
  doc["cluster"] = {{"sync_mode", to_string(s.cluster.sync_mode)}, {"workers", workers}};
  if (f.portfolio) {
    json types = json::array();
    for (const auto& t : f.portfolio->vm_types) types.push_back(write_vm_type(t));
    doc["portfolio"] = {{"vm_types", types},
                        {"demand", f.portfolio->demand},
                        {"alpha", f.portfolio->alpha},
                        {"max_count", f.portfolio->max_count}};
  }
  json perf_workers = json::object();
  for (const auto& [id, p] : s.perf) perf_workers[id] = write_perf(p);
  doc["perf"] = {{"default", write_perf(s.default_perf)}, {"workers", perf_workers}};
  doc["controller"] = write_controller(s.controller, s.controller_enabled);
  json init = {{"kind", to_string(s.initial.kind)},
               {"b0", s.initial.b0},
               {"policy", to_string(s.initial.policy)}};
  if (!s.initial.sizes.empty()) init["sizes"] = s.initial.sizes;
  doc["initial_allocation"] = init;
  json events = json::array();
  for (const auto& ev : s.events) {
    json e = {{"at", ev.at}, {"kind", to_string(ev.kind)}};
    if (ev.kind == EventKind::kAdd) {
      e["worker"] = write_worker(ev.added);
    } else {
      e["worker"] = ev.worker;
      if (ev.kind == EventKind::kDeflate) e["factor"] = ev.factor;
    }
    events.push_back(e);
  }
  doc["events"] = events;
  doc["policy"] = {{"global_batch", to_string(s.policy.mode)},
                   {"monitor_window", s.policy.monitor_window},
                   {"scale_down_trigger", s.policy.scale_down_trigger},
                   {"checkpoint_interval", s.policy.checkpoint_interval}};
  doc["restart_cost"] = s.restart_cost;
  doc["sync_cost"] = s.sync_cost;
  doc["asp_check_seconds"] = s.asp_check_seconds;
  doc["horizon"] = {{"iterations", s.horizon.iterations}, {"seconds", s.horizon.seconds}};
  if (f.trainer) {
    const auto& t = *f.trainer;
    doc["trainer"] = {{"model", to_string(t.data.kind)},
                      {"dim", t.data.dim},
                      {"n", t.data.n},
                      {"noise_sigma", t.data.noise_sigma},
                      {"data_seed", t.data.seed},
                      {"eta", t.eta},
                      {"iterations", t.config.iterations},
                      {"lr_decay", t.config.lr_decay},
                      {"aggregation", to_string(t.config.scaling)},
                      {"sample_seed", t.config.seed},
                      {"allocation", t.allocation == TrainAllocation::kFinal ? "final" : "initial"},
                      {"loss_threshold", t.loss_threshold}};
  }
  doc["output"] = {{"trace", f.output.trace},
                   {"summary", f.output.summary},
                   {"manifest", f.output.manifest},
                   {"loss", f.output.loss}};
  return doc;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed scenario: ") + e.what());
  }
}

void apply_override(json& doc, const std::string& key, const std::string& value) {
  if (key.empty()) throw Error(ErrorCode::kConfig, "empty override key");
  json parsed;
  try {
    parsed = json::parse(value);
  } catch (const json::parse_error&) {
    parsed = value;
  }
  json* node = &doc;
  std::stringstream ss(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& p = parts[i];
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(p);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kConfig, "override " + key + ": '" + p + "' is not a list index");
      }
      if (idx >= node->size()) {
        throw Error(ErrorCode::kConfig, "override " + key + ": index " + p + " out of range");
      }
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) {
        throw Error(ErrorCode::kConfig, "override " + key + ": '" + p + "' is not inside an object");
      }
      node = &(*node)[p];
    }
    if (last) *node = parsed;
  }
}

}  // namespace

ScenarioFile parse_scenario(std::string_view text) { return from_json(parse_json(text)); }

ScenarioFile parse_scenario(std::string_view text,
                            const std::vector<std::pair<std::string, std::string>>& overrides) {
  auto doc = parse_json(text);
  for (const auto& [k, v] : overrides) apply_override(doc, k, v);
  return from_json(doc);
}

ScenarioFile load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

std::string to_text(const ScenarioFile& file) { return to_json(file).dump(2) + "\n"; }

Scenario resolve(const ScenarioFile& file) {
  Scenario s = file.scenario;
  if (file.portfolio) {
    const auto& p = *file.portfolio;
    const auto chosen = select_portfolio(p.vm_types, p.demand, p.alpha, p.max_count);
    auto [cluster, alloc] = portfolio_to_allocation(chosen, p.vm_types, s.initial.b0);
    cluster.sync_mode = s.cluster.sync_mode;
    s.cluster = std::move(cluster);
    if (s.initial.kind == InitialAllocKind::kExplicit) {
      s.initial.kind = InitialAllocKind::kStatic;
    }
    (void)alloc;
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  return s;
}

}  // namespace hetbatch
