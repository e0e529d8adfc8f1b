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

#include "hetbatch/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace hetbatch {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kInfeasible: return "infeasible";
    case ErrorCode::kClusterExhausted: return "cluster-exhausted";
    case ErrorCode::kNumericalFailure: return "numerical-failure";
    case ErrorCode::kOutOfMemory: return "out-of-memory";
    case ErrorCode::kInvalidState: return "invalid-state";
    case ErrorCode::kInvalidMeasurement: return "invalid-measurement";
    case ErrorCode::kInvalidEvent: return "invalid-event";
    case ErrorCode::kInvalidMode: return "invalid-mode";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

const char* to_string(WorkerKind kind) {
  return kind == WorkerKind::kGpu ? "GPU" : "CPU";
}

const char* to_string(SyncMode mode) {
  return mode == SyncMode::kAsp ? "ASP" : "BSP";
}

void WorkerSpec::validate() const {
  if (id.empty()) throw Error(ErrorCode::kInvalidInput, "worker id is empty");
  if (cores < 1) {
    throw Error(ErrorCode::kInvalidInput,
                "worker '" + id + "': cores must be >= 1");
  }
  if (!(flops > 0.0) || !std::isfinite(flops)) {
    throw Error(ErrorCode::kInvalidInput,
                "worker '" + id + "': flops must be positive");
  }
  if (mem_capacity < 1) {
    throw Error(ErrorCode::kInvalidInput,
                "worker '" + id + "': mem_capacity must be >= 1");
  }
}

void ClusterSpec::validate() const {
  if (workers.empty()) {
    throw Error(ErrorCode::kInvalidInput, "cluster has no workers");
  }
  std::set<WorkerId> seen;
  for (const auto& w : workers) {
    w.validate();
    if (!seen.insert(w.id).second) {
      throw Error(ErrorCode::kInvalidInput, "duplicate worker id '" + w.id + "'");
    }
  }
}

bool ClusterSpec::has_gpu() const {
  return std::any_of(workers.begin(), workers.end(),
                     [](const WorkerSpec& w) { return w.kind == WorkerKind::kGpu; });
}

bool ClusterSpec::contains(const WorkerId& id) const {
  return std::any_of(workers.begin(), workers.end(),
                     [&](const WorkerSpec& w) { return w.id == id; });
}

const WorkerSpec& ClusterSpec::worker(const WorkerId& id) const {
  for (const auto& w : workers) {
    if (w.id == id) return w;
  }
  throw Error(ErrorCode::kInvalidInput, "unknown worker '" + id + "'");
}

BatchAllocation::BatchAllocation(std::vector<WorkerId> ids,
                                 std::vector<std::int64_t> sizes)
    : ids_(std::move(ids)), sizes_(std::move(sizes)) {
  if (ids_.size() != sizes_.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "allocation ids and sizes differ in length");
  }
  std::set<WorkerId> seen;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!seen.insert(ids_[i]).second) {
      throw Error(ErrorCode::kInvalidInput,
                  "duplicate worker id '" + ids_[i] + "' in allocation");
    }
    if (sizes_[i] < 1) {
      throw Error(ErrorCode::kInvalidInput,
                  "mini-batch for '" + ids_[i] + "' must be >= 1");
    }
  }
  global_ = std::accumulate(sizes_.begin(), sizes_.end(), std::int64_t{0});
}

bool BatchAllocation::contains(const WorkerId& id) const {
  return std::find(ids_.begin(), ids_.end(), id) != ids_.end();
}

std::size_t BatchAllocation::index_of(const WorkerId& id) const {
  auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) {
    throw Error(ErrorCode::kInvalidInput, "worker '" + id + "' not in allocation");
  }
  return static_cast<std::size_t>(it - ids_.begin());
}

std::int64_t BatchAllocation::at(const WorkerId& id) const {
  return sizes_[index_of(id)];
}

void BatchAllocation::set(const WorkerId& id, std::int64_t size) {
  if (size < 1) {
    throw Error(ErrorCode::kInvalidInput,
                "mini-batch for '" + id + "' must be >= 1");
  }
  auto& slot = sizes_[index_of(id)];
  global_ += size - slot;
  slot = size;
}

void BatchAllocation::erase(const WorkerId& id) {
  const auto i = index_of(id);
  global_ -= sizes_[i];
  ids_.erase(ids_.begin() + static_cast<std::ptrdiff_t>(i));
  sizes_.erase(sizes_.begin() + static_cast<std::ptrdiff_t>(i));
}

void BatchAllocation::append(const WorkerId& id, std::int64_t size) {
  if (contains(id)) {
    throw Error(ErrorCode::kInvalidInput,
                "duplicate worker id '" + id + "' in allocation");
  }
  if (size < 1) {
    throw Error(ErrorCode::kInvalidInput,
                "mini-batch for '" + id + "' must be >= 1");
  }
  ids_.push_back(id);
  sizes_.push_back(size);
  global_ += size;
}

std::map<WorkerId, std::int64_t> BatchAllocation::as_map() const {
  std::map<WorkerId, std::int64_t> out;
  for (std::size_t i = 0; i < ids_.size(); ++i) out.emplace(ids_[i], sizes_[i]);
  return out;
}

double heterogeneity_level(std::span<const double> capacities) {
  if (capacities.empty()) {
    throw Error(ErrorCode::kInvalidInput, "heterogeneity of an empty cluster");
  }
  for (double c : capacities) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw Error(ErrorCode::kInvalidInput, "capacities must be positive");
    }
  }
  const auto [lo, hi] = std::minmax_element(capacities.begin(), capacities.end());
  return *hi / *lo;
}

double heterogeneity_level(const ClusterSpec& cluster) {
  if (cluster.workers.empty()) {
    throw Error(ErrorCode::kInvalidInput, "heterogeneity of an empty cluster");
  }
  const bool by_flops = cluster.has_gpu();
  std::vector<double> caps;
  caps.reserve(cluster.workers.size());
  for (const auto& w : cluster.workers) {
    caps.push_back(by_flops ? w.flops : static_cast<double>(w.cores));
  }
  return heterogeneity_level(caps);
}

}  // namespace hetbatch
