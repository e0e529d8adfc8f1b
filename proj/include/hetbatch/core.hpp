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
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hetbatch {

/// Failure categories. The numeric values of the first few are the CLI exit
/// codes, so keep them stable.
enum class ErrorCode : int {
  kInvalidInput = 1,
  kConfig = 2,
  kInfeasible = 3,
  kClusterExhausted = 4,
  kNumericalFailure = 5,
  kOutOfMemory = 6,
  kInvalidState = 7,
  kInvalidMeasurement = 8,
  kInvalidEvent = 9,
  kInvalidMode = 10,
  kIo = 11,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using WorkerId = std::string;

enum class WorkerKind { kCpu, kGpu };
enum class SyncMode { kBsp, kAsp };

const char* to_string(WorkerKind kind);
const char* to_string(SyncMode mode);

struct WorkerSpec {
  WorkerId id;
  int cores = 1;
  double flops = 1.0;
  // Largest mini-batch the device memory holds.
  std::int64_t mem_capacity = 1 << 20;
  WorkerKind kind = WorkerKind::kCpu;

  void validate() const;
  bool operator==(const WorkerSpec&) const = default;
};

struct ClusterSpec {
  std::vector<WorkerSpec> workers;
  SyncMode sync_mode = SyncMode::kBsp;

  void validate() const;
  bool has_gpu() const;
  const WorkerSpec& worker(const WorkerId& id) const;
  bool contains(const WorkerId& id) const;
  bool operator==(const ClusterSpec&) const = default;
};

/// Per-worker mini-batch sizes in cluster order. The global batch is kept
/// equal to the sum of sizes across every construction and mutation.
class BatchAllocation {
 public:
  BatchAllocation() = default;
  BatchAllocation(std::vector<WorkerId> ids, std::vector<std::int64_t> sizes);

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  std::int64_t global() const { return global_; }

  std::span<const WorkerId> ids() const { return ids_; }
  std::span<const std::int64_t> sizes() const { return sizes_; }

  bool contains(const WorkerId& id) const;
  std::size_t index_of(const WorkerId& id) const;
  std::int64_t at(const WorkerId& id) const;

  void set(const WorkerId& id, std::int64_t size);
  /// Drops a worker; its samples leave the global batch.
  void erase(const WorkerId& id);
  void append(const WorkerId& id, std::int64_t size);

  std::map<WorkerId, std::int64_t> as_map() const;

  bool operator==(const BatchAllocation&) const = default;

 private:
  std::vector<WorkerId> ids_;
  std::vector<std::int64_t> sizes_;
  std::int64_t global_ = 0;
};

/// One record per completed iteration (BSP round or ASP commit).
struct IterationTrace {
  // Logical training iteration; rewinds on BSP checkpoint restore.
  std::int64_t iteration = 0;
  // Monotone record counter.
  std::int64_t round = 0;
  double time_end = 0.0;
  std::map<WorkerId, double> per_worker_time;
  double makespan = 0.0;
  bool adjustment_made = false;
  BatchAllocation allocation;
  std::map<WorkerId, std::int64_t> staleness;
  double overhead_seconds = 0.0;
};

/// One asynchronous gradient commit: which worker, the model version its
/// gradient was computed against, and its mini-batch.
struct AspCommit {
  WorkerId worker;
  std::int64_t read_version = 0;
  std::int64_t batch = 0;
  bool operator==(const AspCommit&) const = default;
};

/// max(capacity)/min(capacity) over the given positive capacities.
double heterogeneity_level(std::span<const double> capacities);

/// H-level of a cluster: core-count ratio for CPU-only clusters, FLOPs ratio
/// as soon as any GPU worker is present.
double heterogeneity_level(const ClusterSpec& cluster);

}  // namespace hetbatch
