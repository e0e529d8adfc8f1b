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

#include "hetbatch/core.hpp"

namespace hetbatch {

enum class NoiseKind { kNone, kUniform, kLognormal };

const char* to_string(NoiseKind kind);

/// Multiplicative per-iteration noise on compute times. kUniform draws the
/// factor from [1 - amplitude, 1 + amplitude]; kLognormal uses
/// exp(N(0, amplitude^2)).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::kNone;
  double amplitude = 0.0;

  void validate() const;
  bool operator==(const NoiseSpec&) const = default;
};

/// Throughput curve parameters for one worker.
///
/// Saturated throughput is base_rate per unit of parallel speedup (CPU) or
/// per FLOPs unit (GPU). The batch term b/(b + b_half) gives the rising part
/// of the curve; past mem_capacity a CPU degrades by cpu_decline per extra
/// sample (floored at 10%) while a GPU with gpu_cliff fails outright.
struct PerfParams {
  double base_rate = 1.0;
  double amdahl_p = 0.95;
  double b_half = 8.0;
  double cpu_decline = 0.002;
  bool gpu_cliff = true;
  NoiseSpec noise;

  void validate() const;
  bool operator==(const PerfParams&) const = default;
};

/// Fraction of each worker's resources currently available; absent workers
/// are fully inflated.
struct DeflationState {
  std::map<WorkerId, double> factor;

  double of(const WorkerId& id) const {
    auto it = factor.find(id);
    return it == factor.end() ? 1.0 : it->second;
  }
  void set(const WorkerId& id, double f);
};

/// Linear-scaling parameters: p = 1, b_half = 0, no noise.
PerfParams ideal_linear_params(double base_rate = 1.0);

double parallel_speedup(int cores, double parallel_fraction);

/// Cores left after deflation, rounded up and never below one.
int deflated_cores(int cores, double deflation);

/// Samples per second. Throws kOutOfMemory for a GPU with gpu_cliff when the
/// batch exceeds its memory capacity.
double throughput(const WorkerSpec& spec, const PerfParams& params,
                  std::int64_t batch, double deflation = 1.0);

/// Seconds to compute gradients for one mini-batch: batch / throughput.
double iteration_time(const WorkerSpec& spec, const PerfParams& params,
                      std::int64_t batch, double deflation = 1.0);

}  // namespace hetbatch
