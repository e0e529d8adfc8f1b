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

#include "hetbatch/perfmodel.hpp"

#include <algorithm>
#include <cmath>

namespace hetbatch {

const char* to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kUniform: return "uniform";
    case NoiseKind::kLognormal: return "lognormal";
  }
  return "none";
}

void NoiseSpec::validate() const {
  if (!(amplitude >= 0.0) || !std::isfinite(amplitude)) {
    throw Error(ErrorCode::kInvalidInput, "noise amplitude must be >= 0");
  }
  if (kind == NoiseKind::kUniform && amplitude >= 1.0) {
    throw Error(ErrorCode::kInvalidInput, "uniform noise amplitude must be < 1");
  }
}

void PerfParams::validate() const {
  if (!(base_rate > 0.0) || !std::isfinite(base_rate)) {
    throw Error(ErrorCode::kInvalidInput, "perf base_rate must be > 0");
  }
  if (!(amdahl_p >= 0.0 && amdahl_p <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "perf amdahl_p must lie in [0,1]");
  }
  if (!(b_half >= 0.0) || !std::isfinite(b_half)) {
    throw Error(ErrorCode::kInvalidInput, "perf b_half must be >= 0");
  }
  if (!(cpu_decline >= 0.0) || !std::isfinite(cpu_decline)) {
    throw Error(ErrorCode::kInvalidInput, "perf cpu_decline must be >= 0");
  }
  noise.validate();
}

void DeflationState::set(const WorkerId& id, double f) {
  if (!(f > 0.0 && f <= 1.0)) {
    throw Error(ErrorCode::kInvalidEvent, "deflation factor must lie in (0,1]");
  }
  if (f == 1.0) {
    factor.erase(id);
  } else {
    factor[id] = f;
  }
}

PerfParams ideal_linear_params(double base_rate) {
  PerfParams p;
  p.base_rate = base_rate;
  p.amdahl_p = 1.0;
  p.b_half = 0.0;
  p.cpu_decline = 0.0;
  return p;
}

double parallel_speedup(int cores, double parallel_fraction) {
  if (cores < 1) throw Error(ErrorCode::kInvalidInput, "cores must be >= 1");
  return 1.0 / ((1.0 - parallel_fraction) + parallel_fraction / cores);
}

int deflated_cores(int cores, double deflation) {
  // Absorb round-off so that e.g. 16 * 0.25 stays exactly 4.
  const double scaled = static_cast<double>(cores) * deflation;
  return std::max(1, static_cast<int>(std::ceil(scaled - 1e-9)));
}

double throughput(const WorkerSpec& spec, const PerfParams& params,
                  std::int64_t batch, double deflation) {
  if (batch < 1) throw Error(ErrorCode::kInvalidInput, "batch must be >= 1");
  if (!(deflation > 0.0 && deflation <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "deflation factor must lie in (0,1]");
  }
  double penalty = 1.0;
  if (batch > spec.mem_capacity) {
    if (spec.kind == WorkerKind::kGpu && params.gpu_cliff) {
      throw Error(ErrorCode::kOutOfMemory,
                  "worker '" + spec.id + "': batch " + std::to_string(batch) +
                      " exceeds GPU memory capacity " +
                      std::to_string(spec.mem_capacity));
    }
    const auto excess = static_cast<double>(batch - spec.mem_capacity);
    penalty = std::max(0.1, 1.0 - params.cpu_decline * excess);
  }
  // GPUs scale with their FLOPs rating; CPUs with Amdahl speedup over cores.
  const double capacity =
      spec.kind == WorkerKind::kGpu
          ? spec.flops * deflation
          : parallel_speedup(deflated_cores(spec.cores, deflation), params.amdahl_p);
  const double b = static_cast<double>(batch);
  return params.base_rate * capacity * (b / (b + params.b_half)) * penalty;
}

double iteration_time(const WorkerSpec& spec, const PerfParams& params,
                      std::int64_t batch, double deflation) {
  return static_cast<double>(batch) / throughput(spec, params, batch, deflation);
}

}  // namespace hetbatch
