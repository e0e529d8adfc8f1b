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

#include "doctest.h"
#include "hetbatch/perfmodel.hpp"

using namespace hetbatch;

TEST_SUITE("perfmodel") {
  TEST_CASE("amdahl speedup") {
    CHECK(parallel_speedup(8, 1.0) == doctest::Approx(8.0));
    CHECK(parallel_speedup(64, 0.0) == doctest::Approx(1.0));
    CHECK(parallel_speedup(16, 0.95) == doctest::Approx(1.0 / (0.05 + 0.95 / 16.0)));
    CHECK(parallel_speedup(16, 0.95) == doctest::Approx(9.143).epsilon(1e-3));
  }

  TEST_CASE("batch term and saturation") {
    WorkerSpec w{"w", 8, 8.0};
    PerfParams p;
    p.amdahl_p = 1.0;
    p.b_half = 16;
    const double sat = p.base_rate * 8.0;
    CHECK(throughput(w, p, 16) == doctest::Approx(sat / 2));
    CHECK(throughput(w, p, 1 << 19) == doctest::Approx(sat).epsilon(1e-3));
  }

  TEST_CASE("iteration time is batch over throughput") {
    WorkerSpec w{"w", 10, 10.0};
    const auto p = ideal_linear_params(1.0);
    CHECK(throughput(w, p, 100) == doctest::Approx(10.0));
    CHECK(iteration_time(w, p, 100) == doctest::Approx(10.0));
    CHECK(iteration_time(w, p, 100, 0.5) == doctest::Approx(2 * iteration_time(w, p, 100, 1.0)));
  }

  TEST_CASE("ideal model is proportional to cores times deflation") {
    const auto p = ideal_linear_params(2.0);
    for (int c : {1, 3, 9, 18, 32}) {
      WorkerSpec w{"w", c, static_cast<double>(c)};
      CHECK(throughput(w, p, 77) == doctest::Approx(2.0 * c));
    }
    WorkerSpec w{"w", 16, 16.0};
    CHECK(throughput(w, p, 77, 0.25) == doctest::Approx(2.0 * 4));
  }

  TEST_CASE("deflated cores round up and never hit zero") {
    CHECK(deflated_cores(16, 0.25) == 4);
    CHECK(deflated_cores(10, 0.33) == 4);
    CHECK(deflated_cores(3, 0.01) == 1);
    CHECK(deflated_cores(8, 1.0) == 8);
  }

  TEST_CASE("curve rises to the memory limit then declines on cpu") {
    WorkerSpec w{"w", 8, 8.0, 256};
    PerfParams p;
    double last = 0.0;
    for (std::int64_t b = 1; b <= 256; ++b) {
      const double x = throughput(w, p, b);
      CHECK(x >= last);
      last = x;
    }
    // Declines until the penalty floor (0.1) is reached 450 samples past the limit.
    for (std::int64_t b = 257; b <= 256 + 450; b += 7) {
      const double x = throughput(w, p, b);
      CHECK(x <= last);
      last = x;
    }
    const double excess = 100;
    const double sat = parallel_speedup(8, p.amdahl_p) * 356.0 / (356.0 + p.b_half);
    CHECK(throughput(w, p, 356) == doctest::Approx(sat * (1 - p.cpu_decline * excess)));
    CHECK(throughput(w, p, 100000) ==
          doctest::Approx(parallel_speedup(8, p.amdahl_p) * 100000.0 / (100000.0 + p.b_half) * 0.1));
  }

  TEST_CASE("time grows with batch below the memory limit") {
    WorkerSpec w{"w", 8, 8.0, 4096};
    PerfParams p;
    double last = 0.0;
    for (std::int64_t b = 1; b < 4096; b += 13) {
      const double t = iteration_time(w, p, b);
      CHECK(t > last);
      last = t;
    }
  }

  TEST_CASE("monotone in cores and deflation") {
    PerfParams p;
    double last = 0.0;
    for (int c = 1; c <= 64; ++c) {
      WorkerSpec w{"w", c, static_cast<double>(c)};
      const double x = throughput(w, p, 64);
      CHECK(x >= last);
      last = x;
    }
    WorkerSpec w{"w", 16, 16.0};
    last = 0.0;
    for (double d = 0.05; d <= 1.0; d += 0.05) {
      const double x = throughput(w, p, 64, d);
      CHECK(x >= last);
      last = x;
    }
  }

  TEST_CASE("gpu memory cliff") {
    WorkerSpec g{"g", 1, 18.7, 512, WorkerKind::kGpu};
    PerfParams p;
    CHECK(throughput(g, p, 512) > 0.0);
    try {
      (void)throughput(g, p, 513);
      FAIL("expected out of memory");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kOutOfMemory);
    }
    p.gpu_cliff = false;
    CHECK(throughput(g, p, 513) > 0.0);
  }

  TEST_CASE("gpu throughput follows flops") {
    WorkerSpec g{"g", 1, 20.0, 1 << 20, WorkerKind::kGpu};
    const auto p = ideal_linear_params(1.0);
    CHECK(throughput(g, p, 100) == doctest::Approx(20.0));
    CHECK(throughput(g, p, 100, 0.5) == doctest::Approx(10.0));
  }

  TEST_CASE("parameter validation") {
    PerfParams p;
    p.amdahl_p = 1.5;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.base_rate = 0;
    CHECK_THROWS_AS(p.validate(), Error);
    p = {};
    p.b_half = -1;
    CHECK_THROWS_AS(p.validate(), Error);
    WorkerSpec w{"w", 4, 4.0};
    CHECK_THROWS_AS(throughput(w, PerfParams{}, 0), Error);
    CHECK_THROWS_AS(throughput(w, PerfParams{}, 10, 0.0), Error);
    CHECK_THROWS_AS(throughput(w, PerfParams{}, 10, 1.5), Error);
  }
}
