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

#include <algorithm>
#include <random>

#include "doctest.h"
#include "hetbatch/core.hpp"

using namespace hetbatch;

namespace {

ClusterSpec cpu_cluster(std::vector<int> cores) {
  ClusterSpec c;
  for (std::size_t i = 0; i < cores.size(); ++i) {
    c.workers.push_back({"w" + std::to_string(i), cores[i], static_cast<double>(cores[i])});
  }
  return c;
}

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("heterogeneity level of published configurations") {
    CHECK(heterogeneity_level(cpu_cluster({3, 9, 18})) == doctest::Approx(6.0));
    CHECK(heterogeneity_level(cpu_cluster({2, 17, 20})) == doctest::Approx(10.0));
    CHECK(heterogeneity_level(cpu_cluster({8, 8, 8})) == doctest::Approx(1.0));
  }

  TEST_CASE("heterogeneity level is scale and permutation invariant") {
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> u(0.1, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> caps(2 + trial % 5);
      for (auto& c : caps) c = u(gen);
      const double h = heterogeneity_level(caps);
      const double expect = *std::max_element(caps.begin(), caps.end()) /
                            *std::min_element(caps.begin(), caps.end());
      CHECK(h == doctest::Approx(expect));
      auto scaled = caps;
      for (auto& c : scaled) c *= 3.7;
      CHECK(heterogeneity_level(scaled) == doctest::Approx(h));
      std::shuffle(caps.begin(), caps.end(), gen);
      CHECK(heterogeneity_level(caps) == doctest::Approx(h));
    }
  }

  TEST_CASE("mixed clusters use flops") {
    ClusterSpec c;
    c.workers.push_back({"cpu", 16, 2.0});
    c.workers.push_back({"gpu", 1, 18.7, 256, WorkerKind::kGpu});
    CHECK(heterogeneity_level(c) == doctest::Approx(18.7 / 2.0));
  }

  TEST_CASE("empty inputs are rejected") {
    ClusterSpec empty;
    CHECK_THROWS_AS(heterogeneity_level(empty), Error);
    CHECK_THROWS_AS(heterogeneity_level(std::vector<double>{}), Error);
    CHECK_THROWS_AS(empty.validate(), Error);
  }

  TEST_CASE("worker and cluster validation") {
    WorkerSpec w{"x", 0, 1.0};
    CHECK_THROWS_AS(w.validate(), Error);
    w = {"x", 2, 0.0};
    CHECK_THROWS_AS(w.validate(), Error);
    w = {"x", 2, 1.0, 0};
    CHECK_THROWS_AS(w.validate(), Error);
    ClusterSpec dup;
    dup.workers = {{"a", 1, 1.0}, {"a", 2, 2.0}};
    CHECK_THROWS_AS(dup.validate(), Error);
  }

  TEST_CASE("allocation keeps global equal to the sum") {
    BatchAllocation a({"a", "b", "c"}, {10, 20, 30});
    CHECK(a.global() == 60);
    a.set("b", 5);
    CHECK(a.global() == 45);
    a.erase("a");
    CHECK(a.global() == 35);
    CHECK(a.size() == 2);
    a.append("d", 7);
    CHECK(a.global() == 42);
    CHECK(a.at("d") == 7);
    CHECK(a.index_of("c") == 1);
    CHECK_FALSE(a.contains("a"));
    CHECK(a.as_map() == std::map<WorkerId, std::int64_t>{{"b", 5}, {"c", 30}, {"d", 7}});
  }

  TEST_CASE("allocation rejects bad sizes and ids") {
    CHECK_THROWS_AS(BatchAllocation({"a"}, {0}), Error);
    CHECK_THROWS_AS(BatchAllocation({"a", "a"}, {1, 2}), Error);
    CHECK_THROWS_AS(BatchAllocation({"a", "b"}, {1}), Error);
    BatchAllocation a({"a"}, {3});
    CHECK_THROWS_AS(a.set("a", 0), Error);
    CHECK_THROWS_AS(a.append("a", 1), Error);
    CHECK_THROWS_AS(a.at("zz"), Error);
  }

  TEST_CASE("error codes carry names") {
    Error e(ErrorCode::kClusterExhausted, "gone");
    CHECK(e.code() == ErrorCode::kClusterExhausted);
    CHECK(std::string(error_code_name(e.code())) == "cluster-exhausted");
  }
}
