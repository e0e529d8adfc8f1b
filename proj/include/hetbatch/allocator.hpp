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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hetbatch/core.hpp"

namespace hetbatch {

enum class CapacityPolicy { kCores, kFlops };

const char* to_string(CapacityPolicy policy);

/// Splits `total` into integers proportional to `weights` using the
/// largest-remainder method, so the parts always sum to `total`.
///
/// Leftover units go to the largest fractional remainders; ties prefer the
/// larger target share, then the later position. Any part that would round
/// to zero is raised to 1, taking the unit from the currently largest part.
/// Requires total >= weights.size() and every weight > 0.
std::vector<std::int64_t> apportion(std::int64_t total,
                                    std::span<const double> weights);

/// Open-loop allocation: each worker gets a share of K*b0 proportional to
/// its capacity, where b0 is the conventional uniform mini-batch.
std::vector<std::int64_t> static_allocation(std::int64_t b0,
                                            std::span<const double> capacities);

double capacity_estimate(const WorkerSpec& spec, CapacityPolicy policy);

/// Flops whenever a GPU worker is present, otherwise `requested`.
CapacityPolicy effective_policy(const ClusterSpec& cluster,
                                CapacityPolicy requested);

std::vector<double> capacities(const ClusterSpec& cluster, CapacityPolicy policy);

BatchAllocation static_allocation(const ClusterSpec& cluster, std::int64_t b0,
                                  CapacityPolicy policy = CapacityPolicy::kCores);

struct VmType {
  std::string name;
  int cores = 1;
  double flops = 1.0;
  std::int64_t mem_capacity = 1 << 20;
  WorkerKind kind = WorkerKind::kCpu;
  double cost_rate = 0.0;
  // Probability that every VM of this type is preempted together in an epoch.
  double preempt_prob = 0.0;

  void validate() const;
  bool operator==(const VmType&) const = default;
};

struct PortfolioCandidate {
  // counts[i] is the number of VMs of types[i].
  std::vector<int> counts;
  double cost = 0.0;
  double risk = 0.0;

  double objective(double alpha) const { return cost + alpha * risk; }
  int distinct_types() const;
  int total_cores(std::span<const VmType> types) const;
  bool operator==(const PortfolioCandidate&) const = default;
};

/// Cost is the summed hourly rate; risk is the probability that every used
/// type is preempted at once, with types independent.
PortfolioCandidate evaluate_portfolio(std::span<const VmType> types,
                                      std::vector<int> counts);

/// Strict ordering used to pick among portfolios: objective, then cost, then
/// number of distinct types, then counts lexicographically.
bool portfolio_better(const PortfolioCandidate& a, const PortfolioCandidate& b,
                      double alpha);

/// Cheapest-risk-adjusted VM mix with at least `demand` cores and at most
/// `max_count` VMs per type. Throws kInfeasible when nothing qualifies.
PortfolioCandidate select_portfolio(std::span<const VmType> types,
                                    int demand, double alpha,
                                    int max_count = 4);

/// Expands a portfolio into concrete workers named "<type>-<n>" and sizes
/// their mini-batches by core count (FLOPs when a GPU type is used).
std::pair<ClusterSpec, BatchAllocation> portfolio_to_allocation(
    const PortfolioCandidate& portfolio, std::span<const VmType> types,
    std::int64_t b0);

}  // namespace hetbatch
