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

#include "hetbatch/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hetbatch {
namespace {

constexpr double kTieEps = 1e-9;

bool nearly_equal(double a, double b) {
  return std::abs(a - b) <= kTieEps * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace

const char* to_string(CapacityPolicy policy) {
  return policy == CapacityPolicy::kFlops ? "flops" : "cores";
}

std::vector<std::int64_t> apportion(std::int64_t total,
                                    std::span<const double> weights) {
  const auto k = static_cast<std::int64_t>(weights.size());
  if (k == 0) throw Error(ErrorCode::kInvalidInput, "apportion over no workers");
  if (total < k) {
    throw Error(ErrorCode::kInvalidInput,
                "global batch " + std::to_string(total) +
                    " cannot give every one of " + std::to_string(k) +
                    " workers at least one sample");
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidInput, "apportion weights must be positive");
    }
    sum += w;
  }

  const auto n = weights.size();
  std::vector<double> target(n);
  std::vector<std::int64_t> parts(n);
  std::vector<double> remainder(n);
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    target[i] = static_cast<double>(total) * weights[i] / sum;
    // Absorb round-off just below an integer.
    parts[i] = static_cast<std::int64_t>(std::floor(target[i] + kTieEps));
    remainder[i] = std::max(0.0, target[i] - static_cast<double>(parts[i]));
    assigned += parts[i];
  }

  // Leftover units go to the largest remainders.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (!nearly_equal(remainder[a], remainder[b])) return remainder[a] > remainder[b];
    if (!nearly_equal(target[a], target[b])) return target[a] > target[b];
    return a > b;
  });
  std::int64_t leftover = total - assigned;
  for (std::size_t j = 0; leftover > 0; j = (j + 1) % n, --leftover) {
    ++parts[order[j]];
  }
  for (std::size_t j = n; leftover < 0; --leftover) {
    // Only reachable through round-off; take back from the smallest remainders.
    do {
      j = (j == 0 ? n : j) - 1;
    } while (parts[order[j]] == 0);
    --parts[order[j]];
  }

  // Minimum of one sample per worker, rebalanced from the largest part.
  for (std::size_t i = 0; i < n; ++i) {
    if (parts[i] > 0) continue;
    std::size_t donor = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (parts[j] <= 1) continue;
      if (donor == n || parts[j] > parts[donor] ||
          (parts[j] == parts[donor] && target[j] > target[donor])) {
        donor = j;
      }
    }
    --parts[donor];
    parts[i] = 1;
  }
  return parts;
}

std::vector<std::int64_t> static_allocation(std::int64_t b0,
                                            std::span<const double> capacities) {
  if (capacities.empty()) {
    throw Error(ErrorCode::kInvalidInput, "static allocation over no workers");
  }
  if (b0 < 1) throw Error(ErrorCode::kInvalidInput, "b0 must be >= 1");
  return apportion(b0 * static_cast<std::int64_t>(capacities.size()), capacities);
}

double capacity_estimate(const WorkerSpec& spec, CapacityPolicy policy) {
  return policy == CapacityPolicy::kFlops ? spec.flops
                                          : static_cast<double>(spec.cores);
}

CapacityPolicy effective_policy(const ClusterSpec& cluster,
                                CapacityPolicy requested) {
  return cluster.has_gpu() ? CapacityPolicy::kFlops : requested;
}

std::vector<double> capacities(const ClusterSpec& cluster, CapacityPolicy policy) {
  const auto effective = effective_policy(cluster, policy);
  std::vector<double> caps;
  caps.reserve(cluster.workers.size());
  for (const auto& w : cluster.workers) caps.push_back(capacity_estimate(w, effective));
  return caps;
}

BatchAllocation static_allocation(const ClusterSpec& cluster, std::int64_t b0,
                                  CapacityPolicy policy) {
  cluster.validate();
  auto sizes = static_allocation(b0, capacities(cluster, policy));
  std::vector<WorkerId> ids;
  ids.reserve(cluster.workers.size());
  for (const auto& w : cluster.workers) ids.push_back(w.id);
  return BatchAllocation(std::move(ids), std::move(sizes));
}

void VmType::validate() const {
  if (name.empty()) throw Error(ErrorCode::kInvalidInput, "vm type without a name");
  if (cores < 1 || !(flops > 0.0) || mem_capacity < 1) {
    throw Error(ErrorCode::kInvalidInput, "vm type '" + name + "' has invalid resources");
  }
  if (!(cost_rate >= 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "vm type '" + name + "': cost_rate < 0");
  }
  if (!(preempt_prob >= 0.0 && preempt_prob <= 1.0)) {
    throw Error(ErrorCode::kInvalidInput,
                "vm type '" + name + "': preempt_prob outside [0,1]");
  }
}

int PortfolioCandidate::distinct_types() const {
  return static_cast<int>(std::count_if(counts.begin(), counts.end(),
                                        [](int c) { return c > 0; }));
}

int PortfolioCandidate::total_cores(std::span<const VmType> types) const {
  int cores = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) cores += counts[i] * types[i].cores;
  return cores;
}

PortfolioCandidate evaluate_portfolio(std::span<const VmType> types,
                                      std::vector<int> counts) {
  PortfolioCandidate c;
  c.risk = 1.0;
  bool any = false;
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (counts[i] <= 0) continue;
    any = true;
    c.cost += counts[i] * types[i].cost_rate;
    c.risk *= types[i].preempt_prob;
  }
  if (!any) c.risk = 0.0;
  c.counts = std::move(counts);
  return c;
}

bool portfolio_better(const PortfolioCandidate& a, const PortfolioCandidate& b,
                      double alpha) {
  const double oa = a.objective(alpha);
  const double ob = b.objective(alpha);
  if (!nearly_equal(oa, ob)) return oa < ob;
  if (!nearly_equal(a.cost, b.cost)) return a.cost < b.cost;
  if (a.distinct_types() != b.distinct_types()) {
    return a.distinct_types() < b.distinct_types();
  }
  return a.counts < b.counts;
}

// For every subset of used types the risk term is fixed, so only the cost has
// to be minimized: a bounded min-cost cover over core counts. The cover is
// solved backwards so that the forward reconstruction can take the smallest
// feasible count per type, which yields the lexicographically smallest
// optimum within the subset.
PortfolioCandidate select_portfolio(std::span<const VmType> types, int demand,
                                    double alpha, int max_count) {
  if (types.empty()) throw Error(ErrorCode::kInvalidInput, "no vm types given");
  if (demand < 1) throw Error(ErrorCode::kInvalidInput, "demand must be >= 1");
  if (max_count < 1) throw Error(ErrorCode::kInvalidInput, "max_count must be >= 1");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::kInvalidInput, "alpha must be >= 0");
  if (types.size() > 20) {
    throw Error(ErrorCode::kInvalidInput, "at most 20 vm types are supported");
  }
  for (const auto& t : types) t.validate();

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t n = types.size();
  const auto width = static_cast<std::size_t>(demand) + 1;
  bool found = false;
  PortfolioCandidate best;

  std::vector<std::size_t> used;
  // best_cost[i][c]: cheapest way for used[i..] to supply c more cores.
  std::vector<std::vector<double>> best_cost;
  for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
    used.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) used.push_back(i);
    }
    best_cost.assign(used.size() + 1, std::vector<double>(width, kInf));
    best_cost[used.size()][0] = 0.0;
    for (std::size_t u = used.size(); u-- > 0;) {
      const auto& t = types[used[u]];
      for (std::size_t c = 0; c < width; ++c) {
        double cheapest = kInf;
        for (int x = 1; x <= max_count; ++x) {
          const auto rest = static_cast<std::size_t>(
              std::max<long long>(0, static_cast<long long>(c) -
                                         static_cast<long long>(x) * t.cores));
          const double sub = best_cost[u + 1][rest];
          if (sub == kInf) continue;
          cheapest = std::min(cheapest, x * t.cost_rate + sub);
        }
        best_cost[u][c] = cheapest;
      }
    }
    if (best_cost[0][static_cast<std::size_t>(demand)] == kInf) continue;

    std::vector<int> counts(n, 0);
    auto need = static_cast<std::size_t>(demand);
    for (std::size_t u = 0; u < used.size(); ++u) {
      const auto& t = types[used[u]];
      for (int x = 1; x <= max_count; ++x) {
        const auto rest = static_cast<std::size_t>(
            std::max<long long>(0, static_cast<long long>(need) -
                                       static_cast<long long>(x) * t.cores));
        const double sub = best_cost[u + 1][rest];
        if (sub == kInf) continue;
        if (nearly_equal(x * t.cost_rate + sub, best_cost[u][need])) {
          counts[used[u]] = x;
          need = rest;
          break;
        }
      }
    }
    auto candidate = evaluate_portfolio(types, std::move(counts));
    if (!found || portfolio_better(candidate, best, alpha)) {
      best = std::move(candidate);
      found = true;
    }
  }
  if (!found) {
    throw Error(ErrorCode::kInfeasible,
                "no portfolio with at most " + std::to_string(max_count) +
                    " VMs per type reaches " + std::to_string(demand) + " cores");
  }
  return best;
}

std::pair<ClusterSpec, BatchAllocation> portfolio_to_allocation(
    const PortfolioCandidate& portfolio, std::span<const VmType> types,
    std::int64_t b0) {
  if (portfolio.counts.size() != types.size()) {
    throw Error(ErrorCode::kInvalidInput, "portfolio does not match vm types");
  }
  ClusterSpec cluster;
  for (std::size_t i = 0; i < types.size(); ++i) {
    for (int j = 0; j < portfolio.counts[i]; ++j) {
      WorkerSpec w;
      w.id = types[i].name + "-" + std::to_string(j);
      w.cores = types[i].cores;
      w.flops = types[i].flops;
      w.mem_capacity = types[i].mem_capacity;
      w.kind = types[i].kind;
      cluster.workers.push_back(std::move(w));
    }
  }
  if (cluster.workers.empty()) {
    throw Error(ErrorCode::kInfeasible, "portfolio contains no VMs");
  }
  auto alloc = static_allocation(cluster, b0, CapacityPolicy::kCores);
  return {std::move(cluster), std::move(alloc)};
}

}  // namespace hetbatch
