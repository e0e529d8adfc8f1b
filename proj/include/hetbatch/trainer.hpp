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
#include <vector>

#include "hetbatch/core.hpp"

namespace hetbatch {

enum class ModelKind { kLinearRegression, kLogisticRegression };

const char* to_string(ModelKind kind);

struct ModelSpec {
  ModelKind kind = ModelKind::kLinearRegression;
  int dim = 1;
  std::vector<double> params;
  // Learning rate.
  double eta = 0.1;

  static ModelSpec zeros(ModelKind kind, int dim, double eta);
  void validate() const;
};

/// Seeded synthetic data: features ~ N(0,1), ground-truth weights ~ N(0,1).
/// Linear targets add N(0, noise_sigma^2); logistic labels are Bernoulli
/// draws of sigmoid(x . w).
struct DatasetRecipe {
  ModelKind kind = ModelKind::kLinearRegression;
  std::int64_t n = 2000;
  int dim = 10;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  bool operator==(const DatasetRecipe&) const = default;
};

struct Dataset {
  std::int64_t n = 0;
  int dim = 0;
  // Row-major n x dim.
  std::vector<double> features;
  std::vector<double> targets;
  std::vector<double> true_weights;

  std::span<const double> row(std::int64_t i) const {
    return {features.data() + i * dim, static_cast<std::size_t>(dim)};
  }
};

Dataset make_dataset(const DatasetRecipe& recipe);

struct GradientUpdate {
  WorkerId worker;
  // Mean of per-sample loss gradients over the worker's mini-batch.
  std::vector<double> grad;
  std::int64_t batch = 0;
  std::int64_t model_version_read = 0;
};

/// Mean loss over the given samples (all samples when `indices` is empty).
double mean_loss(const ModelSpec& model, const Dataset& data,
                 std::span<const std::int64_t> indices = {});

GradientUpdate worker_gradient(const ModelSpec& model, const Dataset& data,
                               std::span<const std::int64_t> indices,
                               const WorkerId& worker = {});

/// sum_k lambda_k * grad_k with lambda_k = b_k / sum_i b_i, which is exactly
/// the mean gradient over the union of the workers' mini-batches.
std::vector<double> weighted_aggregate(std::span<const GradientUpdate> updates);

/// params -= step * agg_grad. Throws kNumericalFailure on non-finite input
/// or result.
void sgd_step(ModelSpec& model, std::span<const double> agg_grad, double step);
inline void sgd_step(ModelSpec& model, std::span<const double> agg_grad) {
  sgd_step(model, agg_grad, model.eta);
}

/// kWeightedMean steps by eta * aggregate, which reduces to textbook
/// mini-batch SGD on the global batch. kLiteral additionally divides the
/// step by the number of workers.
enum class AggregationScaling { kWeightedMean, kLiteral };

const char* to_string(AggregationScaling scaling);

struct TrainConfig {
  std::int64_t iterations = 500;
  AggregationScaling scaling = AggregationScaling::kWeightedMean;
  // eta_t = eta / (1 + lr_decay * t).
  double lr_decay = 0.0;
  // Seeds the per-epoch shuffle of sample order.
  std::uint64_t seed = 0;
  bool record_trajectory = false;

  bool operator==(const TrainConfig&) const = default;
};

struct LossPoint {
  std::int64_t iteration = 0;
  double loss = 0.0;
  std::int64_t global_batch = 0;
  BatchAllocation allocation;
  // ASP only: staleness of the commit that produced this point.
  std::int64_t staleness = 0;
};

struct TrainResult {
  std::vector<LossPoint> losses;
  std::vector<double> final_params;
  // Parameters after every step, when requested.
  std::vector<std::vector<double>> trajectory;
};

/// Draws samples without replacement within an epoch, reshuffling (seeded)
/// at each epoch boundary. A request larger than what is left in the epoch
/// starts a new epoch.
class SampleStream {
 public:
  SampleStream(std::int64_t n, std::uint64_t seed);
  std::vector<std::int64_t> take(std::int64_t count);
  std::int64_t epoch() const { return epoch_; }

 private:
  void reshuffle();

  std::int64_t n_;
  std::uint64_t seed_;
  std::int64_t epoch_ = 0;
  std::int64_t cursor_ = 0;
  std::vector<std::int64_t> order_;
};

/// Synchronous data-parallel SGD. Each iteration takes sum(b) samples from
/// the stream and hands worker k the next contiguous b_k of them.
TrainResult train_bsp(ModelSpec model, const Dataset& data,
                      const BatchAllocation& alloc, const TrainConfig& config);

/// Replays an asynchronous commit schedule: each commit's gradient is taken
/// at the parameters of its read version and applied, scaled by
/// b_k / alloc.global(), in schedule order.
TrainResult train_asp(ModelSpec model, const Dataset& data,
                      const BatchAllocation& alloc, std::span<const AspCommit> schedule,
                      const TrainConfig& config);

}  // namespace hetbatch
