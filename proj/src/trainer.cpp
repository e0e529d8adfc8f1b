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

#include "hetbatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "rng.hpp"

namespace hetbatch {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sample_loss(ModelKind kind, double z, double y) {
  if (kind == ModelKind::kLinearRegression) {
    const double r = z - y;
    return 0.5 * r * r;
  }
  return softplus(z) - y * z;
}

// d loss / d z.
double sample_residual(ModelKind kind, double z, double y) {
  return kind == ModelKind::kLinearRegression ? z - y : sigmoid(z) - y;
}

void check_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw Error(ErrorCode::kNumericalFailure, std::string("non-finite ") + what);
    }
  }
}

}  // namespace

const char* to_string(ModelKind kind) {
  return kind == ModelKind::kLogisticRegression ? "logistic" : "linear";
}

const char* to_string(AggregationScaling scaling) {
  return scaling == AggregationScaling::kLiteral ? "literal" : "weighted_mean";
}

ModelSpec ModelSpec::zeros(ModelKind kind, int dim, double eta) {
  ModelSpec m;
  m.kind = kind;
  m.dim = dim;
  m.params.assign(static_cast<std::size_t>(std::max(dim, 0)), 0.0);
  m.eta = eta;
  return m;
}

void ModelSpec::validate() const {
  if (dim < 1) throw Error(ErrorCode::kInvalidInput, "model dim must be >= 1");
  if (params.size() != static_cast<std::size_t>(dim)) {
    throw Error(ErrorCode::kInvalidInput, "model params do not match dim");
  }
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw Error(ErrorCode::kInvalidInput, "learning rate must be > 0");
  }
}

Dataset make_dataset(const DatasetRecipe& recipe) {
  if (recipe.n < 1 || recipe.dim < 1) {
    throw Error(ErrorCode::kInvalidInput, "dataset needs n >= 1 and dim >= 1");
  }
  if (!(recipe.noise_sigma >= 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "dataset noise_sigma must be >= 0");
  }
  detail::Rng rng(recipe.seed);
  Dataset d;
  d.n = recipe.n;
  d.dim = recipe.dim;
  d.true_weights.resize(static_cast<std::size_t>(recipe.dim));
  for (auto& w : d.true_weights) w = rng.normal();
  d.features.resize(static_cast<std::size_t>(recipe.n * recipe.dim));
  for (auto& x : d.features) x = rng.normal();
  d.targets.resize(static_cast<std::size_t>(recipe.n));
  for (std::int64_t i = 0; i < recipe.n; ++i) {
    const double z = dot(d.row(i), d.true_weights);
    if (recipe.kind == ModelKind::kLinearRegression) {
      d.targets[static_cast<std::size_t>(i)] = z + recipe.noise_sigma * rng.normal();
    } else {
      d.targets[static_cast<std::size_t>(i)] = rng.uniform() < sigmoid(z) ? 1.0 : 0.0;
    }
  }
  return d;
}

double mean_loss(const ModelSpec& model, const Dataset& data,
                 std::span<const std::int64_t> indices) {
  double total = 0.0;
  if (indices.empty()) {
    for (std::int64_t i = 0; i < data.n; ++i) {
      total += sample_loss(model.kind, dot(data.row(i), model.params),
                           data.targets[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(data.n);
  }
  for (auto i : indices) {
    total += sample_loss(model.kind, dot(data.row(i), model.params),
                         data.targets[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(indices.size());
}

GradientUpdate worker_gradient(const ModelSpec& model, const Dataset& data,
                               std::span<const std::int64_t> indices,
                               const WorkerId& worker) {
  if (indices.empty()) throw Error(ErrorCode::kInvalidInput, "gradient over an empty batch");
  if (data.dim != model.dim) throw Error(ErrorCode::kInvalidInput, "model/data dim mismatch");
  GradientUpdate u;
  u.worker = worker;
  u.batch = static_cast<std::int64_t>(indices.size());
  u.grad.assign(static_cast<std::size_t>(model.dim), 0.0);
  for (auto i : indices) {
    if (i < 0 || i >= data.n) throw Error(ErrorCode::kInvalidInput, "sample index out of range");
    const auto x = data.row(i);
    const double r = sample_residual(model.kind, dot(x, model.params),
                                     data.targets[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < x.size(); ++j) u.grad[j] += r * x[j];
  }
  const double inv = 1.0 / static_cast<double>(u.batch);
  for (auto& g : u.grad) g *= inv;
  return u;
}

std::vector<double> weighted_aggregate(std::span<const GradientUpdate> updates) {
  if (updates.empty()) throw Error(ErrorCode::kInvalidInput, "aggregate of no updates");
  const auto dim = updates.front().grad.size();
  std::int64_t total = 0;
  for (const auto& u : updates) {
    if (u.grad.size() != dim) throw Error(ErrorCode::kInvalidInput, "gradient dims differ");
    if (u.batch < 0) throw Error(ErrorCode::kInvalidInput, "negative batch in update");
    total += u.batch;
  }
  if (total == 0) throw Error(ErrorCode::kInvalidInput, "aggregate over zero total batch");
  std::vector<double> agg(dim, 0.0);
  for (const auto& u : updates) {
    const double lambda = static_cast<double>(u.batch) / static_cast<double>(total);
    for (std::size_t j = 0; j < dim; ++j) agg[j] += lambda * u.grad[j];
  }
  return agg;
}

void sgd_step(ModelSpec& model, std::span<const double> agg_grad, double step) {
  if (agg_grad.size() != model.params.size()) {
    throw Error(ErrorCode::kInvalidInput, "gradient does not match model dim");
  }
  check_finite(agg_grad, "gradient");
  for (std::size_t j = 0; j < agg_grad.size(); ++j) model.params[j] -= step * agg_grad[j];
  check_finite(model.params, "parameters after update");
}

SampleStream::SampleStream(std::int64_t n, std::uint64_t seed) : n_(n), seed_(seed) {
  if (n < 1) throw Error(ErrorCode::kInvalidInput, "sample stream over an empty dataset");
  order_.resize(static_cast<std::size_t>(n));
  reshuffle();
}

void SampleStream::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::int64_t{0});
  // One generator per epoch keeps epochs independent of request sizes.
  detail::Rng rng(seed_ ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(epoch_ + 1)));
  rng.shuffle(order_.begin(), order_.end());
  cursor_ = 0;
}

std::vector<std::int64_t> SampleStream::take(std::int64_t count) {
  if (count < 1 || count > n_) {
    throw Error(ErrorCode::kInvalidInput,
                "cannot draw " + std::to_string(count) + " samples from " +
                    std::to_string(n_) + " without replacement");
  }
  if (cursor_ + count > n_) {
    ++epoch_;
    reshuffle();
  }
  std::vector<std::int64_t> out(order_.begin() + cursor_, order_.begin() + cursor_ + count);
  cursor_ += count;
  return out;
}

namespace {

double step_size(const ModelSpec& model, const TrainConfig& config, std::int64_t t) {
  return model.eta / (1.0 + config.lr_decay * static_cast<double>(t));
}

}  // namespace

TrainResult train_bsp(ModelSpec model, const Dataset& data,
                      const BatchAllocation& alloc, const TrainConfig& config) {
  model.validate();
  if (alloc.empty()) throw Error(ErrorCode::kInvalidInput, "training needs an allocation");
  if (alloc.global() > data.n) {
    throw Error(ErrorCode::kInvalidInput,
                "global batch " + std::to_string(alloc.global()) + " exceeds dataset size " +
                    std::to_string(data.n));
  }
  if (!(config.lr_decay >= 0.0)) throw Error(ErrorCode::kInvalidInput, "lr_decay must be >= 0");

  SampleStream stream(data.n, config.seed);
  const double k = static_cast<double>(alloc.size());
  TrainResult out;
  out.losses.reserve(static_cast<std::size_t>(config.iterations));
  std::vector<GradientUpdate> updates(alloc.size());
  for (std::int64_t t = 0; t < config.iterations; ++t) {
    const auto batch = stream.take(alloc.global());
    std::size_t offset = 0;
    for (std::size_t w = 0; w < alloc.size(); ++w) {
      const auto b = static_cast<std::size_t>(alloc.sizes()[w]);
      updates[w] = worker_gradient(model, data, std::span(batch).subspan(offset, b), alloc.ids()[w]);
      offset += b;
    }
    const auto agg = weighted_aggregate(updates);
    double step = step_size(model, config, t);
    if (config.scaling == AggregationScaling::kLiteral) step /= k;
    sgd_step(model, agg, step);
    if (config.record_trajectory) out.trajectory.push_back(model.params);
    out.losses.push_back({t, mean_loss(model, data), alloc.global(), alloc, 0});
  }
  out.final_params = model.params;
  return out;
}

TrainResult train_asp(ModelSpec model, const Dataset& data,
                      const BatchAllocation& alloc, std::span<const AspCommit> schedule,
                      const TrainConfig& config) {
  model.validate();
  if (alloc.empty()) throw Error(ErrorCode::kInvalidInput, "training needs an allocation");
  std::int64_t lookback = 0;
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& c = schedule[i];
    const auto version = static_cast<std::int64_t>(i);
    if (c.read_version < 0 || c.read_version > version) {
      throw Error(ErrorCode::kInvalidInput,
                  "commit " + std::to_string(i) + " reads a version that does not exist yet");
    }
    if (c.batch < 1 || c.batch > data.n) {
      throw Error(ErrorCode::kInvalidInput, "commit " + std::to_string(i) + " has a bad batch");
    }
    lookback = std::max(lookback, version - c.read_version);
  }

  SampleStream stream(data.n, config.seed);
  const double global = static_cast<double>(alloc.global());
  const double k = static_cast<double>(alloc.size());
  // versions.front() holds version `oldest`.
  std::deque<std::vector<double>> versions{model.params};
  std::int64_t oldest = 0;
  TrainResult out;
  out.losses.reserve(schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& c = schedule[i];
    const auto version = static_cast<std::int64_t>(i);
    ModelSpec reader = model;
    reader.params = versions[static_cast<std::size_t>(c.read_version - oldest)];
    const auto samples = stream.take(c.batch);
    const auto update = worker_gradient(reader, data, samples, c.worker);
    double step = step_size(model, config, version) * static_cast<double>(c.batch) / global;
    if (config.scaling == AggregationScaling::kLiteral) step /= k;
    sgd_step(model, update.grad, step);

    versions.push_back(model.params);
    while (static_cast<std::int64_t>(versions.size()) > lookback + 1) {
      versions.pop_front();
      ++oldest;
    }
    if (config.record_trajectory) out.trajectory.push_back(model.params);
    out.losses.push_back({version, mean_loss(model, data), alloc.global(), alloc,
                          version - c.read_version});
  }
  out.final_params = model.params;
  return out;
}

}  // namespace hetbatch
