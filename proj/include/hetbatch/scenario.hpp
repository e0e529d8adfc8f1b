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

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hetbatch/allocator.hpp"
#include "hetbatch/simkernel.hpp"
#include "hetbatch/trainer.hpp"

namespace hetbatch {

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr int kTraceSchemaVersion = 1;

enum class RunMode { kSimulate, kTrain, kBoth };

const char* to_string(RunMode mode);

struct PortfolioSection {
  std::vector<VmType> vm_types;
  int demand = 1;
  double alpha = 0.0;
  int max_count = 4;
  bool operator==(const PortfolioSection&) const = default;
};

enum class TrainAllocation { kInitial, kFinal };

struct TrainerSection {
  DatasetRecipe data;
  double eta = 0.1;
  TrainConfig config;
  TrainAllocation allocation = TrainAllocation::kInitial;
  // Loss level used by the iterations-to-loss comparison metric.
  double loss_threshold = 0.0;
  bool operator==(const TrainerSection&) const = default;
};

struct OutputPaths {
  std::string trace = "trace.jsonl";
  std::string summary = "summary.json";
  std::string manifest = "manifest.json";
  std::string loss = "loss.jsonl";
  bool operator==(const OutputPaths&) const = default;
};

/// Parsed scenario document. When a portfolio section is present the
/// cluster is derived from it at run time and `scenario.cluster.workers` is
/// left empty.
struct ScenarioFile {
  std::string name;
  RunMode mode = RunMode::kSimulate;
  Scenario scenario;
  std::optional<PortfolioSection> portfolio;
  std::optional<TrainerSection> trainer;
  OutputPaths output;

  bool operator==(const ScenarioFile&) const = default;
};

/// Parses and schema-checks a JSON scenario. Unknown keys are rejected.
/// Errors are kConfig and name the offending path.
ScenarioFile parse_scenario(std::string_view text);
ScenarioFile load_scenario(const std::string& path);

/// Serializes every field, so parse_scenario(to_text(f)) == f.
std::string to_text(const ScenarioFile& file);

/// Applies "a.b.c=value" style overrides to the document before parsing.
/// Values parse as JSON when possible and as plain strings otherwise.
ScenarioFile parse_scenario(std::string_view text,
                            const std::vector<std::pair<std::string, std::string>>& overrides);

/// Fills in a portfolio-derived cluster and validates the result.
/// Throws kInfeasible when the portfolio has no solution.
Scenario resolve(const ScenarioFile& file);

}  // namespace hetbatch
