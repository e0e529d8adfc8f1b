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
#include <utility>
#include <vector>

#include "hetbatch/scenario.hpp"

namespace hetbatch {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitExhausted = 4;
inline constexpr int kExitNumerical = 5;

int exit_code_for(ErrorCode code);

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct RunOutcome {
  int exit_code = kExitOk;
  std::optional<ErrorCode> error;
  std::string message;
  std::optional<SimResult> sim;
  std::optional<TrainResult> train;
  // Rows streamed before a failure; equals sim->traces.size() on success.
  std::int64_t rows_emitted = 0;
  // First iteration whose loss is at or below the trainer threshold, or -1.
  std::int64_t iterations_to_loss = -1;
  std::string trace_text;
  std::string summary_text;
  std::string loss_text;
};

/// Runs a parsed scenario in memory. Never throws for run-time failures;
/// they land in the outcome with whatever was produced before them.
RunOutcome execute(const ScenarioFile& file);

/// Loads, applies overrides and an optional seed, runs, and writes the
/// trace, summary, loss and manifest files under `out_dir`. Output files are
/// written even when the run fails.
RunOutcome run(const std::string& scenario_path, const Overrides& overrides,
               std::optional<std::uint64_t> seed, const std::string& out_dir);

/// Same as run() for an already parsed scenario.
RunOutcome run_file(const ScenarioFile& file, const std::string& out_dir);

enum class CompareMetric { kTotalTime, kMeanMakespan, kIterationsToLoss };

const char* to_string(CompareMetric metric);
CompareMetric parse_metric(const std::string& name);

struct CompareReport {
  CompareMetric metric = CompareMetric::kTotalTime;
  double value_a = 0.0;
  double value_b = 0.0;
  // value_a / value_b.
  double ratio = 0.0;
  std::string text;
};

/// Runs both scenarios concurrently and reports value_a / value_b.
CompareReport compare(const ScenarioFile& a, const ScenarioFile& b, CompareMetric metric);

}  // namespace hetbatch
