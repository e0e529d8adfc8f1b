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

// Command-line front end: run, compare and validate scenario files.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hetbatch/hetbatch.h"

namespace {

struct Common {
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

int report(hb_status st) {
  std::cerr << "hetbatch: " << hb_status_name(st) << ": " << hb_last_error() << "\n";
  return hb_exit_code(st);
}

// Loads a scenario and applies --override / --seed. Returns nullptr after
// printing the error; `code` then holds the exit code.
hb_scenario* open_scenario(const std::string& path, const Common& opts, int& code) {
  hb_scenario* s = nullptr;
  hb_status st = hb_scenario_load(path.c_str(), &s);
  if (st != HB_OK) {
    code = report(st);
    return nullptr;
  }
  for (const auto& kv : opts.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "hetbatch: override '" << kv << "' is not key=value\n";
      hb_scenario_free(s);
      code = hb_exit_code(HB_ERR_CONFIG);
      return nullptr;
    }
    hb_scenario_override(s, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
  }
  if (opts.seed) hb_scenario_set_seed(s, *opts.seed);
  st = hb_scenario_apply(s);
  if (st != HB_OK) {
    code = report(st);
    hb_scenario_free(s);
    return nullptr;
  }
  return s;
}

void add_common(CLI::App* cmd, Common& opts) {
  cmd->add_option("--override,-O", opts.overrides, "Override a scenario value (dotted.key=value)")
      ->allow_extra_args(false);
  cmd->add_option("--seed", opts.seed, "Replace the scenario seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable mini-batch simulation and training for heterogeneous clusters"};
  app.set_version_flag("--version", std::string(hb_version()));
  app.require_subcommand(1);

  Common run_opts;
  std::string run_path;
  std::string out_dir = "out";
  auto* run = app.add_subcommand("run", "Run a scenario and write trace, summary and manifest");
  run->add_option("scenario", run_path, "Scenario file (JSON)")->required();
  run->add_option("--out,-o", out_dir, "Output directory")->capture_default_str();
  add_common(run, run_opts);

  Common cmp_opts;
  std::string cmp_a, cmp_b, metric = "total_time";
  auto* cmp = app.add_subcommand("compare", "Run two scenarios and report the metric ratio a/b");
  cmp->add_option("a", cmp_a, "First scenario")->required();
  cmp->add_option("b", cmp_b, "Second scenario")->required();
  cmp->add_option("--metric,-m", metric, "total_time, mean_makespan or iterations_to_loss")
      ->check(CLI::IsMember({"total_time", "mean_makespan", "iterations_to_loss"}))
      ->capture_default_str();
  add_common(cmp, cmp_opts);

  Common val_opts;
  std::string val_path;
  bool print = false;
  auto* val = app.add_subcommand("validate", "Check a scenario without running it");
  val->add_option("scenario", val_path, "Scenario file (JSON)")->required();
  val->add_flag("--print", print, "Print the canonical form of the scenario");
  add_common(val, val_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : hb_exit_code(HB_ERR_CONFIG);
  }

  int code = 0;
  if (*run) {
    hb_scenario* s = open_scenario(run_path, run_opts, code);
    if (!s) return code;
    hb_result* r = nullptr;
    const hb_status st = hb_run(s, out_dir.c_str(), &r);
    if (r == nullptr) {
      code = report(st);
    } else {
      code = hb_result_exit_code(r);
      if (st != HB_OK) {
        report(st);
      } else {
        std::cout << "wrote " << out_dir << " (" << hb_result_iterations(r) << " iterations, "
                  << hb_result_adjustments(r) << " adjustments)\n";
      }
    }
    hb_result_free(r);
    hb_scenario_free(s);
    return code;
  }

  if (*cmp) {
    hb_scenario* a = open_scenario(cmp_a, cmp_opts, code);
    if (!a) return code;
    hb_scenario* b = open_scenario(cmp_b, cmp_opts, code);
    if (!b) {
      hb_scenario_free(a);
      return code;
    }
    char* text = nullptr;
    const hb_status st = hb_compare(a, b, metric.c_str(), nullptr, nullptr, nullptr, &text);
    if (st == HB_OK) {
      std::cout << text;
    } else {
      code = report(st);
    }
    hb_free(text);
    hb_scenario_free(a);
    hb_scenario_free(b);
    return code;
  }

  hb_scenario* s = open_scenario(val_path, val_opts, code);
  if (!s) return code;
  const hb_status st = hb_scenario_validate(s);
  if (st != HB_OK) {
    code = report(st);
  } else if (print) {
    const char* text = nullptr;
    hb_scenario_text(s, &text);
    std::cout << text;
  } else {
    std::cout << val_path << ": ok\n";
  }
  hb_scenario_free(s);
  return code;
}
