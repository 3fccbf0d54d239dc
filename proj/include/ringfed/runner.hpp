/*
 * Copyright 2026 RingFed Contributors
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

#include "ringfed/artifacts.hpp"
#include "ringfed/config.hpp"

namespace ringfed {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int workers = 1;
  bool no_plots = false;
};

struct RunOutput {
  std::filesystem::path out_dir;
  std::vector<RunHistory> histories;
  std::vector<SweepRow> sweep_rows;
  std::vector<std::filesystem::path> files;
};

/// Execute the configured schedule for each repeat seed and write all
/// artifacts (history CSV, per-run ledger CSVs, final checkpoints, plots,
/// manifest). Fully deterministic for a given (config, tool version).
RunOutput run_scenario(const ScenarioConfig& cfg, const RunOverrides& ov = {});

/// One mixed model per fraction of the pooled training set, per repeat seed.
RunOutput sweep_scenario(const ScenarioConfig& cfg, const RunOverrides& ov = {});

/// Join previously produced runs (located through each config's output dir)
/// into one long CSV and one overlay plot. Refuses mismatched test sets.
RunOutput compare_runs(const std::vector<std::filesystem::path>& config_paths,
                       const RunOverrides& ov = {});

}  // namespace ringfed
