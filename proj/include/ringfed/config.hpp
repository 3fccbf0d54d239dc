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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ringfed/federation.hpp"
#include "ringfed/synthdata.hpp"

namespace ringfed {

/// Everything one experiment needs. The defaults ARE the bundled seven-center
/// scenario; scenario files override individual keys. Parsing is strict:
/// unknown sections or keys and out-of-range values are rejected before any
/// compute happens.
struct ScenarioConfig {
  TaskSpec task;

  int n_centers = 7;
  int volumes_per_center = 30;
  int validation_volumes = 10;
  int test_volumes = 30;
  ShiftRanges shifts;

  RunConfig run;
  Schedule schedule;

  std::uint64_t master_seed = 1;
  int repeats = 1;

  std::string output_dir = "out";
  std::vector<double> sweep_fractions = {0.125, 0.25, 0.5, 1.0};

  /// Raw file text as parsed; hashed into the manifest.
  std::string raw_text;
  std::string source_name;
};

ScenarioConfig parse_scenario_text(const std::string& text, const std::string& source_name);
ScenarioConfig parse_scenario_file(const std::filesystem::path& path);

/// Cross-field checks shared by the parser and programmatic construction.
void validate_scenario(const ScenarioConfig& cfg);

/// FNV-1a of the raw config text, as a fixed-width hex string.
std::string config_hash_hex(const std::string& raw_text);

}  // namespace ringfed
