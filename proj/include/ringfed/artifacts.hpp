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

#include <filesystem>
#include <string>
#include <vector>

#include "ringfed/federation.hpp"

namespace ringfed {

inline constexpr const char* kToolVersion = "0.1.0";

/// Write-then-rename so partially written artifacts never appear.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string history_csv(const std::vector<RunHistory>& runs);
std::string ledger_csv(const RunHistory& run);

struct SweepRow {
  double fraction = 0;
  std::uint64_t seed = 0;
  int volumes = 0;
  MetricsReport metrics;
};

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_summary_csv(const std::vector<SweepRow>& rows);

/// Median sensitivity per fraction, ascending fractions.
std::vector<std::pair<double, double>> sweep_median_sensitivity(const std::vector<SweepRow>& rows);
std::vector<std::pair<double, double>> sweep_median_small_ratio(const std::vector<SweepRow>& rows);

std::string format_metric(double v);

}  // namespace ringfed
