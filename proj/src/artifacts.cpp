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

#include "ringfed/artifacts.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace ringfed {

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string());
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string format_metric(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string history_csv(const std::vector<RunHistory>& runs) {
  std::ostringstream os;
  os << "run_id,schedule,use_si,center,round,cum_epochs,sensitivity,precision,afpr,dsc,"
        "transfers_so_far,bytes_so_far\n";
  for (const RunHistory& run : runs)
    for (const VisitSnapshot& s : run.snapshots)
      os << run.run_id << "," << schedule_kind_name(run.kind) << "," << (run.use_si ? 1 : 0) << ","
         << s.center << "," << s.round << "," << s.cum_epochs << ","
         << format_metric(s.metrics.sensitivity) << "," << format_metric(s.metrics.precision)
         << "," << format_metric(s.metrics.afpr) << "," << format_metric(s.metrics.mean_tp_dsc)
         << "," << s.transfers_so_far << "," << s.bytes_so_far << "\n";
  return os.str();
}

std::string ledger_csv(const RunHistory& run) {
  std::ostringstream os;
  os << "seq,from,to,bytes,round\n";
  for (std::size_t i = 0; i < run.ledger.events.size(); ++i) {
    const CommEvent& e = run.ledger.events[i];
    os << i << "," << e.from << "," << e.to << "," << e.bytes << "," << e.round << "\n";
  }
  return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "fraction,seed,volumes,sensitivity,precision,afpr,dsc,small_tp_ratio\n";
  for (const SweepRow& r : rows)
    os << format_metric(r.fraction) << "," << r.seed << "," << r.volumes << ","
       << format_metric(r.metrics.sensitivity) << "," << format_metric(r.metrics.precision) << ","
       << format_metric(r.metrics.afpr) << "," << format_metric(r.metrics.mean_tp_dsc) << ","
       << format_metric(r.metrics.small_tp_ratio) << "\n";
  return os.str();
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::pair<double, double>> per_fraction_median(const std::vector<SweepRow>& rows,
                                                           double MetricsReport::*field) {
  std::map<double, std::vector<double>> by_fraction;
  for (const SweepRow& r : rows) by_fraction[r.fraction].push_back(r.metrics.*field);
  std::vector<std::pair<double, double>> out;
  out.reserve(by_fraction.size());
  for (const auto& [fraction, values] : by_fraction) out.emplace_back(fraction, median(values));
  return out;
}

}  // namespace

std::vector<std::pair<double, double>> sweep_median_sensitivity(const std::vector<SweepRow>& rows) {
  return per_fraction_median(rows, &MetricsReport::sensitivity);
}

std::vector<std::pair<double, double>> sweep_median_small_ratio(const std::vector<SweepRow>& rows) {
  return per_fraction_median(rows, &MetricsReport::small_tp_ratio);
}

std::string sweep_summary_csv(const std::vector<SweepRow>& rows) {
  const auto sens = sweep_median_sensitivity(rows);
  const auto small = sweep_median_small_ratio(rows);
  std::ostringstream os;
  os << "fraction,median_sensitivity,median_small_tp_ratio\n";
  for (std::size_t i = 0; i < sens.size(); ++i)
    os << format_metric(sens[i].first) << "," << format_metric(sens[i].second) << ","
       << format_metric(small[i].second) << "\n";
  return os.str();
}

}  // namespace ringfed
