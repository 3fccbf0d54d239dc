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

#include "ringfed/runner.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ringfed/checkpoint.hpp"
#include "ringfed/svgplot.hpp"

namespace ringfed {

namespace {

using nlohmann::json;

/// Run jobs 0..n-1 on up to `workers` threads; exceptions resurface on the
/// caller. Results must be written into preallocated slots by index so the
/// output order never depends on completion order.
void parallel_for(int n, int workers, const std::function<void(int)>& job) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      try {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Scenario build_from_config(const ScenarioConfig& cfg, std::uint64_t seed) {
  return build_scenario(cfg.task, cfg.n_centers, cfg.volumes_per_center, cfg.validation_volumes,
                        cfg.test_volumes, default_shifts(cfg.n_centers, cfg.shifts), seed);
}

std::filesystem::path resolve_out_dir(const ScenarioConfig& cfg, const RunOverrides& ov) {
  if (ov.out_dir) return *ov.out_dir;
  return cfg.output_dir;
}

json manifest_base(const ScenarioConfig& cfg) {
  json m;
  m["tool_version"] = kToolVersion;
  m["config_hash"] = config_hash_hex(cfg.raw_text);
  m["config_source"] = cfg.source_name;
  m["schedule"] = schedule_kind_name(cfg.schedule.kind);
  m["use_si"] = cfg.schedule.use_si;
  return m;
}

void write_plot(const std::filesystem::path& path, const LineChart& chart, bool no_plots,
                std::vector<std::filesystem::path>& files) {
  if (no_plots) return;
  try {
    atomic_write(path, render_line_chart(chart));
    files.push_back(path);
  } catch (const std::exception& e) {
    // Plots are conveniences; the CSV twin has already been written.
    std::fprintf(stderr, "warning: plot generation failed (%s); CSV output is complete\n",
                 e.what());
  }
}

struct HistoryRow {
  std::string source, run_id, schedule;
  int use_si = 0, center = 0, round = 0;
  long cum_epochs = 0;
  double sensitivity = 0, precision = 0, afpr = 0, dsc = 0;
  long transfers = 0;
  std::uint64_t bytes = 0;
};

std::vector<HistoryRow> read_history_csv(const std::filesystem::path& path,
                                         const std::string& source) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<HistoryRow> rows;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw IoError("bad history row in " + path.string());
    HistoryRow r;
    r.source = source;
    r.run_id = cells[0];
    r.schedule = cells[1];
    r.use_si = std::stoi(cells[2]);
    r.center = std::stoi(cells[3]);
    r.round = std::stoi(cells[4]);
    r.cum_epochs = std::stol(cells[5]);
    r.sensitivity = std::stod(cells[6]);
    r.precision = std::stod(cells[7]);
    r.afpr = std::stod(cells[8]);
    r.dsc = std::stod(cells[9]);
    r.transfers = std::stol(cells[10]);
    r.bytes = std::stoull(cells[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

RunOutput run_scenario(const ScenarioConfig& cfg, const RunOverrides& ov) {
  RunOutput out;
  out.out_dir = resolve_out_dir(cfg, ov);
  std::filesystem::create_directories(out.out_dir);
  const std::uint64_t base_seed = ov.seed ? *ov.seed : cfg.master_seed;

  std::vector<std::vector<RunHistory>> slots(static_cast<std::size_t>(cfg.repeats));
  parallel_for(cfg.repeats, ov.workers, [&](int r) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(r);
    Scenario scenario = build_from_config(cfg, seed);
    std::vector<RunHistory>& runs = slots[static_cast<std::size_t>(r)];
    switch (cfg.schedule.kind) {
      case ScheduleKind::Isolated:
        runs = run_isolated(scenario, cfg.schedule, cfg.run, seed);
        break;
      case ScheduleKind::Svcl:
        runs.push_back(run_svcl(scenario, cfg.schedule, cfg.run, seed));
        break;
      case ScheduleKind::Icl:
        runs.push_back(run_icl(scenario, cfg.schedule, cfg.run, seed));
        break;
      case ScheduleKind::Mixed:
        runs.push_back(run_mixed(scenario, cfg.schedule, cfg.run, seed));
        break;
    }
  });
  for (auto& slot : slots)
    for (auto& h : slot) out.histories.push_back(std::move(h));

  const auto history_path = out.out_dir / "history.csv";
  atomic_write(history_path, history_csv(out.histories));
  out.files.push_back(history_path);

  json m = manifest_base(cfg);
  json seeds = json::array();
  json test_hashes = json::object();
  json run_files = json::array();
  run_files.push_back("history.csv");
  for (RunHistory& run : out.histories) {
    const auto ledger_path = out.out_dir / ("ledger_" + run.run_id + ".csv");
    atomic_write(ledger_path, ledger_csv(run));
    out.files.push_back(ledger_path);
    run_files.push_back(ledger_path.filename().string());
    const auto ckpt_path = out.out_dir / ("checkpoint_" + run.run_id + ".rfcl");
    save_checkpoint(ckpt_path, run.final_model,
                    run.final_si.has_value() ? &*run.final_si : nullptr);
    out.files.push_back(ckpt_path);
    run_files.push_back(ckpt_path.filename().string());
    seeds.push_back(run.seed);
    char hash_hex[20];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(run.test_hash));
    test_hashes[std::to_string(run.seed)] = hash_hex;
  }
  m["seeds"] = seeds;
  m["test_hashes"] = test_hashes;
  m["files"] = run_files;
  atomic_write(out.out_dir / "manifest.json", m.dump(2) + "\n");
  out.files.push_back(out.out_dir / "manifest.json");

  LineChart chart;
  chart.title = "sensitivity on the global test set";
  chart.x_label = "cumulative epochs";
  chart.y_label = "sensitivity";
  for (const RunHistory& run : out.histories) {
    PlotSeries s;
    s.label = run.run_id;
    for (const VisitSnapshot& snap : run.snapshots) {
      s.x.push_back(static_cast<double>(snap.cum_epochs));
      s.y.push_back(snap.metrics.sensitivity);
    }
    chart.series.push_back(std::move(s));
  }
  write_plot(out.out_dir / "sensitivity.svg", chart, ov.no_plots, out.files);
  return out;
}

RunOutput sweep_scenario(const ScenarioConfig& cfg, const RunOverrides& ov) {
  RunOutput out;
  out.out_dir = resolve_out_dir(cfg, ov);
  std::filesystem::create_directories(out.out_dir);
  const std::uint64_t base_seed = ov.seed ? *ov.seed : cfg.master_seed;

  std::vector<double> fractions = cfg.sweep_fractions;
  std::sort(fractions.begin(), fractions.end());
  const int jobs = static_cast<int>(fractions.size()) * cfg.repeats;
  std::vector<SweepRow> rows(static_cast<std::size_t>(jobs));
  parallel_for(jobs, ov.workers, [&](int j) {
    const int fi = j / cfg.repeats;
    const int r = j % cfg.repeats;
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(r);
    Scenario scenario = build_from_config(cfg, seed);
    const double fraction = fractions[static_cast<std::size_t>(fi)];
    RunHistory hist = run_mixed(scenario, cfg.schedule, cfg.run, seed, fraction);
    SweepRow row;
    row.fraction = fraction;
    row.seed = seed;
    row.volumes = static_cast<int>(std::ceil(
        fraction * static_cast<double>(cfg.n_centers * cfg.volumes_per_center)));
    row.metrics = hist.snapshots.back().metrics;
    rows[static_cast<std::size_t>(j)] = std::move(row);
  });
  out.sweep_rows = rows;

  atomic_write(out.out_dir / "sweep.csv", sweep_csv(rows));
  atomic_write(out.out_dir / "sweep_summary.csv", sweep_summary_csv(rows));
  out.files.push_back(out.out_dir / "sweep.csv");
  out.files.push_back(out.out_dir / "sweep_summary.csv");

  json m = manifest_base(cfg);
  m["fractions"] = fractions;
  m["files"] = {"sweep.csv", "sweep_summary.csv"};
  atomic_write(out.out_dir / "manifest.json", m.dump(2) + "\n");
  out.files.push_back(out.out_dir / "manifest.json");

  LineChart chart;
  chart.title = "performance vs training data amount";
  chart.x_label = "fraction of pooled training volumes";
  chart.y_label = "median over seeds";
  PlotSeries sens{"sensitivity", {}, {}};
  for (const auto& [fr, v] : sweep_median_sensitivity(rows)) {
    sens.x.push_back(fr);
    sens.y.push_back(v);
  }
  PlotSeries small{"small-lesion TP ratio", {}, {}};
  for (const auto& [fr, v] : sweep_median_small_ratio(rows)) {
    small.x.push_back(fr);
    small.y.push_back(v);
  }
  chart.series = {std::move(sens), std::move(small)};
  write_plot(out.out_dir / "sweep.svg", chart, ov.no_plots, out.files);
  return out;
}

RunOutput compare_runs(const std::vector<std::filesystem::path>& config_paths,
                       const RunOverrides& ov) {
  if (config_paths.empty()) throw ConfigError("compare: no configs given");
  RunOutput out;
  out.out_dir = ov.out_dir ? std::filesystem::path(*ov.out_dir) : std::filesystem::path("compare");
  std::filesystem::create_directories(out.out_dir);

  std::vector<HistoryRow> all_rows;
  json reference_hashes;
  std::string reference_source;
  for (const auto& path : config_paths) {
    ScenarioConfig cfg = parse_scenario_file(path);
    const std::filesystem::path dir = cfg.output_dir;
    std::ifstream mf(dir / "manifest.json");
    if (!mf) throw IoError("compare: no manifest in " + dir.string() + " (run it first)");
    json manifest = json::parse(mf);
    if (!manifest.contains("test_hashes"))
      throw ConfigError("compare: manifest has no test hashes: " + dir.string());
    if (reference_hashes.is_null()) {
      reference_hashes = manifest["test_hashes"];
      reference_source = path.filename().string();
    } else if (manifest["test_hashes"] != reference_hashes) {
      throw ConfigError("compare: test sets differ between " + reference_source + " and " +
                        path.filename().string());
    }
    auto rows = read_history_csv(dir / "history.csv", path.filename().string());
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
  }

  std::ostringstream os;
  os << "source,run_id,schedule,use_si,center,round,cum_epochs,sensitivity,precision,afpr,dsc,"
        "transfers_so_far,bytes_so_far\n";
  for (const HistoryRow& r : all_rows)
    os << r.source << "," << r.run_id << "," << r.schedule << "," << r.use_si << "," << r.center
       << "," << r.round << "," << r.cum_epochs << "," << format_metric(r.sensitivity) << ","
       << format_metric(r.precision) << "," << format_metric(r.afpr) << ","
       << format_metric(r.dsc) << "," << r.transfers << "," << r.bytes << "\n";
  atomic_write(out.out_dir / "compare.csv", os.str());
  out.files.push_back(out.out_dir / "compare.csv");

  LineChart chart;
  chart.title = "sensitivity by training strategy";
  chart.x_label = "cumulative epochs";
  chart.y_label = "sensitivity";
  std::map<std::string, PlotSeries> series;
  for (const HistoryRow& r : all_rows) {
    const std::string key = r.source + ":" + r.run_id;
    auto& s = series[key];
    if (s.label.empty()) s.label = key;
    s.x.push_back(static_cast<double>(r.cum_epochs));
    s.y.push_back(r.sensitivity);
  }
  for (auto& [key, s] : series) chart.series.push_back(std::move(s));
  write_plot(out.out_dir / "compare.svg", chart, ov.no_plots, out.files);
  return out;
}

}  // namespace ringfed
