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

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "ringfed/runner.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

ringfed::RunOverrides make_overrides(const std::string& out_dir, std::uint64_t seed_override,
                                     bool has_seed, int workers, bool no_plots) {
  ringfed::RunOverrides ov;
  if (!out_dir.empty()) {
    ov.out_dir = out_dir;
  } else if (const char* env = std::getenv("RINGFED_OUT"); env && *env) {
    ov.out_dir = env;
  }
  if (has_seed) ov.seed = seed_override;
  ov.workers = workers;
  ov.no_plots = no_plots;
  return ov;
}

void print_files(const ringfed::RunOutput& out) {
  for (const auto& f : out.files) std::cout << "wrote " << f.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"peer-to-peer federated continual learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> compare_configs;
  std::vector<double> fractions;
  std::uint64_t seed_override = 0;
  int workers = 1;
  bool no_plots = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--out", out_dir, "output directory (fallback: RINGFED_OUT, then the config)");
    cmd->add_option("--seed-override", seed_override, "replace the config's master seed");
    cmd->add_option("--workers", workers, "parallel worker slots for independent runs")
        ->check(CLI::Range(1, 256));
    cmd->add_flag("--no-plots", no_plots, "skip SVG plots, keep CSVs");
  };

  CLI::App* run_cmd = app.add_subcommand("run", "execute the configured schedule");
  run_cmd->add_option("--config", config_path, "scenario file")->required();
  add_common(run_cmd);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "train one mixed model per fraction of the pooled data");
  sweep_cmd->add_option("--config", config_path, "scenario file")->required();
  sweep_cmd->add_option("--fractions", fractions, "override [sweep] fractions")
      ->delimiter(',');
  add_common(sweep_cmd);

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "overlay finished runs (reads their output dirs)");
  compare_cmd->add_option("--config", compare_configs, "scenario files of finished runs")
      ->required();
  add_common(compare_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    const bool has_seed = run_cmd->count("--seed-override") || sweep_cmd->count("--seed-override");
    const ringfed::RunOverrides ov =
        make_overrides(out_dir, seed_override, has_seed, workers, no_plots);
    if (app.got_subcommand(run_cmd)) {
      ringfed::ScenarioConfig cfg = ringfed::parse_scenario_file(config_path);
      print_files(ringfed::run_scenario(cfg, ov));
    } else if (app.got_subcommand(sweep_cmd)) {
      ringfed::ScenarioConfig cfg = ringfed::parse_scenario_file(config_path);
      if (!fractions.empty()) {
        for (double f : fractions)
          if (f <= 0.0 || f > 1.0) throw ringfed::ConfigError("--fractions must lie in (0,1]");
        cfg.sweep_fractions = fractions;
      }
      print_files(ringfed::sweep_scenario(cfg, ov));
    } else {
      std::vector<std::filesystem::path> paths(compare_configs.begin(), compare_configs.end());
      print_files(ringfed::compare_runs(paths, ov));
    }
  } catch (const ringfed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ringfed::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ringfed::IoError& e) {
    std::cerr << "i/o failure: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
