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

#include "ringfed/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ringfed {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long n = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return n;
  } catch (...) {
    throw ConfigError(key + ": not an integer: '" + v + "'");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return n;
  } catch (...) {
    throw ConfigError(key + ": not an unsigned integer: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

double ranged(const std::string& key, double v, double lo, double hi) {
  if (v < lo || v > hi) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: %g out of range [%g, %g]", key.c_str(), v, lo, hi);
    throw ConfigError(buf);
  }
  return v;
}

long ranged_int(const std::string& key, long v, long lo, long hi) {
  if (v < lo || v > hi)
    throw ConfigError(key + ": " + std::to_string(v) + " out of range [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "]");
  return v;
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

}  // namespace

ScenarioConfig parse_scenario_text(const std::string& text, const std::string& source_name) {
  ScenarioConfig cfg;
  cfg.raw_text = text;
  cfg.source_name = source_name;

  std::map<std::string, std::map<std::string, Setter>> schema;

  auto d = [](double* slot, double lo, double hi) {
    return [slot, lo, hi](const std::string& k, const std::string& v) {
      *slot = ranged(k, to_double(k, v), lo, hi);
    };
  };
  auto f = [](float* slot, double lo, double hi) {
    return [slot, lo, hi](const std::string& k, const std::string& v) {
      *slot = static_cast<float>(ranged(k, to_double(k, v), lo, hi));
    };
  };
  auto i = [](int* slot, long lo, long hi) {
    return [slot, lo, hi](const std::string& k, const std::string& v) {
      *slot = static_cast<int>(ranged_int(k, to_long(k, v), lo, hi));
    };
  };
  auto idx = [](Index* slot, long lo, long hi) {
    return [slot, lo, hi](const std::string& k, const std::string& v) {
      *slot = static_cast<Index>(ranged_int(k, to_long(k, v), lo, hi));
    };
  };
  auto b = [](bool* slot) {
    return [slot](const std::string& k, const std::string& v) { *slot = to_bool(k, v); };
  };

  schema["task"] = {
      {"height", idx(&cfg.task.height, 16, 512)},
      {"width", idx(&cfg.task.width, 16, 512)},
      {"lesions_per_volume", d(&cfg.task.lesions_per_volume, 0.0, 16.0)},
      {"small_fraction", d(&cfg.task.small_fraction, 0.0, 1.0)},
      {"small_radius_min", d(&cfg.task.small_radius_min, 0.5, 32.0)},
      {"small_radius_max", d(&cfg.task.small_radius_max, 0.5, 32.0)},
      {"large_radius_min", d(&cfg.task.large_radius_min, 0.5, 32.0)},
      {"large_radius_max", d(&cfg.task.large_radius_max, 0.5, 32.0)},
      {"small_contrast", d(&cfg.task.small_contrast, 0.0, 2.0)},
      {"large_contrast", d(&cfg.task.large_contrast, 0.0, 2.0)},
      {"background_level", d(&cfg.task.background_level, 0.0, 1.0)},
      {"texture_amplitude", d(&cfg.task.texture_amplitude, 0.0, 1.0)},
      {"texture_cells", i(&cfg.task.texture_cells, 1, 64)},
      {"distractors_per_volume", d(&cfg.task.distractors_per_volume, 0.0, 32.0)},
      {"distractor_length_min", d(&cfg.task.distractor_length_min, 1.0, 64.0)},
      {"distractor_length_max", d(&cfg.task.distractor_length_max, 1.0, 64.0)},
      {"distractor_width", d(&cfg.task.distractor_width, 0.3, 8.0)},
      {"distractor_intensity", d(&cfg.task.distractor_intensity, 0.0, 2.0)},
  };
  schema["centers"] = {
      {"count", i(&cfg.n_centers, 1, 64)},
      {"volumes_per_center", i(&cfg.volumes_per_center, 1, 10000)},
      {"validation_volumes", i(&cfg.validation_volumes, 0, 10000)},
      {"test_volumes", i(&cfg.test_volumes, 1, 10000)},
      {"gain_min", f(&cfg.shifts.gain_min, 0.05, 4.0)},
      {"gain_max", f(&cfg.shifts.gain_max, 0.05, 4.0)},
      {"bias_min", f(&cfg.shifts.bias_min, -1.0, 1.0)},
      {"bias_max", f(&cfg.shifts.bias_max, -1.0, 1.0)},
      {"noise_min", f(&cfg.shifts.noise_min, 0.0, 1.0)},
      {"noise_max", f(&cfg.shifts.noise_max, 0.0, 1.0)},
      {"gamma_min", f(&cfg.shifts.gamma_min, 0.1, 4.0)},
      {"gamma_max", f(&cfg.shifts.gamma_max, 0.1, 4.0)},
  };
  schema["model"] = {
      {"base_channels", i(&cfg.run.arch.base_channels, 1, 64)},
      {"conv_layers", i(&cfg.run.arch.nr_conv_layers, 1, 12)},
      {"kernel", i(&cfg.run.arch.kernel, 1, 9)},
      {"low_res_path", b(&cfg.run.arch.low_res_path)},
      {"low_res_factor", i(&cfg.run.arch.low_res_factor, 2, 8)},
      {"low_res_conv_layers", i(&cfg.run.arch.low_res_conv_layers, 1, 8)},
  };
  schema["train"] = {
      {"batch_size", i(&cfg.run.train.batch_size, 1, 256)},
      {"batches_per_epoch", i(&cfg.run.train.batches_per_epoch, 1, 10000)},
      {"patch", idx(&cfg.run.train.patch, 8, 256)},
      {"fg_fraction", d(&cfg.run.train.fg_fraction, 0.0, 1.0)},
      {"augment", b(&cfg.run.train.augment)},
      {"augment_intensity", f(&cfg.run.train.augment_cfg.intensity_scale, 0.0, 0.5)},
  };
  schema["loss"] = {
      {"alpha", f(&cfg.run.loss.alpha, 0.0, 1.0)},
      {"epsilon_den", f(&cfg.run.loss.epsilon_den, 1e-12, 1.0)},
      {"c", f(&cfg.run.si_c, 0.0, 1e7)},
      {"xi", f(&cfg.run.si_xi, 1e-12, 1.0)},
  };
  schema["optimizer"] = {
      {"lr", f(&cfg.run.train.lr0, 1e-8, 10.0)},
      {"rho", f(&cfg.run.train.rho, 0.0, 1.0)},
      {"eps", f(&cfg.run.train.eps, 1e-12, 1.0)},
      {"momentum", f(&cfg.run.train.momentum, 0.0, 1.0)},
      {"plateau_patience", i(&cfg.run.train.plateau_patience, 1, 1000)},
      {"plateau_delta", f(&cfg.run.train.plateau_delta, 0.0, 1.0)},
  };
  schema["eval"] = {
      {"tau", f(&cfg.run.eval.tau, 0.0, 1.0)},
      {"min_overlap_voxels", i(&cfg.run.eval.min_overlap_voxels, 1, 4096)},
  };
  schema["schedule"] = {
      {"kind",
       [&cfg](const std::string&, const std::string& v) { cfg.schedule.kind = schedule_kind_from(v); }},
      {"epochs_initial", i(&cfg.schedule.epochs_initial, 0, 100000)},
      {"epochs_visit", i(&cfg.schedule.epochs_visit, 1, 100000)},
      {"rounds", i(&cfg.schedule.rounds, 1, 100000)},
      {"use_si", b(&cfg.schedule.use_si)},
      {"mixed_epochs", i(&cfg.schedule.mixed_epochs, 1, 1000000)},
      {"snapshot_interval", i(&cfg.schedule.snapshot_interval, 0, 1000000)},
  };
  schema["seeds"] = {
      {"master",
       [&cfg](const std::string& k, const std::string& v) { cfg.master_seed = to_u64(k, v); }},
      {"repeats", i(&cfg.repeats, 1, 1000)},
  };
  schema["output"] = {
      {"dir", [&cfg](const std::string&, const std::string& v) { cfg.output_dir = v; }},
  };
  schema["sweep"] = {
      {"fractions",
       [&cfg](const std::string& k, const std::string& v) {
         cfg.sweep_fractions.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) {
           const double f = ranged(k, to_double(k, trim(item)), 1e-6, 1.0);
           cfg.sweep_fractions.push_back(f);
         }
         if (cfg.sweep_fractions.empty()) throw ConfigError(k + ": empty fraction list");
       }},
  };

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(source_name + ":" + std::to_string(lineno) +
                                                ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (schema.find(section) == schema.end())
        throw ConfigError(source_name + ":" + std::to_string(lineno) + ": unknown section [" +
                          section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto& keys = schema[section];
    const auto it = keys.find(key);
    if (it == keys.end())
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": unknown key '" + key +
                        "' in section [" + section + "]");
    try {
      it->second(section + "." + key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }

  validate_scenario(cfg);
  return cfg;
}

ScenarioConfig parse_scenario_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario_text(ss.str(), path.filename().string());
}

void validate_scenario(const ScenarioConfig& cfg) {
  const TaskSpec& t = cfg.task;
  if (t.small_radius_max < t.small_radius_min)
    throw ConfigError("task: small radius range inverted");
  if (t.large_radius_max < t.large_radius_min)
    throw ConfigError("task: large radius range inverted");
  const double max_r = std::max(t.small_radius_max, t.large_radius_max);
  if (t.height < 4 * max_r || t.width < 4 * max_r)
    throw ConfigError("task: extent must be at least 4x the largest lesion radius");
  if (t.distractor_length_max < t.distractor_length_min)
    throw ConfigError("task: distractor length range inverted");
  if (cfg.run.train.patch > t.height || cfg.run.train.patch > t.width)
    throw ConfigError("train: patch larger than volume extent");
  if (cfg.shifts.gain_max < cfg.shifts.gain_min || cfg.shifts.bias_max < cfg.shifts.bias_min ||
      cfg.shifts.noise_max < cfg.shifts.noise_min || cfg.shifts.gamma_max < cfg.shifts.gamma_min)
    throw ConfigError("centers: shift range inverted");
  if (cfg.schedule.kind == ScheduleKind::Icl && cfg.schedule.rounds < 1)
    throw ConfigError("schedule: icl needs rounds >= 1");
  if (cfg.schedule.kind != ScheduleKind::Mixed && cfg.schedule.epochs_visit < 1)
    throw ConfigError("schedule: epochs_visit must be >= 1");
  if (cfg.run.arch.low_res_path &&
      cfg.run.train.patch / cfg.run.arch.low_res_factor < cfg.run.arch.kernel)
    throw ConfigError("model: low-res path collapses below the kernel size at this patch size");
}

std::string config_hash_hex(const std::string& raw_text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : raw_text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ringfed
