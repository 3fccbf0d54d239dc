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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ringfed/metrics.hpp"
#include "ringfed/model.hpp"
#include "ringfed/sampling.hpp"
#include "ringfed/si.hpp"
#include "ringfed/synthdata.hpp"

namespace ringfed {

// ---------------------------------------------------------------------------
// model architecture
// ---------------------------------------------------------------------------

/// Small multi-scale CNN: a normal-resolution conv stack, an optional
/// parallel stack on average-downsampled input rejoined by channel concat,
/// two fused conv layers and a sigmoid head. Channels double at the midpoint
/// of each stack.
struct ModelArch {
  int base_channels = 8;
  int nr_conv_layers = 4;
  int kernel = 3;
  bool low_res_path = true;
  int low_res_factor = 3;
  int low_res_conv_layers = 2;
};

std::vector<LayerSpec> build_arch(const ModelArch& arch);

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

struct TrainParams {
  int batch_size = 8;
  int batches_per_epoch = 8;
  Index patch = 24;  // square patches
  double fg_fraction = 0.5;
  bool augment = true;
  AugmentConfig augment_cfg;
  float lr0 = 0.001f;
  float rho = 0.9f;
  float eps = 1e-4f;
  float momentum = 0.6f;
  int plateau_patience = 5;
  float plateau_delta = 1e-4f;
};

struct RunConfig {
  ModelArch arch;
  TrainParams train;
  LossConfig<float> loss;
  float si_c = 0.1f;
  float si_xi = 1e-8f;
  EvalConfig eval;
};

// ---------------------------------------------------------------------------
// schedules, ledger, histories
// ---------------------------------------------------------------------------

enum class ScheduleKind { Isolated, Svcl, Icl, Mixed };

const char* schedule_kind_name(ScheduleKind k);
ScheduleKind schedule_kind_from(const std::string& s);

struct Schedule {
  ScheduleKind kind = ScheduleKind::Svcl;
  int epochs_initial = 20;  // first SVCL center; also the isolated budget
  int epochs_visit = 10;    // later SVCL centers / ICL per-visit
  int rounds = 6;           // ICL ring passes
  bool use_si = false;
  int mixed_epochs = 20;       // mixed-schedule budget
  int snapshot_interval = 2;   // mixed: evaluate every k epochs
};

struct CommEvent {
  int from = 0, to = 0;
  std::uint64_t bytes = 0;
  int round = 0;
  long epoch_mark = 0;  // cumulative epochs at departure
};

/// Ordered transfer record; totals are derived and re-checkable.
struct CommLedger {
  std::vector<CommEvent> events;

  void record(const CommEvent& e) { events.push_back(e); }
  std::size_t transfer_count() const { return events.size(); }
  std::uint64_t total_bytes() const;
  /// (from,to) -> (count, bytes), recomputed from events.
  std::map<std::pair<int, int>, std::pair<long, std::uint64_t>> totals() const;
};

struct VisitSnapshot {
  int center = 0;  // 0 for mixed
  int round = 0;
  long cum_epochs = 0;
  MetricsReport metrics;
  long transfers_so_far = 0;
  std::uint64_t bytes_so_far = 0;
};

struct StepProvenance {
  int center = 0;
  long epoch = 0;  // cumulative epoch index within the run
};

struct EpochStat {
  int center = 0;
  long cum_epoch = 0;
  float mean_seg_loss = 0;
  float mean_penalty = 0;
  double val_sensitivity = 0;
  float lr = 0;
};

struct TrainTrace {
  std::vector<StepProvenance> steps;
  std::vector<EpochStat> epochs;
};

struct RunHistory {
  std::string run_id;
  ScheduleKind kind = ScheduleKind::Svcl;
  bool use_si = false;
  std::uint64_t seed = 0;
  std::vector<VisitSnapshot> snapshots;
  ModelState<float> final_model;
  std::optional<SIState<float>> final_si;
  CommLedger ledger;
  TrainTrace trace;
  std::uint64_t test_hash = 0;
};

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

struct Center {
  int id = 0;
  const std::vector<LabeledVolume>* train_set = nullptr;
  std::uint64_t local_seed = 0;
};

std::vector<Center> make_centers(const Scenario& scenario, std::uint64_t master_seed);

/// One visit: epochs x batches of sample / forward / loss (+ SI penalty) /
/// backward / step / path accumulation. Never consolidates. Plateau halving
/// is driven by validation sensitivity after each epoch. Optimizer state is
/// local to the visit (the checkpoint carries model and SI state only).
void train_local(const Center& center, ModelState<float>& model, SIState<float>* si, int epochs,
                 const RunConfig& cfg, const std::vector<LabeledVolume>& val_set, Rng& rng,
                 TrainTrace& trace, long& cum_epochs);

/// Departure: consolidate (when SI travels along), serialize, ledger the byte
/// count, and re-materialize model and SI from the wire bytes so every hop
/// exercises the real format. Returns the byte count.
std::uint64_t transfer(ModelState<float>& model, std::optional<SIState<float>>& si, int from,
                       int to, CommLedger& ledger, int round, long epoch_mark);

RunHistory run_svcl(const Scenario& scenario, const Schedule& schedule, const RunConfig& cfg,
                    std::uint64_t master_seed);

RunHistory run_icl(const Scenario& scenario, const Schedule& schedule, const RunConfig& cfg,
                   std::uint64_t master_seed);

std::vector<RunHistory> run_isolated(const Scenario& scenario, const Schedule& schedule,
                                     const RunConfig& cfg, std::uint64_t master_seed);

/// Upper-bound comparator on the shuffled union of all center data.
/// `fraction` trains on a prefix of the shuffled pool (data-amount sweeps);
/// `block_by_center` feeds epoch e from center (e mod N) alone, the
/// block-ordered regime the iterative schedule reproduces.
RunHistory run_mixed(const Scenario& scenario, const Schedule& schedule, const RunConfig& cfg,
                     std::uint64_t master_seed, double fraction = 1.0,
                     bool block_by_center = false);

}  // namespace ringfed
