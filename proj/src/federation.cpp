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

#include "ringfed/federation.hpp"

#include <algorithm>
#include <sstream>

#include "ringfed/checkpoint.hpp"
#include "ringfed/network.hpp"
#include "ringfed/optimizer.hpp"

namespace ringfed {

namespace {
constexpr std::uint64_t kTagInit = 101;
constexpr std::uint64_t kTagTrain = 102;
constexpr std::uint64_t kTagPool = 103;
}  // namespace

std::vector<LayerSpec> build_arch(const ModelArch& arch) {
  if (arch.base_channels < 1 || arch.nr_conv_layers < 1 || arch.kernel % 2 == 0)
    throw ConfigError("build_arch: bad architecture parameters");
  const auto c = static_cast<std::uint32_t>(arch.base_channels);
  const auto k = static_cast<std::uint32_t>(arch.kernel);
  std::vector<LayerSpec> layers;
  auto conv = [&](std::uint32_t cin, std::uint32_t cout, Pathway pw) {
    layers.push_back({LayerKind::Conv2d, pw, {cin, cout, k}});
    layers.push_back({LayerKind::Relu, pw, {}});
  };
  // Normal-resolution stack; channels double at the midpoint.
  std::uint32_t prev = 1;
  for (int i = 0; i < arch.nr_conv_layers; ++i) {
    const std::uint32_t cout = i >= arch.nr_conv_layers / 2 ? 2 * c : c;
    conv(prev, cout, Pathway::NormalRes);
    prev = cout;
  }
  const std::uint32_t nr_out = prev;
  std::uint32_t cat = nr_out;
  if (arch.low_res_path) {
    layers.push_back({LayerKind::DownsampleAvg, Pathway::LowRes,
                      {static_cast<std::uint32_t>(arch.low_res_factor)}});
    std::uint32_t lprev = 1;
    for (int i = 0; i < arch.low_res_conv_layers; ++i) {
      const std::uint32_t cout = i == arch.low_res_conv_layers - 1 ? 2 * c : c;
      conv(lprev, cout, Pathway::LowRes);
      lprev = cout;
    }
    layers.push_back({LayerKind::UpsampleNearest, Pathway::LowRes,
                      {static_cast<std::uint32_t>(arch.low_res_factor)}});
    layers.push_back({LayerKind::Concat, Pathway::NormalRes, {}});
    cat = nr_out + lprev;
  }
  conv(cat, 2 * c, Pathway::NormalRes);
  layers.push_back({LayerKind::Conv2d, Pathway::NormalRes, {2 * c, 1, k}});
  layers.push_back({LayerKind::Sigmoid, Pathway::NormalRes, {}});
  validate_topology(layers);
  return layers;
}

const char* schedule_kind_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::Isolated: return "isolated";
    case ScheduleKind::Svcl: return "svcl";
    case ScheduleKind::Icl: return "icl";
    case ScheduleKind::Mixed: return "mixed";
  }
  return "?";
}

ScheduleKind schedule_kind_from(const std::string& s) {
  if (s == "isolated") return ScheduleKind::Isolated;
  if (s == "svcl") return ScheduleKind::Svcl;
  if (s == "icl") return ScheduleKind::Icl;
  if (s == "mixed") return ScheduleKind::Mixed;
  throw ConfigError("unknown schedule kind: " + s);
}

std::uint64_t CommLedger::total_bytes() const {
  std::uint64_t total = 0;
  for (const CommEvent& e : events) total += e.bytes;
  return total;
}

std::map<std::pair<int, int>, std::pair<long, std::uint64_t>> CommLedger::totals() const {
  std::map<std::pair<int, int>, std::pair<long, std::uint64_t>> out;
  for (const CommEvent& e : events) {
    auto& slot = out[{e.from, e.to}];
    slot.first += 1;
    slot.second += e.bytes;
  }
  return out;
}

std::vector<Center> make_centers(const Scenario& scenario, std::uint64_t master_seed) {
  std::vector<Center> centers;
  centers.reserve(scenario.centers.size());
  for (const CenterData& c : scenario.centers) {
    Center ctr;
    ctr.id = c.id;
    ctr.train_set = &c.volumes;
    ctr.local_seed = derive_seed(master_seed, kTagTrain + static_cast<std::uint64_t>(c.id));
    centers.push_back(ctr);
  }
  return centers;
}

namespace {

OptimizerState<float> fresh_optimizer(const TrainParams& tp, Index n_params) {
  OptimizerState<float> opt = OptimizerState<float>::init(n_params, tp.lr0);
  opt.rho = tp.rho;
  opt.eps = tp.eps;
  opt.momentum = tp.momentum;
  opt.plateau_patience = tp.plateau_patience;
  opt.plateau_delta = tp.plateau_delta;
  return opt;
}

/// One gradient step over a sampled batch. Returns the mean segmentation loss.
float train_step(ModelState<float>& model, OptimizerState<float>& opt, SIState<float>* si,
                 const PatchBatch& batch, const RunConfig& cfg, float* penalty_out) {
  std::vector<Tape<float>> tapes;
  std::vector<Tensor<float>> outputs;
  tapes.reserve(batch.size());
  outputs.reserve(batch.size());
  for (const Tensor<float>& input : batch.inputs) {
    tapes.push_back(net_forward(model, input));
    outputs.push_back(tapes.back().output);
  }
  BatchLossValue<float> loss = seg_loss_batch(outputs, batch.targets, cfg.loss);
  if (!std::isfinite(loss.total)) throw NumericalError("segmentation loss is not finite");

  VecX<float> g_seg = VecX<float>::Zero(model.param_size());
  for (std::size_t i = 0; i < tapes.size(); ++i)
    net_backward(model, tapes[i], loss.grads[i], g_seg);

  float penalty = 0.0f;
  if (si) {
    PenaltyValue<float> pen = si_penalty(model.theta, *si);
    penalty = pen.value;
    VecX<float> g_total = g_seg + pen.grad;
    VecX<float> delta = optimizer_step(opt, model, g_total);
    si_accumulate(*si, g_seg, delta);
  } else {
    optimizer_step(opt, model, g_seg);
  }
  if (penalty_out) *penalty_out = penalty;
  return loss.total;
}

}  // namespace

void train_local(const Center& center, ModelState<float>& model, SIState<float>* si, int epochs,
                 const RunConfig& cfg, const std::vector<LabeledVolume>& val_set, Rng& rng,
                 TrainTrace& trace, long& cum_epochs) {
  if (!center.train_set || center.train_set->empty())
    throw ConfigError("train_local: center has no data");
  OptimizerState<float> opt = fresh_optimizer(cfg.train, model.param_size());
  std::vector<float> val_history;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    float seg_sum = 0, pen_sum = 0;
    for (int b = 0; b < cfg.train.batches_per_epoch; ++b) {
      PatchBatch batch = sample_batch(*center.train_set, cfg.train.batch_size,
                                      cfg.train.fg_fraction, cfg.train.patch, cfg.train.patch, rng);
      if (cfg.train.augment)
        for (std::size_t i = 0; i < batch.size(); ++i)
          augment_patch(batch.inputs[i], batch.targets[i], cfg.train.augment_cfg, rng);
      float penalty = 0;
      try {
        seg_sum += train_step(model, opt, si, batch, cfg, &penalty);
      } catch (const NumericalError& e) {
        std::ostringstream os;
        os << "center " << center.id << " epoch " << cum_epochs << ": " << e.what();
        throw NumericalError(os.str());
      }
      pen_sum += penalty;
      trace.steps.push_back(StepProvenance{center.id, cum_epochs});
    }
    double val_sens = 1.0;
    if (!val_set.empty()) {
      val_sens = evaluate(model, val_set, cfg.eval).sensitivity;
      val_history.push_back(static_cast<float>(val_sens));
      step_lr_on_plateau(opt, val_history);
    }
    EpochStat stat;
    stat.center = center.id;
    stat.cum_epoch = cum_epochs;
    stat.mean_seg_loss = seg_sum / static_cast<float>(cfg.train.batches_per_epoch);
    stat.mean_penalty = pen_sum / static_cast<float>(cfg.train.batches_per_epoch);
    stat.val_sensitivity = val_sens;
    stat.lr = opt.lr;
    trace.epochs.push_back(stat);
    ++cum_epochs;
  }
}

std::uint64_t transfer(ModelState<float>& model, std::optional<SIState<float>>& si, int from,
                       int to, CommLedger& ledger, int round, long epoch_mark) {
  if (from == to) throw ConfigError("transfer: source equals destination");
  if (si) si_consolidate(*si, model.theta);
  const std::uint64_t version = model.version;
  std::vector<std::uint8_t> bytes = serialize_checkpoint(model, si ? &*si : nullptr);
  CheckpointContents received = parse_checkpoint(bytes);
  if (received.model.theta.size() != model.theta.size() ||
      std::memcmp(received.model.theta.data(), model.theta.data(),
                  sizeof(float) * static_cast<std::size_t>(model.theta.size())) != 0)
    throw IoError("transfer: received model differs from sent model");
  received.model.version = version + 1;  // the save counter keeps running across hops
  model = std::move(received.model);
  if (si) si = std::move(received.si);
  ledger.record(CommEvent{from, to, static_cast<std::uint64_t>(bytes.size()), round, epoch_mark});
  return bytes.size();
}

namespace {

std::string make_run_id(ScheduleKind kind, bool use_si, std::uint64_t seed, int center = 0) {
  std::ostringstream os;
  os << schedule_kind_name(kind);
  if (use_si) os << "+si";
  if (center > 0) os << "-c" << center;
  os << "-s" << seed;
  return os.str();
}

VisitSnapshot snapshot(const ModelState<float>& model, const Scenario& scenario,
                       const RunConfig& cfg, int center, int round, long cum_epochs,
                       const CommLedger& ledger) {
  VisitSnapshot s;
  s.center = center;
  s.round = round;
  s.cum_epochs = cum_epochs;
  s.metrics = evaluate(model, scenario.test_set, cfg.eval);
  s.transfers_so_far = static_cast<long>(ledger.transfer_count());
  s.bytes_so_far = ledger.total_bytes();
  return s;
}

}  // namespace

RunHistory run_svcl(const Scenario& scenario, const Schedule& schedule, const RunConfig& cfg,
                    std::uint64_t master_seed) {
  if (schedule.kind != ScheduleKind::Svcl) throw ConfigError("run_svcl: wrong schedule kind");
  std::vector<Center> centers = make_centers(scenario, master_seed);
  RunHistory hist;
  hist.kind = ScheduleKind::Svcl;
  hist.use_si = schedule.use_si;
  hist.seed = master_seed;
  hist.run_id = make_run_id(ScheduleKind::Svcl, schedule.use_si, master_seed);
  hist.test_hash = dataset_hash(scenario.test_set);

  Rng init_rng(derive_seed(master_seed, kTagInit));
  ModelState<float> model = make_model<float>(build_arch(cfg.arch), init_rng);
  std::optional<SIState<float>> si;
  if (schedule.use_si) si = SIState<float>::init(model.theta, cfg.si_c, cfg.si_xi);

  long cum_epochs = 0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const Center& center = centers[i];
    const int epochs = i == 0 ? schedule.epochs_initial : schedule.epochs_visit;
    Rng visit_rng = Rng(center.local_seed).fork(0);
    train_local(center, model, si ? &*si : nullptr, epochs, cfg, scenario.val_set, visit_rng,
                hist.trace, cum_epochs);
    hist.snapshots.push_back(
        snapshot(model, scenario, cfg, center.id, 0, cum_epochs, hist.ledger));
    if (i + 1 < centers.size())
      transfer(model, si, center.id, centers[i + 1].id, hist.ledger, 0, cum_epochs);
  }
  hist.final_model = std::move(model);
  hist.final_si = std::move(si);
  return hist;
}

RunHistory run_icl(const Scenario& scenario, const Schedule& schedule, const RunConfig& cfg,
                   std::uint64_t master_seed) {
  if (schedule.kind != ScheduleKind::Icl) throw ConfigError("run_icl: wrong schedule kind");
  if (schedule.rounds < 1) throw ConfigError("run_icl: rounds must be >= 1");
  std::vector<Center> centers = make_centers(scenario, master_seed);
  const int n = static_cast<int>(centers.size());
  RunHistory hist;
  hist.kind = ScheduleKind::Icl;
  hist.use_si = schedule.use_si;
  hist.seed = master_seed;
  hist.run_id = make_run_id(ScheduleKind::Icl, schedule.use_si, master_seed);
  hist.test_hash = dataset_hash(scenario.test_set);

  Rng init_rng(derive_seed(master_seed, kTagInit));
  ModelState<float> model = make_model<float>(build_arch(cfg.arch), init_rng);
  std::optional<SIState<float>> si;
  if (schedule.use_si) si = SIState<float>::init(model.theta, cfg.si_c, cfg.si_xi);

  long cum_epochs = 0;
  for (int round = 0; round < schedule.rounds; ++round) {
    for (int i = 0; i < n; ++i) {
      const Center& center = centers[static_cast<std::size_t>(i)];
      Rng visit_rng = Rng(center.local_seed).fork(static_cast<std::uint64_t>(round));
      train_local(center, model, si ? &*si : nullptr, schedule.epochs_visit, cfg,
                  scenario.val_set, visit_rng, hist.trace, cum_epochs);
      hist.snapshots.push_back(
          snapshot(model, scenario, cfg, center.id, round, cum_epochs, hist.ledger));
      const bool last_visit = round == schedule.rounds - 1 && i == n - 1;
      if (!last_visit) {
        const int to = i + 1 < n ? centers[static_cast<std::size_t>(i + 1)].id
                                 : centers[0].id;  // wrap between rounds
        transfer(model, si, center.id, to, hist.ledger, round, cum_epochs);
      }
    }
  }
  hist.final_model = std::move(model);
  hist.final_si = std::move(si);
  return hist;
}

std::vector<RunHistory> run_isolated(const Scenario& scenario, const Schedule& schedule,
                                     const RunConfig& cfg, std::uint64_t master_seed) {
  std::vector<Center> centers = make_centers(scenario, master_seed);
  std::vector<RunHistory> out;
  out.reserve(centers.size());
  for (const Center& center : centers) {
    RunHistory hist;
    hist.kind = ScheduleKind::Isolated;
    hist.use_si = false;
    hist.seed = master_seed;
    hist.run_id = make_run_id(ScheduleKind::Isolated, false, master_seed, center.id);
    hist.test_hash = dataset_hash(scenario.test_set);
    Rng init_rng(
        derive_seed(derive_seed(master_seed, kTagInit), static_cast<std::uint64_t>(center.id)));
    ModelState<float> model = make_model<float>(build_arch(cfg.arch), init_rng);
    Rng visit_rng = Rng(center.local_seed).fork(0);
    long cum_epochs = 0;
    train_local(center, model, nullptr, schedule.epochs_initial, cfg, scenario.val_set, visit_rng,
                hist.trace, cum_epochs);
    hist.snapshots.push_back(
        snapshot(model, scenario, cfg, center.id, 0, cum_epochs, hist.ledger));
    hist.final_model = std::move(model);
    out.push_back(std::move(hist));
  }
  return out;
}

RunHistory run_mixed(const Scenario& scenario, const Schedule& schedule, const RunConfig& cfg,
                     std::uint64_t master_seed, double fraction, bool block_by_center) {
  if (fraction <= 0.0 || fraction > 1.0) throw ConfigError("run_mixed: fraction must be in (0,1]");
  RunHistory hist;
  hist.kind = ScheduleKind::Mixed;
  hist.use_si = false;
  hist.seed = master_seed;
  hist.run_id = make_run_id(ScheduleKind::Mixed, false, master_seed);
  hist.test_hash = dataset_hash(scenario.test_set);

  // Shuffled union of all center data; a fraction takes a prefix.
  std::vector<const LabeledVolume*> pool;
  for (const CenterData& c : scenario.centers)
    for (const LabeledVolume& v : c.volumes) pool.push_back(&v);
  Rng pool_rng(derive_seed(master_seed, kTagPool));
  for (std::size_t i = pool.size(); i > 1; --i)
    std::swap(pool[i - 1],
              pool[static_cast<std::size_t>(pool_rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
  const auto take = static_cast<std::size_t>(
      std::max<double>(1.0, std::ceil(fraction * static_cast<double>(pool.size()))));
  std::vector<LabeledVolume> train_pool;
  train_pool.reserve(take);
  for (std::size_t i = 0; i < take && i < pool.size(); ++i) train_pool.push_back(*pool[i]);

  // Per-center blocks for the block-ordered regime.
  std::vector<std::vector<LabeledVolume>> blocks;
  if (block_by_center)
    for (const CenterData& c : scenario.centers) blocks.push_back(c.volumes);

  Rng init_rng(derive_seed(master_seed, kTagInit));
  ModelState<float> model = make_model<float>(build_arch(cfg.arch), init_rng);
  OptimizerState<float> opt = fresh_optimizer(cfg.train, model.param_size());
  Rng train_rng = Rng(derive_seed(master_seed, kTagTrain)).fork(0);
  std::vector<float> val_history;

  long cum_epochs = 0;
  const int n_centers = static_cast<int>(scenario.centers.size());
  for (int epoch = 0; epoch < schedule.mixed_epochs; ++epoch) {
    const std::vector<LabeledVolume>& source =
        block_by_center ? blocks[static_cast<std::size_t>(epoch % n_centers)] : train_pool;
    const int provenance_center =
        block_by_center ? scenario.centers[static_cast<std::size_t>(epoch % n_centers)].id : 0;
    float seg_sum = 0;
    for (int b = 0; b < cfg.train.batches_per_epoch; ++b) {
      PatchBatch batch = sample_batch(source, cfg.train.batch_size, cfg.train.fg_fraction,
                                      cfg.train.patch, cfg.train.patch, train_rng);
      if (cfg.train.augment)
        for (std::size_t i = 0; i < batch.size(); ++i)
          augment_patch(batch.inputs[i], batch.targets[i], cfg.train.augment_cfg, train_rng);
      std::vector<Tape<float>> tapes;
      std::vector<Tensor<float>> outputs;
      for (const Tensor<float>& input : batch.inputs) {
        tapes.push_back(net_forward(model, input));
        outputs.push_back(tapes.back().output);
      }
      BatchLossValue<float> loss = seg_loss_batch(outputs, batch.targets, cfg.loss);
      if (!std::isfinite(loss.total)) throw NumericalError("segmentation loss is not finite");
      VecX<float> g = VecX<float>::Zero(model.param_size());
      for (std::size_t i = 0; i < tapes.size(); ++i) net_backward(model, tapes[i], loss.grads[i], g);
      optimizer_step(opt, model, g);
      seg_sum += loss.total;
      hist.trace.steps.push_back(StepProvenance{provenance_center, cum_epochs});
    }
    double val_sens = 1.0;
    if (!scenario.val_set.empty()) {
      val_sens = evaluate(model, scenario.val_set, cfg.eval).sensitivity;
      val_history.push_back(static_cast<float>(val_sens));
      step_lr_on_plateau(opt, val_history);
    }
    EpochStat stat;
    stat.center = provenance_center;
    stat.cum_epoch = cum_epochs;
    stat.mean_seg_loss = seg_sum / static_cast<float>(cfg.train.batches_per_epoch);
    stat.val_sensitivity = val_sens;
    stat.lr = opt.lr;
    hist.trace.epochs.push_back(stat);
    ++cum_epochs;
    const bool last = epoch == schedule.mixed_epochs - 1;
    if (last || (schedule.snapshot_interval > 0 && cum_epochs % schedule.snapshot_interval == 0))
      if (hist.snapshots.empty() || hist.snapshots.back().cum_epochs != cum_epochs)
        hist.snapshots.push_back(
            snapshot(model, scenario, cfg, 0, static_cast<int>(hist.snapshots.size()), cum_epochs,
                     hist.ledger));
  }
  hist.final_model = std::move(model);
  return hist;
}

}  // namespace ringfed
