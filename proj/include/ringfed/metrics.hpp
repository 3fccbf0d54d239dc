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
#include <vector>

#include "ringfed/model.hpp"
#include "ringfed/synthdata.hpp"

namespace ringfed {

/// Connected components of a binary field; components hold sorted linear
/// voxel indices.
struct LesionSet {
  std::vector<std::vector<std::int32_t>> components;

  std::size_t count() const { return components.size(); }
};

/// Full-neighborhood connectivity: 8-connected in 2D, 26-connected in 3D.
LesionSet connected_components(const std::uint8_t* mask, const std::vector<Index>& extent);
LesionSet connected_components(const MaskU8& mask);

/// Voxelwise p >= tau.
MaskU8 threshold_predictions(const Tensor<float>& prob, float tau);

struct LesionMatch {
  int truth_index = 0;
  Index truth_size = 0;
  Index pred_union_size = 0;  // all predicted voxels matched to this lesion
  Index intersection = 0;
  double dsc() const {
    return pred_union_size + truth_size > 0
               ? 2.0 * double(intersection) / double(pred_union_size + truth_size)
               : 1.0;
  }
};

struct MatchResult {
  int tp = 0, fp = 0, fn = 0;
  std::vector<LesionMatch> pairs;  // one per detected truth lesion
};

/// A truth lesion counts as detected when at least min_overlap_voxels of some
/// predicted component fall inside it; a predicted component spanning several
/// truth lesions detects all of them and is no false positive.
MatchResult match_lesions(const LesionSet& pred, const LesionSet& truth, Index field_size,
                          int min_overlap_voxels = 1);

struct EvalConfig {
  float tau = 0.5f;
  int min_overlap_voxels = 1;
  int small_area_voxels = 19;  // TaskSpec::small_area_voxels() of the task under test
};

/// Lesion-level report. Metrics with an empty denominator report the neutral
/// value 1 (0 for the small-TP ratio) and clear the corresponding flag.
struct MetricsReport {
  double sensitivity = 1.0;
  double precision = 1.0;
  double afpr = 0.0;
  double mean_tp_dsc = 1.0;
  double small_tp_ratio = 0.0;
  long tp = 0, fp = 0, fn = 0;
  int n_volumes = 0;
  bool sensitivity_defined = false;
  bool precision_defined = false;
  bool dsc_defined = false;
  bool small_ratio_defined = false;
};

/// Recompute the ratio metrics from the raw counts (identity check helper and
/// the single place the zero-denominator rule lives).
MetricsReport finalize_report(long tp, long fp, long fn, int n_volumes,
                              const std::vector<double>& pair_dscs, long small_tp);

/// Run the model over every test volume, threshold at tau, and aggregate
/// lesion-level counts. DSC is the per-lesion mean over matched pairs.
MetricsReport evaluate(const ModelState<float>& model, const std::vector<LabeledVolume>& test_set,
                       const EvalConfig& cfg);

}  // namespace ringfed
