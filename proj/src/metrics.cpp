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

#include "ringfed/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "ringfed/network.hpp"

namespace ringfed {

LesionSet connected_components(const std::uint8_t* mask, const std::vector<Index>& extent) {
  const std::size_t rank = extent.size();
  if (rank != 2 && rank != 3) throw ShapeError("connected_components: 2D or 3D only");
  const Index total = numel(extent);
  std::vector<std::int32_t> label(static_cast<std::size_t>(total), -1);
  LesionSet out;
  std::vector<std::int32_t> stack;

  const Index d = rank == 3 ? extent[0] : 1;
  const Index h = extent[rank - 2], w = extent[rank - 1];
  auto idx_of = [&](Index z, Index y, Index x) { return (z * h + y) * w + x; };

  for (Index start = 0; start < total; ++start) {
    if (!mask[start] || label[static_cast<std::size_t>(start)] >= 0) continue;
    const auto comp_id = static_cast<std::int32_t>(out.components.size());
    out.components.emplace_back();
    auto& comp = out.components.back();
    stack.clear();
    stack.push_back(static_cast<std::int32_t>(start));
    label[static_cast<std::size_t>(start)] = comp_id;
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      comp.push_back(static_cast<std::int32_t>(v));
      const Index z = v / (h * w), y = (v / w) % h, x = v % w;
      for (Index dz = (rank == 3 ? -1 : 0); dz <= (rank == 3 ? 1 : 0); ++dz)
        for (Index dy = -1; dy <= 1; ++dy)
          for (Index dx = -1; dx <= 1; ++dx) {
            if (dz == 0 && dy == 0 && dx == 0) continue;
            const Index nz = z + dz, ny = y + dy, nx = x + dx;
            if (nz < 0 || nz >= d || ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const Index nv = idx_of(nz, ny, nx);
            if (mask[nv] && label[static_cast<std::size_t>(nv)] < 0) {
              label[static_cast<std::size_t>(nv)] = comp_id;
              stack.push_back(static_cast<std::int32_t>(nv));
            }
          }
    }
    std::sort(comp.begin(), comp.end());
  }
  return out;
}

LesionSet connected_components(const MaskU8& mask) {
  return connected_components(mask.data(), {mask.rows(), mask.cols()});
}

MaskU8 threshold_predictions(const Tensor<float>& prob, float tau) {
  if (prob.rank() != 3 || prob.shape[0] != 1)
    throw ShapeError("threshold_predictions: expected {1,H,W}");
  const Index h = prob.shape[1], w = prob.shape[2];
  MaskU8 out(h, w);
  for (Index i = 0; i < h * w; ++i)
    out.data()[i] = prob.data[i] >= tau ? std::uint8_t(1) : std::uint8_t(0);
  return out;
}

MatchResult match_lesions(const LesionSet& pred, const LesionSet& truth, Index field_size,
                          int min_overlap_voxels) {
  std::vector<std::int32_t> truth_label(static_cast<std::size_t>(field_size), -1);
  for (std::size_t t = 0; t < truth.components.size(); ++t)
    for (std::int32_t v : truth.components[t]) truth_label[static_cast<std::size_t>(v)] = static_cast<std::int32_t>(t);

  const auto n_truth = truth.components.size();
  std::vector<Index> union_size(n_truth, 0), inter_size(n_truth, 0);
  std::vector<char> detected(n_truth, 0);

  MatchResult res;
  std::vector<Index> overlap(n_truth, 0);
  std::vector<std::int32_t> touched;
  for (const auto& comp : pred.components) {
    touched.clear();
    for (std::int32_t v : comp) {
      const std::int32_t t = truth_label[static_cast<std::size_t>(v)];
      if (t >= 0) {
        if (overlap[t] == 0) touched.push_back(t);
        ++overlap[t];
      }
    }
    bool matched_any = false;
    for (std::int32_t t : touched) {
      if (overlap[t] >= min_overlap_voxels) {
        matched_any = true;
        detected[t] = 1;
        union_size[t] += static_cast<Index>(comp.size());
        inter_size[t] += overlap[t];
      }
      overlap[t] = 0;
    }
    if (!matched_any) ++res.fp;
  }

  for (std::size_t t = 0; t < n_truth; ++t) {
    if (detected[t]) {
      ++res.tp;
      res.pairs.push_back(LesionMatch{static_cast<int>(t),
                                      static_cast<Index>(truth.components[t].size()),
                                      union_size[t], inter_size[t]});
    } else {
      ++res.fn;
    }
  }
  return res;
}

MetricsReport finalize_report(long tp, long fp, long fn, int n_volumes,
                              const std::vector<double>& pair_dscs, long small_tp) {
  if (n_volumes <= 0) throw ShapeError("finalize_report: empty test set");
  MetricsReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  r.n_volumes = n_volumes;
  if (tp + fn > 0) {
    r.sensitivity = double(tp) / double(tp + fn);
    r.sensitivity_defined = true;
  }
  if (tp + fp > 0) {
    r.precision = double(tp) / double(tp + fp);
    r.precision_defined = true;
  }
  r.afpr = double(fp) / double(n_volumes);
  if (!pair_dscs.empty()) {
    r.mean_tp_dsc = std::accumulate(pair_dscs.begin(), pair_dscs.end(), 0.0) /
                    static_cast<double>(pair_dscs.size());
    r.dsc_defined = true;
  }
  if (tp > 0) {
    r.small_tp_ratio = double(small_tp) / double(tp);
    r.small_ratio_defined = true;
  }
  return r;
}

MetricsReport evaluate(const ModelState<float>& model, const std::vector<LabeledVolume>& test_set,
                       const EvalConfig& cfg) {
  if (test_set.empty()) throw ShapeError("evaluate: empty test set");
  long tp = 0, fp = 0, fn = 0, small_tp = 0;
  std::vector<double> dscs;
  for (const LabeledVolume& vol : test_set) {
    const Index h = vol.image.rows(), w = vol.image.cols();
    Tensor<float> input{{1, h, w}, Eigen::Map<const VecX<float>>(vol.image.data(), h * w)};
    Tape<float> tape = net_forward(model, input);
    MaskU8 pred_mask = threshold_predictions(tape.output, cfg.tau);
    LesionSet pred = connected_components(pred_mask);
    LesionSet truth = connected_components(vol.mask);
    MatchResult m = match_lesions(pred, truth, h * w, cfg.min_overlap_voxels);
    tp += m.tp;
    fp += m.fp;
    fn += m.fn;
    for (const LesionMatch& pair : m.pairs) {
      dscs.push_back(pair.dsc());
      if (pair.truth_size <= cfg.small_area_voxels) ++small_tp;
    }
  }
  return finalize_report(tp, fp, fn, static_cast<int>(test_set.size()), dscs, small_tp);
}

}  // namespace ringfed
