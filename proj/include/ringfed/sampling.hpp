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

#include <cmath>
#include <vector>

#include "ringfed/synthdata.hpp"
#include "ringfed/tensor.hpp"

namespace ringfed {

struct PatchProvenance {
  int volume_id = 0;
  Index cy = 0, cx = 0;  // patch center
};

/// Class-balanced batch of patches with aligned binary targets.
struct PatchBatch {
  std::vector<Tensor<float>> inputs;   // each {1, ph, pw}
  std::vector<Tensor<float>> targets;  // each {1, ph, pw}, values 0/1
  std::vector<PatchProvenance> provenance;

  std::size_t size() const { return inputs.size(); }
};

namespace detail {
/// Reflect an out-of-range index back into [0, n) without repeating the edge.
inline Index mirror_index(Index i, Index n) {
  if (n == 1) return 0;
  const Index period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}
}  // namespace detail

/// Cut one patch centered at (cy, cx); borders are mirror-padded.
inline void extract_patch(const LabeledVolume& vol, Index cy, Index cx, Index ph, Index pw,
                          Tensor<float>& input, Tensor<float>& target) {
  const Index h = vol.image.rows(), w = vol.image.cols();
  if (ph > h || pw > w) throw ShapeError("patch larger than volume");
  input = Tensor<float>::zeros({1, ph, pw});
  target = Tensor<float>::zeros({1, ph, pw});
  const Index y0 = cy - ph / 2, x0 = cx - pw / 2;
  for (Index y = 0; y < ph; ++y) {
    const Index sy = detail::mirror_index(y0 + y, h);
    for (Index x = 0; x < pw; ++x) {
      const Index sx = detail::mirror_index(x0 + x, w);
      input.data[y * pw + x] = vol.image(sy, sx);
      target.data[y * pw + x] = static_cast<float>(vol.mask(sy, sx));
    }
  }
}

/// ceil(n * fg_fraction) patches centered on a random foreground voxel (when
/// the volume has any), the rest centered uniformly at random.
inline PatchBatch sample_patches(const LabeledVolume& vol, int n, double fg_fraction, Index ph,
                                 Index pw, Rng& rng) {
  if (n < 1) throw ShapeError("sample_patches: n must be >= 1");
  PatchBatch batch;
  batch.inputs.resize(n);
  batch.targets.resize(n);
  batch.provenance.resize(n);
  const int n_fg = static_cast<int>(std::ceil(n * fg_fraction));
  const Index h = vol.image.rows(), w = vol.image.cols();
  for (int i = 0; i < n; ++i) {
    Index cy, cx;
    if (i < n_fg && !vol.fg_indices.empty()) {
      const auto pick = vol.fg_indices[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(vol.fg_indices.size()) - 1))];
      cy = pick / w;
      cx = pick % w;
    } else {
      cy = rng.uniform_int(0, h - 1);
      cx = rng.uniform_int(0, w - 1);
    }
    extract_patch(vol, cy, cx, ph, pw, batch.inputs[i], batch.targets[i]);
    batch.provenance[i] = PatchProvenance{vol.id, cy, cx};
  }
  return batch;
}

/// Dataset-level batch: each slot draws its source volume uniformly, then
/// applies the same foreground/background rule per slot.
inline PatchBatch sample_batch(const std::vector<LabeledVolume>& volumes, int n,
                               double fg_fraction, Index ph, Index pw, Rng& rng) {
  if (volumes.empty()) throw ShapeError("sample_batch: empty dataset");
  PatchBatch batch;
  batch.inputs.resize(n);
  batch.targets.resize(n);
  batch.provenance.resize(n);
  const int n_fg = static_cast<int>(std::ceil(n * fg_fraction));
  for (int i = 0; i < n; ++i) {
    const LabeledVolume& vol = volumes[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(volumes.size()) - 1))];
    const Index h = vol.image.rows(), w = vol.image.cols();
    Index cy, cx;
    if (i < n_fg && !vol.fg_indices.empty()) {
      const auto pick = vol.fg_indices[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(vol.fg_indices.size()) - 1))];
      cy = pick / w;
      cx = pick % w;
    } else {
      cy = rng.uniform_int(0, h - 1);
      cx = rng.uniform_int(0, w - 1);
    }
    extract_patch(vol, cy, cx, ph, pw, batch.inputs[i], batch.targets[i]);
    batch.provenance[i] = PatchProvenance{vol.id, cy, cx};
  }
  return batch;
}

struct AugmentConfig {
  bool flips = true;
  bool rotations = true;        // quarter turns; square patches only
  float intensity_scale = 0.05f;  // multiplicative, uniform in [1-s, 1+s]
};

/// In-place flip/rotate/intensity-scale of one patch pair. Geometry applies
/// to input and target alike; intensity only to the input.
inline void augment_patch(Tensor<float>& input, Tensor<float>& target, const AugmentConfig& cfg,
                          Rng& rng) {
  const Index ph = input.shape[1], pw = input.shape[2];
  auto apply_geom = [&](auto&& map) {
    VecX<float> in2(input.data.size()), tg2(target.data.size());
    for (Index y = 0; y < ph; ++y)
      for (Index x = 0; x < pw; ++x) {
        auto [sy, sx] = map(y, x);
        in2[y * pw + x] = input.data[sy * pw + sx];
        tg2[y * pw + x] = target.data[sy * pw + sx];
      }
    input.data = std::move(in2);
    target.data = std::move(tg2);
  };
  if (cfg.rotations && ph == pw) {
    switch (rng.uniform_int(0, 3)) {
      case 1: apply_geom([&](Index y, Index x) { return std::pair(x, ph - 1 - y); }); break;
      case 2: apply_geom([&](Index y, Index x) { return std::pair(ph - 1 - y, pw - 1 - x); }); break;
      case 3: apply_geom([&](Index y, Index x) { return std::pair(pw - 1 - x, y); }); break;
      default: break;
    }
  }
  if (cfg.flips) {
    if (rng.uniform() < 0.5) apply_geom([&](Index y, Index x) { return std::pair(y, pw - 1 - x); });
    if (rng.uniform() < 0.5) apply_geom([&](Index y, Index x) { return std::pair(ph - 1 - y, x); });
  }
  if (cfg.intensity_scale > 0)
    input.data *= static_cast<float>(rng.uniform(1.0 - cfg.intensity_scale, 1.0 + cfg.intensity_scale));
}

}  // namespace ringfed
