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
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ringfed/rng.hpp"
#include "ringfed/tensor.hpp"

namespace ringfed {

using ImageF = Eigen::Array<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskU8 = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Synthetic task parameters. Lesions are soft-edged Gaussian blobs whose
/// mask is the half-max disc; small lesions get lower contrast so that
/// small-lesion sensitivity is the binding metric. Vessel-like elongated
/// distractors share the small-lesion intensity band but never enter the
/// mask.
struct TaskSpec {
  Index height = 64;
  Index width = 64;
  double lesions_per_volume = 2.2;
  double small_fraction = 0.444;
  double small_radius_min = 1.6;
  double small_radius_max = 2.4;
  double large_radius_min = 3.0;
  double large_radius_max = 5.0;
  double small_contrast = 0.28;
  double large_contrast = 0.55;
  double background_level = 0.35;
  double texture_amplitude = 0.10;
  int texture_cells = 8;  // coarse-noise grid, bilinearly upsampled
  double distractors_per_volume = 3.0;
  double distractor_length_min = 4.0;
  double distractor_length_max = 10.0;
  double distractor_width = 1.1;
  double distractor_intensity = 0.26;

  /// Area cutoff separating "small" lesions in reports; defaults to the disc
  /// area at small_radius_max.
  int small_area_voxels() const {
    return static_cast<int>(std::ceil(M_PI * small_radius_max * small_radius_max));
  }
};

/// Per-center appearance shift, applied to the image only.
struct CenterShift {
  float gain = 1.0f;
  float bias = 0.0f;
  float noise_sigma = 0.0f;
  float contrast_gamma = 1.0f;
};

struct LesionInfo {
  float cy = 0, cx = 0;
  float radius = 0;
  int id = 0;
  int area = 0;
  bool small = false;
};

struct LabeledVolume {
  int id = 0;
  std::uint64_t seed = 0;
  ImageF image;
  MaskU8 mask;
  std::vector<LesionInfo> registry;
  std::vector<std::int32_t> fg_indices;  // linear indices of mask voxels, cached for sampling
};

struct CenterData {
  int id = 0;  // 1-based ring position
  CenterShift shift;
  std::uint64_t local_seed = 0;
  std::vector<LabeledVolume> volumes;
};

struct Scenario {
  std::vector<CenterData> centers;
  std::vector<LabeledVolume> val_set;
  std::vector<LabeledVolume> test_set;
};

/// Ranges that default_shifts spreads evenly across the ring, center I at the
/// low end and center N at the high end; the neutral validation/test shift
/// sits mid-range.
struct ShiftRanges {
  float gain_min = 0.75f, gain_max = 1.25f;
  float bias_min = -0.10f, bias_max = 0.10f;
  float noise_min = 0.01f, noise_max = 0.05f;
  float gamma_min = 0.80f, gamma_max = 1.25f;
};

std::vector<CenterShift> default_shifts(int n_centers, const ShiftRanges& ranges = {});

/// One deterministic volume: lesion count ~ Poisson(lesions_per_volume), each
/// small with probability small_fraction; placement retries up to 20 times to
/// avoid touching, merged lesions are re-registered from connected components.
LabeledVolume generate_volume(const TaskSpec& spec, const CenterShift& shift, Rng& rng, int id = 0);

/// Disjoint per-center datasets plus neutral-shift validation and test sets,
/// all derived from master_seed via per-volume substreams.
Scenario build_scenario(const TaskSpec& spec, int n_centers, int per_center, int val_n, int test_n,
                        const std::vector<CenterShift>& shifts, std::uint64_t master_seed);

/// FNV-1a over image and mask bytes; identifies a test set across runs.
std::uint64_t dataset_hash(const std::vector<LabeledVolume>& volumes);

/// Volume dump: u32 height, width, lesion_count, then image as f32 LE and the
/// mask as packed bits (row-major, LSB first).
void write_volume_file(const std::filesystem::path& path, const LabeledVolume& vol);
LabeledVolume read_volume_file(const std::filesystem::path& path);

/// One file per volume plus a manifest CSV (volume id, center, seed, lesion stats).
void dump_dataset(const Scenario& scenario, const std::filesystem::path& dir);

}  // namespace ringfed
