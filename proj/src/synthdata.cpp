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

#include "ringfed/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ringfed/metrics.hpp"

namespace ringfed {

namespace {

constexpr std::uint64_t kTagVolume = 11;
constexpr std::uint64_t kTagCenter = 13;
constexpr std::uint64_t kValTag = 1000;
constexpr std::uint64_t kTestTag = 1001;

/// Coarse uniform grid bilinearly upsampled: smooth background texture.
ImageF smooth_noise(Index h, Index w, int cells, double amplitude, Rng& rng) {
  const int gh = cells + 1, gw = cells + 1;
  ImageF grid(gh, gw);
  for (int y = 0; y < gh; ++y)
    for (int x = 0; x < gw; ++x) grid(y, x) = static_cast<float>(rng.uniform(-amplitude, amplitude));
  ImageF out(h, w);
  for (Index y = 0; y < h; ++y) {
    const double gy = double(y) / double(h - 1) * cells;
    const int y0 = std::min(static_cast<int>(gy), cells - 0);
    const double fy = gy - y0;
    for (Index x = 0; x < w; ++x) {
      const double gx = double(x) / double(w - 1) * cells;
      const int x0 = std::min(static_cast<int>(gx), cells - 0);
      const double fx = gx - x0;
      const int y1 = std::min(y0 + 1, cells), x1 = std::min(x0 + 1, cells);
      out(y, x) = static_cast<float>((1 - fy) * ((1 - fx) * grid(y0, x0) + fx * grid(y0, x1)) +
                                     fy * ((1 - fx) * grid(y1, x0) + fx * grid(y1, x1)));
    }
  }
  return out;
}

void stamp_blob(ImageF& img, MaskU8* mask, double cy, double cx, double radius, double contrast) {
  // Half-max disc: intensity contrast*exp(-r^2/(2*sigma^2)) with the mask at
  // exp >= 1/2, i.e. r <= radius.
  const double sigma = radius / std::sqrt(2.0 * std::log(2.0));
  const Index h = img.rows(), w = img.cols();
  const Index reach = static_cast<Index>(std::ceil(3.0 * sigma));
  const Index y0 = std::max<Index>(0, static_cast<Index>(cy) - reach);
  const Index y1 = std::min<Index>(h - 1, static_cast<Index>(cy) + reach);
  const Index x0 = std::max<Index>(0, static_cast<Index>(cx) - reach);
  const Index x1 = std::min<Index>(w - 1, static_cast<Index>(cx) + reach);
  const double r2lim = radius * radius;
  for (Index y = y0; y <= y1; ++y)
    for (Index x = x0; x <= x1; ++x) {
      const double dy = y - cy, dx = x - cx;
      const double r2 = dy * dy + dx * dx;
      img(y, x) += static_cast<float>(contrast * std::exp(-r2 / (2.0 * sigma * sigma)));
      if (mask && r2 <= r2lim) (*mask)(y, x) = 1;
    }
}

void stamp_ridge(ImageF& img, double cy, double cx, double angle, double half_len, double width,
                 double intensity) {
  const double uy = std::sin(angle), ux = std::cos(angle);
  const Index h = img.rows(), w = img.cols();
  const Index reach = static_cast<Index>(std::ceil(half_len + 3.0 * width));
  const Index y0 = std::max<Index>(0, static_cast<Index>(cy) - reach);
  const Index y1 = std::min<Index>(h - 1, static_cast<Index>(cy) + reach);
  const Index x0 = std::max<Index>(0, static_cast<Index>(cx) - reach);
  const Index x1 = std::min<Index>(w - 1, static_cast<Index>(cx) + reach);
  for (Index y = y0; y <= y1; ++y)
    for (Index x = x0; x <= x1; ++x) {
      const double dy = y - cy, dx = x - cx;
      const double along = dy * uy + dx * ux;
      const double perp = -dy * ux + dx * uy;
      const double over = std::max(0.0, std::abs(along) - half_len);  // capsule profile
      const double d2 = perp * perp + over * over;
      img(y, x) += static_cast<float>(intensity * std::exp(-d2 / (2.0 * width * width)));
    }
}

}  // namespace

std::vector<CenterShift> default_shifts(int n_centers, const ShiftRanges& r) {
  std::vector<CenterShift> shifts;
  shifts.reserve(static_cast<std::size_t>(n_centers));
  for (int i = 0; i < n_centers; ++i) {
    const float t = n_centers > 1 ? float(i) / float(n_centers - 1) : 0.5f;
    CenterShift s;
    s.gain = r.gain_min + t * (r.gain_max - r.gain_min);
    s.bias = r.bias_min + t * (r.bias_max - r.bias_min);
    s.noise_sigma = r.noise_min + t * (r.noise_max - r.noise_min);
    s.contrast_gamma = r.gamma_min + t * (r.gamma_max - r.gamma_min);
    shifts.push_back(s);
  }
  return shifts;
}

LabeledVolume generate_volume(const TaskSpec& spec, const CenterShift& shift, Rng& rng, int id) {
  const Index h = spec.height, w = spec.width;
  if (h < 8 || w < 8) throw ShapeError("generate_volume: extent too small");
  LabeledVolume vol;
  vol.id = id;
  vol.seed = rng.seed();
  vol.image = ImageF::Constant(h, w, static_cast<float>(spec.background_level));
  vol.image += smooth_noise(h, w, spec.texture_cells, spec.texture_amplitude, rng);
  vol.mask = MaskU8::Zero(h, w);

  struct Placed {
    double cy, cx, radius;
    bool small;
  };
  std::vector<Placed> placed;
  const int n_lesions = rng.poisson(spec.lesions_per_volume);
  bool forced_overlap = false;
  for (int i = 0; i < n_lesions; ++i) {
    const bool small = rng.uniform() < spec.small_fraction;
    const double radius = small ? rng.uniform(spec.small_radius_min, spec.small_radius_max)
                                : rng.uniform(spec.large_radius_min, spec.large_radius_max);
    const double margin = radius + 1.0;
    double cy = 0, cx = 0;
    bool ok = false;
    for (int attempt = 0; attempt < 20 && !ok; ++attempt) {
      cy = rng.uniform(margin, double(h - 1) - margin);
      cx = rng.uniform(margin, double(w - 1) - margin);
      ok = true;
      for (const Placed& p : placed) {
        const double d = std::hypot(cy - p.cy, cx - p.cx);
        if (d < radius + p.radius + 2.5) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) forced_overlap = true;  // keep the last candidate and merge later
    placed.push_back(Placed{cy, cx, radius, small});
  }

  for (const Placed& p : placed)
    stamp_blob(vol.image, &vol.mask, p.cy, p.cx, p.radius,
               p.small ? spec.small_contrast : spec.large_contrast);

  const int n_distractors = rng.poisson(spec.distractors_per_volume);
  for (int i = 0; i < n_distractors; ++i) {
    const double cy = rng.uniform(2.0, double(h - 3));
    const double cx = rng.uniform(2.0, double(w - 3));
    const double angle = rng.uniform(0.0, M_PI);
    const double half_len =
        rng.uniform(spec.distractor_length_min, spec.distractor_length_max) / 2.0;
    stamp_ridge(vol.image, cy, cx, angle, half_len, spec.distractor_width,
                spec.distractor_intensity);
  }

  // Center shift: gamma contrast, then gain/bias, then additive noise. The
  // mask is left untouched.
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x) {
      double v = std::clamp(double(vol.image(y, x)), 0.0, 2.0);
      v = std::pow(v, double(shift.contrast_gamma));
      v = v * shift.gain + shift.bias;
      if (shift.noise_sigma > 0) v += shift.noise_sigma * rng.normal();
      vol.image(y, x) = static_cast<float>(v);
    }

  // Registry: straight from placement when nothing touches, else rebuilt from
  // the actual connected components (touching lesions merge).
  LesionSet cc = connected_components(vol.mask);
  if (!forced_overlap && cc.count() == placed.size()) {
    const int small_cut = spec.small_area_voxels();
    for (std::size_t i = 0; i < placed.size(); ++i) {
      LesionInfo info;
      info.cy = static_cast<float>(placed[i].cy);
      info.cx = static_cast<float>(placed[i].cx);
      info.radius = static_cast<float>(placed[i].radius);
      info.id = static_cast<int>(i);
      info.small = placed[i].small;
      info.area = small_cut;  // refined below from the actual components
      vol.registry.push_back(info);
    }
    // Map each component to its registry entry by centroid distance.
    for (const auto& comp : cc.components) {
      double sy = 0, sx = 0;
      for (std::int32_t v : comp) {
        sy += double(v / w);
        sx += double(v % w);
      }
      sy /= double(comp.size());
      sx /= double(comp.size());
      std::size_t best = 0;
      double best_d = 1e30;
      for (std::size_t i = 0; i < vol.registry.size(); ++i) {
        const double d = std::hypot(sy - vol.registry[i].cy, sx - vol.registry[i].cx);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      vol.registry[best].area = static_cast<int>(comp.size());
    }
  } else {
    const int small_cut = spec.small_area_voxels();
    int next_id = 0;
    for (const auto& comp : cc.components) {
      double sy = 0, sx = 0;
      for (std::int32_t v : comp) {
        sy += double(v / w);
        sx += double(v % w);
      }
      LesionInfo info;
      info.cy = static_cast<float>(sy / double(comp.size()));
      info.cx = static_cast<float>(sx / double(comp.size()));
      info.area = static_cast<int>(comp.size());
      info.radius = static_cast<float>(std::sqrt(double(comp.size()) / M_PI));
      info.small = info.area <= small_cut;
      info.id = next_id++;
      vol.registry.push_back(info);
    }
  }

  vol.fg_indices.reserve(64);
  for (Index i = 0; i < h * w; ++i)
    if (vol.mask.data()[i]) vol.fg_indices.push_back(static_cast<std::int32_t>(i));
  return vol;
}

Scenario build_scenario(const TaskSpec& spec, int n_centers, int per_center, int val_n, int test_n,
                        const std::vector<CenterShift>& shifts, std::uint64_t master_seed) {
  if (n_centers < 1) throw ConfigError("build_scenario: need at least one center");
  if (static_cast<int>(shifts.size()) != n_centers)
    throw ConfigError("build_scenario: one shift per center required");
  Scenario sc;
  const CenterShift neutral;  // identity shift for validation and test
  Rng master(master_seed);
  int next_id = 0;
  for (int c = 0; c < n_centers; ++c) {
    CenterData center;
    center.id = c + 1;
    center.shift = shifts[static_cast<std::size_t>(c)];
    center.local_seed = derive_seed(master_seed, kTagCenter + static_cast<std::uint64_t>(c));
    center.volumes.reserve(static_cast<std::size_t>(per_center));
    for (int i = 0; i < per_center; ++i) {
      Rng vrng(derive_seed(derive_seed(master_seed, static_cast<std::uint64_t>(c)),
                           kTagVolume + static_cast<std::uint64_t>(i)));
      center.volumes.push_back(generate_volume(spec, center.shift, vrng, next_id++));
    }
    sc.centers.push_back(std::move(center));
  }
  for (int i = 0; i < val_n; ++i) {
    Rng vrng(derive_seed(derive_seed(master_seed, kValTag), kTagVolume + static_cast<std::uint64_t>(i)));
    sc.val_set.push_back(generate_volume(spec, neutral, vrng, next_id++));
  }
  for (int i = 0; i < test_n; ++i) {
    Rng vrng(derive_seed(derive_seed(master_seed, kTestTag), kTagVolume + static_cast<std::uint64_t>(i)));
    sc.test_set.push_back(generate_volume(spec, neutral, vrng, next_id++));
  }
  return sc;
}

std::uint64_t dataset_hash(const std::vector<LabeledVolume>& volumes) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&h](const std::uint8_t* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  for (const LabeledVolume& v : volumes) {
    mix(reinterpret_cast<const std::uint8_t*>(v.image.data()),
        sizeof(float) * static_cast<std::size_t>(v.image.size()));
    mix(v.mask.data(), static_cast<std::size_t>(v.mask.size()));
  }
  return h;
}

void write_volume_file(const std::filesystem::path& path, const LabeledVolume& vol) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string());
  auto u32 = [&f](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  u32(static_cast<std::uint32_t>(vol.image.rows()));
  u32(static_cast<std::uint32_t>(vol.image.cols()));
  u32(static_cast<std::uint32_t>(vol.registry.size()));
  f.write(reinterpret_cast<const char*>(vol.image.data()),
          static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(vol.image.size())));
  const Index n = vol.mask.size();
  std::vector<std::uint8_t> packed(static_cast<std::size_t>((n + 7) / 8), 0);
  for (Index i = 0; i < n; ++i)
    if (vol.mask.data()[i]) packed[static_cast<std::size_t>(i / 8)] |= std::uint8_t(1u << (i % 8));
  f.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

LabeledVolume read_volume_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  auto u32 = [&f]() {
    std::uint32_t v = 0;
    f.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  LabeledVolume vol;
  const Index h = u32(), w = u32();
  const std::uint32_t n_lesions = u32();
  (void)n_lesions;
  if (!f || h <= 0 || w <= 0) throw IoError("bad volume file: " + path.string());
  vol.image.resize(h, w);
  f.read(reinterpret_cast<char*>(vol.image.data()),
         static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(h * w)));
  std::vector<std::uint8_t> packed(static_cast<std::size_t>((h * w + 7) / 8));
  f.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
  if (!f) throw IoError("bad volume file: " + path.string());
  vol.mask.resize(h, w);
  for (Index i = 0; i < h * w; ++i)
    vol.mask.data()[i] = (packed[static_cast<std::size_t>(i / 8)] >> (i % 8)) & 1u;
  for (Index i = 0; i < h * w; ++i)
    if (vol.mask.data()[i]) vol.fg_indices.push_back(static_cast<std::int32_t>(i));
  return vol;
}

void dump_dataset(const Scenario& scenario, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw IoError("cannot open manifest");
  manifest << "volume_id,center,seed,lesions,small_lesions,mask_voxels\n";
  auto dump_group = [&](const std::vector<LabeledVolume>& vols, const std::string& group) {
    for (const LabeledVolume& v : vols) {
      char name[64];
      std::snprintf(name, sizeof name, "vol_%06d.bin", v.id);
      write_volume_file(dir / name, v);
      int small = 0;
      for (const auto& l : v.registry) small += l.small ? 1 : 0;
      manifest << v.id << "," << group << "," << v.seed << "," << v.registry.size() << ","
               << small << "," << v.fg_indices.size() << "\n";
    }
  };
  for (const CenterData& c : scenario.centers) dump_group(c.volumes, std::to_string(c.id));
  dump_group(scenario.val_set, "val");
  dump_group(scenario.test_set, "test");
}

}  // namespace ringfed
