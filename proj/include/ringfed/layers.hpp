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
#include <string>
#include <vector>

#include "ringfed/tensor.hpp"

namespace ringfed {

enum class LayerKind : std::uint8_t {
  Dense = 0,
  Conv2d = 1,
  Conv3d = 2,
  Relu = 3,
  Sigmoid = 4,
  DownsampleAvg = 5,
  UpsampleNearest = 6,
  Concat = 7,
};

/// Which stream of the two-pathway network a layer operates on. The low-res
/// stream forks from the network input and rejoins at the Concat layer.
enum class Pathway : std::uint8_t { NormalRes = 0, LowRes = 1 };

/// dims by kind:
///   Dense            {in, out}
///   Conv2d / Conv3d  {cin, cout, k}   (odd k, stride 1, zero "same" padding)
///   DownsampleAvg    {factor}
///   UpsampleNearest  {factor}
///   Relu / Sigmoid / Concat  {}
struct LayerSpec {
  LayerKind kind;
  Pathway pathway = Pathway::NormalRes;
  std::vector<std::uint32_t> dims;
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::Conv3d: return "conv3d";
    case LayerKind::Relu: return "relu";
    case LayerKind::Sigmoid: return "sigmoid";
    case LayerKind::DownsampleAvg: return "downsample-avg";
    case LayerKind::UpsampleNearest: return "upsample-nearest";
    case LayerKind::Concat: return "concat";
  }
  return "?";
}

/// Number of dims entries each kind carries; the checkpoint reader relies on
/// this being a function of the kind alone.
inline std::size_t layer_ndims(LayerKind k) {
  switch (k) {
    case LayerKind::Dense: return 2;
    case LayerKind::Conv2d: return 3;
    case LayerKind::Conv3d: return 3;
    case LayerKind::DownsampleAvg: return 1;
    case LayerKind::UpsampleNearest: return 1;
    default: return 0;
  }
}

inline std::size_t param_count(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Dense:
      return std::size_t(l.dims[0]) * l.dims[1] + l.dims[1];
    case LayerKind::Conv2d:
      return std::size_t(l.dims[0]) * l.dims[1] * l.dims[2] * l.dims[2] + l.dims[1];
    case LayerKind::Conv3d:
      return std::size_t(l.dims[0]) * l.dims[1] * l.dims[2] * l.dims[2] * l.dims[2] + l.dims[1];
    default:
      return 0;
  }
}

inline std::size_t param_count(const std::vector<LayerSpec>& layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += param_count(l);
  return n;
}

inline void validate_layer(const LayerSpec& l) {
  if (l.dims.size() != layer_ndims(l.kind))
    throw ShapeError(std::string(layer_kind_name(l.kind)) + ": wrong dims count");
  for (std::uint32_t d : l.dims)
    if (d == 0) throw ShapeError(std::string(layer_kind_name(l.kind)) + ": zero extent");
  if ((l.kind == LayerKind::Conv2d || l.kind == LayerKind::Conv3d) && l.dims[2] % 2 == 0)
    throw ShapeError("conv kernel must be odd");
}

/// Structural rules for the two-pathway list. Shape composition is checked
/// separately by infer_shapes once the input extent is known.
inline void validate_topology(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw ShapeError("empty layer list");
  int sigmoids = 0, concats = 0;
  std::size_t last_lowres = 0, concat_pos = 0;
  bool any_lowres = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    validate_layer(layers[i]);
    const auto& l = layers[i];
    if (l.kind == LayerKind::Sigmoid) ++sigmoids;
    if (l.kind == LayerKind::Concat) {
      ++concats;
      concat_pos = i;
      if (l.pathway != Pathway::NormalRes) throw ShapeError("concat must sit on the normal-res stream");
    }
    if (l.pathway == Pathway::LowRes) {
      any_lowres = true;
      last_lowres = i;
      if (l.kind == LayerKind::Sigmoid) throw ShapeError("sigmoid must terminate the normal-res stream");
    }
  }
  if (sigmoids != 1 || layers.back().kind != LayerKind::Sigmoid)
    throw ShapeError("exactly one sigmoid, and it must be the terminal layer");
  if (concats > 1) throw ShapeError("at most one concat");
  if (any_lowres && concats == 0) throw ShapeError("low-res layers require a concat");
  if (!any_lowres && concats > 0) throw ShapeError("concat requires a low-res stream");
  if (any_lowres && last_lowres > concat_pos) throw ShapeError("low-res layer after concat");
}

/// Output shape of one layer given its input stream shape ({C, spatial...}).
inline std::vector<Index> output_shape(const LayerSpec& l, const std::vector<Index>& in) {
  auto spatial_rank = static_cast<std::size_t>(in.size() - 1);
  switch (l.kind) {
    case LayerKind::Dense: {
      if (numel(in) != static_cast<Index>(l.dims[0]))
        throw ShapeError("dense: input size " + shape_str(in) + " != " + std::to_string(l.dims[0]));
      return {static_cast<Index>(l.dims[1])};
    }
    case LayerKind::Conv2d:
    case LayerKind::Conv3d: {
      std::size_t want = l.kind == LayerKind::Conv2d ? 2u : 3u;
      if (spatial_rank != want) throw ShapeError("conv: spatial rank mismatch");
      if (in[0] != static_cast<Index>(l.dims[0])) throw ShapeError("conv: channel mismatch");
      std::vector<Index> out = in;
      out[0] = static_cast<Index>(l.dims[1]);
      return out;  // same padding, stride 1
    }
    case LayerKind::DownsampleAvg: {
      std::vector<Index> out = in;
      Index f = static_cast<Index>(l.dims[0]);
      for (std::size_t i = 1; i < out.size(); ++i) out[i] = (in[i] + f - 1) / f;
      return out;
    }
    case LayerKind::UpsampleNearest: {
      std::vector<Index> out = in;
      for (std::size_t i = 1; i < out.size(); ++i) out[i] = in[i] * static_cast<Index>(l.dims[0]);
      return out;
    }
    case LayerKind::Relu:
    case LayerKind::Sigmoid:
      return in;
    case LayerKind::Concat:
      throw ShapeError("concat shape is computed from both streams");
  }
  throw ShapeError("unknown layer kind");
}

}  // namespace ringfed
