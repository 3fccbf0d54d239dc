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

#include "ringfed/layers.hpp"
#include "ringfed/rng.hpp"
#include "ringfed/tensor.hpp"

namespace ringfed {

/// Layer topology plus one flat trainable parameter vector. The flat vector
/// is the unit shipped between centers; per-layer views are Eigen maps into
/// contiguous segments of it.
template <class Scalar>
struct ModelState {
  std::vector<LayerSpec> layers;
  VecX<Scalar> theta;
  std::uint64_t version = 0;  // monotone save counter, bumped by save_checkpoint

  std::vector<Index> offsets;  // per-layer start into theta

  ModelState() = default;
  explicit ModelState(std::vector<LayerSpec> specs) : layers(std::move(specs)) {
    validate_topology(layers);
    offsets.reserve(layers.size());
    Index off = 0;
    for (const auto& l : layers) {
      offsets.push_back(off);
      off += static_cast<Index>(param_count(l));
    }
    theta = VecX<Scalar>::Zero(off);
  }

  Index param_size() const { return theta.size(); }

  Eigen::Map<VecX<Scalar>> layer_params(std::size_t i) {
    return {theta.data() + offsets[i], static_cast<Index>(param_count(layers[i]))};
  }
  Eigen::Map<const VecX<Scalar>> layer_params(std::size_t i) const {
    return {theta.data() + offsets[i], static_cast<Index>(param_count(layers[i]))};
  }

  template <class T>
  ModelState<T> cast() const {
    ModelState<T> m(layers);
    m.theta = theta.template cast<T>();
    m.version = version;
    return m;
  }
};

/// Glorot-uniform weights, zero biases. Draw order is fixed by the layer
/// list, so identical (layers, seed) gives identical parameters.
template <class Scalar>
ModelState<Scalar> make_model(std::vector<LayerSpec> specs, Rng& rng) {
  ModelState<Scalar> m(std::move(specs));
  for (std::size_t i = 0; i < m.layers.size(); ++i) {
    const LayerSpec& l = m.layers[i];
    std::size_t n = param_count(l);
    if (n == 0) continue;
    double fan_in = 0, fan_out = 0;
    std::size_t weights = 0;
    switch (l.kind) {
      case LayerKind::Dense:
        fan_in = l.dims[0];
        fan_out = l.dims[1];
        weights = std::size_t(l.dims[0]) * l.dims[1];
        break;
      case LayerKind::Conv2d: {
        double rf = double(l.dims[2]) * l.dims[2];
        fan_in = l.dims[0] * rf;
        fan_out = l.dims[1] * rf;
        weights = std::size_t(l.dims[0]) * l.dims[1] * l.dims[2] * l.dims[2];
        break;
      }
      case LayerKind::Conv3d: {
        double rf = double(l.dims[2]) * l.dims[2] * l.dims[2];
        fan_in = l.dims[0] * rf;
        fan_out = l.dims[1] * rf;
        weights = std::size_t(l.dims[0]) * l.dims[1] * l.dims[2] * l.dims[2] * l.dims[2];
        break;
      }
      default:
        break;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    auto seg = m.layer_params(i);
    for (std::size_t k = 0; k < weights; ++k)
      seg[static_cast<Index>(k)] = static_cast<Scalar>(rng.uniform(-limit, limit));
    // trailing entries are biases, already zero
  }
  return m;
}

}  // namespace ringfed
