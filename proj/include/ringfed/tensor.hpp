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

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "ringfed/errors.hpp"

namespace ringfed {

using Index = Eigen::Index;

template <class Scalar>
using VecX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

inline Index numel(const std::vector<Index>& shape) {
  Index n = 1;
  for (Index e : shape) n *= e;
  return n;
}

/// Dense row-major tensor; channel axis first for feature maps
/// ({C,H,W} in 2D, {C,D,H,W} in 3D). Flat storage is an Eigen array so the
/// free functions below stay expression-friendly.
template <class Scalar>
struct Tensor {
  std::vector<Index> shape;
  VecX<Scalar> data;

  Tensor() = default;
  Tensor(std::vector<Index> s, VecX<Scalar> d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size()) throw ShapeError("tensor data does not match shape");
  }

  static Tensor zeros(std::vector<Index> s) {
    Index n = numel(s);
    return Tensor{std::move(s), VecX<Scalar>::Zero(n)};
  }

  Index size() const { return data.size(); }
  Index rank() const { return static_cast<Index>(shape.size()); }

  bool all_finite() const { return data.isFinite().all(); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  template <class T>
  Tensor<T> cast() const {
    return Tensor<T>{shape, data.template cast<T>()};
  }
};

template <class Scalar>
void require_same_shape(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": shape mismatch");
}

template <class Scalar>
void require_finite(const Tensor<Scalar>& t, const char* what) {
  if (!t.all_finite()) throw NumericalError(std::string(what) + ": non-finite value");
}

template <class Scalar>
void require_finite(const VecX<Scalar>& v, const char* what) {
  if (!v.isFinite().all()) throw NumericalError(std::string(what) + ": non-finite value");
}

inline std::string shape_str(const std::vector<Index>& s) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

}  // namespace ringfed
