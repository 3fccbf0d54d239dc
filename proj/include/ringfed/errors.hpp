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

#include <stdexcept>
#include <string>

namespace ringfed {

/// Bad scenario file or out-of-range setting. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor/layer/vector extents.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// NaN/Inf reached a value that must stay finite. CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem or serialization failure (incl. CRC mismatch). CLI exit code 4.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ringfed
