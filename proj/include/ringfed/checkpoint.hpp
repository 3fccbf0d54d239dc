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
#include <optional>
#include <vector>

#include "ringfed/model.hpp"
#include "ringfed/si.hpp"

namespace ringfed {

/// Checkpoint wire format, little-endian throughout:
///   "RFCL" | format u16 | layer count u16
///   per layer: kind u8 (bit 7 = low-res pathway) | dims u32 x ndims(kind)
///   param count u64 | params f32 x count
///   optional "SIX1" | w_acc, omega, anchor, prev_final f32 x count each
///                   | c f64 | xi f64 | center index u32
///   CRC32 of all preceding bytes
/// Round-trips are bit-exact: floats are copied at the bit level.
inline constexpr std::uint16_t kCheckpointFormat = 1;

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t seed = 0);

struct CheckpointContents {
  ModelState<float> model;
  std::optional<SIState<float>> si;
};

/// Serialize to bytes; bumps the model's save counter.
std::vector<std::uint8_t> serialize_checkpoint(ModelState<float>& model,
                                               const SIState<float>* si = nullptr);

/// Parse and verify the CRC; throws IoError on any mismatch.
CheckpointContents parse_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, ModelState<float>& model,
                     const SIState<float>* si = nullptr);
CheckpointContents load_checkpoint(const std::filesystem::path& path);

}  // namespace ringfed
