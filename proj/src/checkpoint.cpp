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

#include "ringfed/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace ringfed {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

constexpr std::uint8_t kLowResBit = 0x80;

struct ByteWriter {
  std::vector<std::uint8_t>& out;

  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void f32_vec(const VecX<float>& v) {
    for (Index i = 0; i < v.size(); ++i) f32(v[i]);
  }
  void bytes(const char* s, std::size_t n) {
    out.insert(out.end(), s, s + n);
  }
};

struct ByteReader {
  const std::uint8_t* p;
  const std::uint8_t* end;

  void need(std::size_t n) const {
    if (static_cast<std::size_t>(end - p) < n) throw IoError("checkpoint: truncated");
  }
  std::uint8_t u8() {
    need(1);
    return *p++;
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    p += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    p += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    p += 8;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  VecX<float> f32_vec(Index n) {
    VecX<float> v(n);
    for (Index i = 0; i < n; ++i) v[i] = f32();
    return v;
  }
  std::size_t remaining() const { return static_cast<std::size_t>(end - p); }
};

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t seed) {
  static const auto table = make_crc_table();
  std::uint32_t c = seed ^ 0xffffffffu;
  for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xff] ^ (c >> 8);
  return c ^ 0xffffffffu;
}

std::vector<std::uint8_t> serialize_checkpoint(ModelState<float>& model, const SIState<float>* si) {
  if (si && si->size() != model.param_size())
    throw ShapeError("checkpoint: SI state length does not match model");
  model.version += 1;
  std::vector<std::uint8_t> out;
  out.reserve(64 + 4 * static_cast<std::size_t>(model.param_size()) * (si ? 5 : 1));
  ByteWriter w{out};
  w.bytes("RFCL", 4);
  w.u16(kCheckpointFormat);
  w.u16(static_cast<std::uint16_t>(model.layers.size()));
  for (const LayerSpec& l : model.layers) {
    std::uint8_t kind = static_cast<std::uint8_t>(l.kind);
    if (l.pathway == Pathway::LowRes) kind |= kLowResBit;
    w.u8(kind);
    for (std::uint32_t d : l.dims) w.u32(d);
  }
  w.u64(static_cast<std::uint64_t>(model.param_size()));
  w.f32_vec(model.theta);
  if (si) {
    w.bytes("SIX1", 4);
    w.f32_vec(si->w_acc);
    w.f32_vec(si->omega);
    w.f32_vec(si->anchor);
    w.f32_vec(si->prev_final);
    w.f64(si->c);
    w.f64(si->xi);
    w.u32(si->center_index);
  }
  w.u32(crc32(out.data(), out.size()));
  return out;
}

CheckpointContents parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw IoError("checkpoint: too short");
  const std::uint32_t stored_crc =
      static_cast<std::uint32_t>(bytes[bytes.size() - 4]) |
      (static_cast<std::uint32_t>(bytes[bytes.size() - 3]) << 8) |
      (static_cast<std::uint32_t>(bytes[bytes.size() - 2]) << 16) |
      (static_cast<std::uint32_t>(bytes[bytes.size() - 1]) << 24);
  if (crc32(bytes.data(), bytes.size() - 4) != stored_crc)
    throw IoError("checkpoint: CRC mismatch");

  ByteReader r{bytes.data(), bytes.data() + bytes.size() - 4};
  char magic[4];
  r.need(4);
  std::memcpy(magic, r.p, 4);
  r.p += 4;
  if (std::memcmp(magic, "RFCL", 4) != 0) throw IoError("checkpoint: bad magic");
  if (r.u16() != kCheckpointFormat) throw IoError("checkpoint: unsupported format version");

  const std::uint16_t n_layers = r.u16();
  std::vector<LayerSpec> layers;
  layers.reserve(n_layers);
  for (std::uint16_t i = 0; i < n_layers; ++i) {
    const std::uint8_t raw = r.u8();
    LayerSpec l;
    l.kind = static_cast<LayerKind>(raw & ~kLowResBit);
    l.pathway = (raw & kLowResBit) ? Pathway::LowRes : Pathway::NormalRes;
    if (static_cast<std::uint8_t>(l.kind) > static_cast<std::uint8_t>(LayerKind::Concat))
      throw IoError("checkpoint: unknown layer kind");
    const std::size_t nd = layer_ndims(l.kind);
    l.dims.resize(nd);
    for (std::size_t d = 0; d < nd; ++d) l.dims[d] = r.u32();
    layers.push_back(std::move(l));
  }

  CheckpointContents out;
  out.model = ModelState<float>(std::move(layers));
  const std::uint64_t n_params = r.u64();
  if (n_params != static_cast<std::uint64_t>(out.model.param_size()))
    throw IoError("checkpoint: parameter count does not match layer topology");
  out.model.theta = r.f32_vec(static_cast<Index>(n_params));

  if (r.remaining() > 0) {
    char tag[4];
    r.need(4);
    std::memcpy(tag, r.p, 4);
    r.p += 4;
    if (std::memcmp(tag, "SIX1", 4) != 0) throw IoError("checkpoint: unknown extension tag");
    SIState<float> si;
    const Index n = static_cast<Index>(n_params);
    si.w_acc = r.f32_vec(n);
    si.omega = r.f32_vec(n);
    si.anchor = r.f32_vec(n);
    si.prev_final = r.f32_vec(n);
    si.c = static_cast<float>(r.f64());
    si.xi = static_cast<float>(r.f64());
    si.center_index = r.u32();
    out.si = std::move(si);
  }
  if (r.remaining() != 0) throw IoError("checkpoint: trailing bytes");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, ModelState<float>& model,
                     const SIState<float>* si) {
  const auto bytes = serialize_checkpoint(model, si);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path.string());
}

CheckpointContents load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace ringfed
