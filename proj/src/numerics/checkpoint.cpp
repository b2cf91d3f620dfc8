// Copyright 2026 The mad Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mad/numerics/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace mad {

namespace {

template <class U>
void put_le(std::vector<std::uint8_t>& out, U value) {
  static_assert(std::is_unsigned_v<U>);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(U);
    return v;
  }

  std::vector<std::uint8_t> take(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ConfigError("checkpoint truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(Checkpoint::DType d) {
  switch (d) {
    case Checkpoint::DType::f32: return 4;
    case Checkpoint::DType::f64: return 8;
    case Checkpoint::DType::u8: return 1;
  }
  throw ConfigError("checkpoint: unknown dtype");
}

template <class T, class Bits>
std::vector<std::uint8_t> encode(const Tensor<T>& t) {
  std::vector<std::uint8_t> out;
  out.reserve(t.size() * sizeof(T));
  for (T v : t.vec()) put_le(out, std::bit_cast<Bits>(v));
  return out;
}

}  // namespace

void Checkpoint::add(const std::string& name, const Tensor<float>& t) {
  MAD_REQUIRE(!contains(name), "checkpoint: duplicate entry " + name);
  entries_.push_back({name, DType::f32, t.shape(), encode<float, std::uint32_t>(t)});
}

void Checkpoint::add(const std::string& name, const Tensor<double>& t) {
  MAD_REQUIRE(!contains(name), "checkpoint: duplicate entry " + name);
  entries_.push_back({name, DType::f64, t.shape(), encode<double, std::uint64_t>(t)});
}

void Checkpoint::add_text(const std::string& name, const std::string& text) {
  MAD_REQUIRE(!contains(name), "checkpoint: duplicate entry " + name);
  entries_.push_back({name, DType::u8, Shape{text.size()}, std::vector<std::uint8_t>(text.begin(), text.end())});
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

const Checkpoint::Entry& Checkpoint::find(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw ConfigError("checkpoint: missing entry '" + name + "'");
}

template <class T>
Tensor<T> Checkpoint::tensor(const std::string& name) const {
  const Entry& e = find(name);
  Reader r(e.payload);
  std::vector<T> data(shape_size(e.shape));
  for (auto& v : data) {
    if (e.dtype == DType::f32)
      v = static_cast<T>(std::bit_cast<float>(r.get<std::uint32_t>()));
    else if (e.dtype == DType::f64)
      v = static_cast<T>(std::bit_cast<double>(r.get<std::uint64_t>()));
    else
      throw ConfigError("checkpoint: entry '" + name + "' is not a float tensor");
  }
  return Tensor<T>(e.shape, std::move(data));
}

template Tensor<float> Checkpoint::tensor<float>(const std::string&) const;
template Tensor<double> Checkpoint::tensor<double>(const std::string&) const;

std::string Checkpoint::text(const std::string& name) const {
  const Entry& e = find(name);
  if (e.dtype != DType::u8) throw ConfigError("checkpoint: entry '" + name + "' is not text");
  return std::string(e.payload.begin(), e.payload.end());
}

std::vector<std::uint8_t> Checkpoint::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_le(out, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    put_le(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<std::uint8_t>(e.dtype));
    put_le(out, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) put_le(out, static_cast<std::uint64_t>(d));
  }
  for (const auto& e : entries_) out.insert(out.end(), e.payload.begin(), e.payload.end());
  return out;
}

Checkpoint Checkpoint::deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw ConfigError("not a MADCKPT1 checkpoint");
  Reader r(bytes);
  r.take(8);
  Checkpoint ck;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const auto len = r.get<std::uint32_t>();
    const auto name = r.take(len);
    e.name.assign(name.begin(), name.end());
    const auto dt = r.get<std::uint8_t>();
    if (dt > 2) throw ConfigError("checkpoint: unknown dtype");
    e.dtype = static_cast<DType>(dt);
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < rank; ++k) e.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>()));
    ck.entries_.push_back(std::move(e));
  }
  for (auto& e : ck.entries_) e.payload = r.take(shape_size(e.shape) * dtype_size(e.dtype));
  if (!r.done()) throw ConfigError("checkpoint: trailing bytes");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace mad
