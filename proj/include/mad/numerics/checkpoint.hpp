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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mad/numerics/tensor.hpp"

namespace mad {

/// Binary parameter container.
///
///   "MADCKPT1"                                  8 bytes
///   entry count                                 u32
///   per entry: name length u32, name bytes,
///              dtype u8 (0=f32, 1=f64, 2=u8),
///              rank u32, extents u64 x rank
///   payloads in header order, little-endian
class Checkpoint {
 public:
  enum class DType : std::uint8_t { f32 = 0, f64 = 1, u8 = 2 };

  struct Entry {
    std::string name;
    DType dtype;
    Shape shape;
    std::vector<std::uint8_t> payload;
  };

  static constexpr char kMagic[9] = "MADCKPT1";

  void add(const std::string& name, const Tensor<float>& t);
  void add(const std::string& name, const Tensor<double>& t);
  /// Stores text (typically a JSON model config) as a u8 entry.
  void add_text(const std::string& name, const std::string& text);

  bool contains(const std::string& name) const;
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  /// Reads an f32 or f64 entry converted to T.
  template <class T>
  Tensor<T> tensor(const std::string& name) const;
  std::string text(const std::string& name) const;

  std::vector<std::uint8_t> serialize() const;
  static Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  const Entry& find(const std::string& name) const;
  std::vector<Entry> entries_;
};

}  // namespace mad
