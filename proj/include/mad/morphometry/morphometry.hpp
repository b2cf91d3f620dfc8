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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mad/core/features.hpp"
#include "mad/core/image.hpp"

namespace mad::morphometry {

/// Foreground grid with its 8-connected component count.
struct Mask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // 0 or 1
  std::size_t region_count = 0;

  bool at(std::size_t x, std::size_t y) const { return bits[y * width + x] != 0; }
  std::size_t area() const;
};

/// Builds a mask from raw bits and counts its 8-connected components.
Mask make_mask(std::size_t width, std::size_t height, std::vector<std::uint8_t> bits);

/// Labels 8-connected components; returns labels (0 = background, 1..count).
std::vector<std::uint32_t> label_components(const Mask& mask, std::size_t* count = nullptr);

struct Segmentation {
  Mask mask;
  bool accepted = false;
};

/// mask = pixel > threshold; accepted iff exactly one connected region.
Segmentation segment_single(const Image& image, int threshold = 10);

/// Crofton perimeter from intercept counts along 0, 45, 90 and 135 degrees.
double crofton_perimeter(const Mask& mask);

/// Raw canonical features (area, perimeter, eccentricity, orientation,
/// intensity) of a single-region mask over `image`.
FeatureVector extract_features(const Image& image, const Mask& mask);

struct NormalizerFit;

/// Per-feature z-scoring fitted on outlier-trimmed training data.
class Normalizer {
 public:
  Normalizer() = default;

  bool fitted() const noexcept { return !means_.empty(); }
  std::size_t dim() const noexcept { return means_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<double>& means() const noexcept { return means_; }
  const std::vector<double>& stds() const noexcept { return stds_; }
  const std::vector<double>& lower() const noexcept { return lower_; }
  const std::vector<double>& upper() const noexcept { return upper_; }

  FeatureVector normalize(const FeatureVector& raw) const;
  FeatureVector denormalize(const FeatureVector& normalized) const;
  /// Converts a raw-unit difference to normalized units for feature i.
  double normalize_delta(std::size_t i, double raw_delta) const;
  double normalize_value(std::size_t i, double raw) const;
  double denormalize_value(std::size_t i, double normalized) const;

  void save(const std::filesystem::path& path) const;
  static Normalizer load(const std::filesystem::path& path);
  std::string to_json() const;
  static Normalizer from_json(const std::string& text);

 private:
  friend NormalizerFit fit_normalizer(const std::vector<FeatureVector>&, const std::vector<std::string>&,
                                      double);
  void require_fitted(const FeatureVector& y, FeatureSpace expected) const;

  std::vector<std::string> names_;
  std::vector<double> means_, stds_, lower_, upper_;
};

struct NormalizerFit {
  Normalizer normalizer;
  std::vector<std::size_t> kept_indices;
};

/// Drops samples outside the [trim, 1 - trim] quantiles on any feature and
/// fits mean/std on the survivors.
NormalizerFit fit_normalizer(const std::vector<FeatureVector>& raw, const std::vector<std::string>& names,
                             double trim = 0.025);

/// Linear-interpolated quantile of unsorted data.
double quantile(std::vector<double> values, double q);

}  // namespace mad::morphometry
