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
#include <vector>

#include "mad/core/features.hpp"
#include "mad/core/image.hpp"
#include "mad/core/rng.hpp"

namespace mad::geometry {

inline constexpr std::size_t kFrame = 64;
inline constexpr double kMinSemiMinor = 4.0;
inline constexpr double kMaxSemiMinor = 14.0;
inline constexpr int kMinIntensity = 40;
inline constexpr int kMaxIntensity = 220;

/// perimeter / sqrt(area) for every ellipse with a/b = 2.
double manifold_ratio();

/// Ground truth of one synthetic object. The semi-major axis is always twice
/// the semi-minor axis; the ellipse is centred in the frame.
struct EllipseParams {
  double semi_minor = 8.0;
  double theta = 0.0;  // radians, [0, pi)
  int intensity = 128;

  double semi_major() const noexcept { return 2.0 * semi_minor; }
  friend bool operator==(const EllipseParams&, const EllipseParams&) = default;
};

/// Throws ContractViolation when the ellipse would leave the frame or the
/// orientation/intensity are out of range.
void validate(const EllipseParams& p);

EllipseParams sample_params(Rng& rng);

/// Hard-edged raster: a pixel takes `intensity` iff its centre lies inside
/// the rotated ellipse, else 0.
Image render(const EllipseParams& p);

/// Raw features in canonical order (area, perimeter, eccentricity,
/// orientation, intensity). Perimeter uses Ramanujan's second approximation.
FeatureVector analytic_features(const EllipseParams& p);

/// Ramanujan II perimeter of an ellipse with semi-axes a >= b.
double ramanujan_perimeter(double a, double b);

/// Projects a raw feature vector onto the ellipse family using area,
/// orientation and intensity only.
EllipseParams nearest_feasible_params(const FeatureVector& raw_canonical);
/// Same, for a vector over the named features (must include area,
/// orientation and intensity).
EllipseParams nearest_feasible_params(const FeatureVector& raw, const std::vector<std::string>& names);

/// Wraps an angle to [0, pi).
double wrap_orientation(double theta);

struct GeoDataset {
  std::vector<Image> images;
  std::vector<EllipseParams> params;
  std::vector<FeatureVector> features;  // raw, canonical order
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return params.size(); }
};

GeoDataset build_dataset(std::size_t n, std::uint64_t seed);

/// images/%06d.pgm, features.csv, params.csv, meta.json.
void save_dataset(const GeoDataset& ds, const std::filesystem::path& dir);
GeoDataset load_dataset(const std::filesystem::path& dir);

}  // namespace mad::geometry
