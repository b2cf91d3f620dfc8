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

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mad/core/errors.hpp"

namespace mad {

enum class FeatureSpace { raw, normalized };

/// Ordered feature measurements of one object, tagged with the space they
/// live in so raw and normalized values cannot be mixed silently.
struct FeatureVector {
  std::vector<double> values;
  FeatureSpace space = FeatureSpace::raw;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

/// Feature order produced by morphometry and the ellipse oracle.
namespace geo {
inline constexpr std::size_t kArea = 0;
inline constexpr std::size_t kPerimeter = 1;
inline constexpr std::size_t kEccentricity = 2;
inline constexpr std::size_t kOrientation = 3;
inline constexpr std::size_t kIntensity = 4;
inline constexpr std::size_t kCount = 5;
inline const std::array<std::string, kCount> kNames{"area", "perimeter", "eccentricity",
                                                    "orientation", "intensity"};
}  // namespace geo

/// Index of `name` in `names`; ConfigError if absent.
inline std::size_t feature_index(const std::vector<std::string>& names, std::string_view name) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw ConfigError("unknown feature '" + std::string(name) + "'");
}

/// Picks the named features out of a canonical geometric vector.
inline FeatureVector select_features(const FeatureVector& canonical,
                                     const std::vector<std::string>& names) {
  MAD_REQUIRE(canonical.size() == geo::kCount, "select_features: expected a 5-feature vector");
  FeatureVector out{{}, canonical.space};
  const std::vector<std::string> all(geo::kNames.begin(), geo::kNames.end());
  for (const auto& n : names) out.values.push_back(canonical[feature_index(all, n)]);
  return out;
}

}  // namespace mad
