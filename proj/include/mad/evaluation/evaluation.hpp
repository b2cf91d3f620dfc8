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
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mad/core/features.hpp"
#include "mad/core/image.hpp"
#include "mad/morphometry/morphometry.hpp"

namespace mad::evaluation {

struct SsrResult {
  double percent = 0;
  std::vector<bool> detected;
};

/// Share of images whose threshold mask is one connected region.
SsrResult ssr(const std::vector<Image>& images, int threshold = 10);

/// 1 - SS_res / SS_tot about the mean of `targets`. UndefinedR2 when the
/// targets have zero variance.
double r2(const std::vector<double>& targets, const std::vector<double>& measured);
double mae(const std::vector<double>& targets, const std::vector<double>& measured);

/// Single-scale SSIM with an 8x8 Gaussian window (sigma 1.5) and the usual
/// K1 = 0.01, K2 = 0.03 constants, averaged over all valid window positions.
double identity_similarity(const Image& a, const Image& b);

/// Feature couplings known for the synthetic world: perimeter = K sqrt(area).
/// Every other pair is independent.
class FeatureLaw {
 public:
  FeatureLaw(std::vector<std::string> names, double ratio);

  /// Expected raw-unit change of `measured` when `edited` moves from its
  /// origin value to `target_raw`; nullopt when the two are independent.
  std::optional<double> expected_change(std::size_t edited, std::size_t measured, const FeatureVector& origin_raw,
                                        double target_raw) const;
  bool independent(std::size_t edited, std::size_t measured) const;

 private:
  std::vector<std::string> names_;
  double ratio_;
  std::optional<std::size_t> area_, perimeter_;
};

/// One edit's origin, requested target and realized features, all normalized.
struct EditRecord {
  std::size_t edited = 0;
  FeatureVector y_origin;
  double target = 0;
  FeatureVector y_final;
  bool detected = true;
};

struct DeltaCell {
  std::string edited;
  std::string measured;
  std::string metric;  // "r2" or "mae"
  std::optional<double> value;  // empty when R^2 is undefined
  std::vector<std::pair<double, double>> pairs;  // (delta_gt, delta_pred)
};

/// Delta-delta cells for every edited feature present in `records` against
/// each feature of `measured`. Undetected records are skipped.
std::vector<DeltaCell> delta_delta(const std::vector<EditRecord>& records, const morphometry::Normalizer& norm,
                                   const FeatureLaw& law, const std::vector<std::string>& measured);

struct EvalReport {
  std::string mode;  // "decoded" or "image"
  std::string units = "normalized";
  std::size_t n_total = 0;
  std::size_t n_detected = 0;
  std::optional<double> ssr;
  std::map<std::string, double> mae;
  std::map<std::string, std::optional<double>> r2;
  std::optional<double> identity;
  std::vector<DeltaCell> delta_delta;
};

/// Fills n_total/n_detected, per-feature MAE and R^2 (realized vs expected
/// final value) and the delta-delta grid.
EvalReport build_report(const std::string& mode, const std::vector<EditRecord>& records,
                        const morphometry::Normalizer& norm, const FeatureLaw& law,
                        const std::vector<std::string>& measured);

const DeltaCell* find_cell(const EvalReport& r, const std::string& edited, const std::string& measured);

nlohmann::ordered_json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

/// Scatter grid, one panel per cell: rows are edited features, columns
/// measured features, with a y = x guide.
std::string render_svg(const EvalReport& r);

/// Writes report.json and report.svg into `dir`. Errors on an empty report.
void render_report(const EvalReport& r, const std::filesystem::path& dir);

}  // namespace mad::evaluation
