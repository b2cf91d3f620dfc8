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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mad/diffusion/diffusion.hpp"
#include "mad/editor/editor.hpp"
#include "mad/evaluation/evaluation.hpp"
#include "mad/geometry/ellipse.hpp"
#include "mad/morphometry/morphometry.hpp"
#include "mad/service/config.hpp"
#include "mad/vae/analysis.hpp"
#include "mad/vae/vae.hpp"

namespace mad::service {

/// Model-space features of a dataset: raw values in the configured feature
/// order, the fitted normalizer and the normalized vectors that survived trimming.
struct PreparedFeatures {
  std::vector<FeatureVector> raw;
  morphometry::Normalizer normalizer;
  std::vector<std::size_t> kept;
  std::vector<FeatureVector> normalized;  // aligned with kept
};

PreparedFeatures prepare_features(const geometry::GeoDataset& ds, const std::vector<std::string>& names);

/// Raw features measured from an image whose frame is `scale` times smaller
/// than the reference 64 x 64 frame. nullopt when segmentation fails.
std::optional<FeatureVector> measure(const Image& image, const std::vector<std::string>& names, double scale = 1.0);

/// Closest renderable ellipse for a raw feature vector, drawn by the oracle.
Image oracle_render(const FeatureVector& raw, const std::vector<std::string>& names);

/// [n, 1, s, s] training images and [n, D] normalized conditions.
Tensor<float> diffusion_images(const geometry::GeoDataset& ds, std::size_t image_size);
Tensor<float> diffusion_conditions(const PreparedFeatures& pf);
Tensor<float> condition_rows(const std::vector<FeatureVector>& normalized);

struct EvalOutputs {
  evaluation::EvalReport report;
  std::vector<evaluation::EditRecord> records;
  std::vector<Image> generated;  // image mode only
};

struct EvalRequest {
  std::string mode = "decoded";
  std::vector<std::string> edited{"area"};
  std::vector<std::string> measured{"area", "perimeter", "intensity"};
  std::size_t samples = 300;
  std::size_t grid = 9;
  bool baseline = false;  // edit_without_vae instead of latent editing
  std::uint64_t seed = 7;
};

/// batch_edit over a random origin subset and a target grid, then the
/// delta-delta report. Image mode renders every edit with the denoiser and
/// measures the result; SSR and identity similarity are filled in there.
EvalOutputs run_eval(const geometry::GeoDataset& ds, const PreparedFeatures& pf, const vae::VaeModel& model,
                     const diffusion::Denoiser* denoiser, const editor::EditOptions& options,
                     const EvalRequest& request);

struct LatentAnalysis {
  std::vector<double> pca_ratios;
  std::size_t components_90 = 0;
  double distance_r = 0;
  double smoothness = 0;
  vae::InterpolationResult interpolation;
};

LatentAnalysis analyze_latent(const vae::VaeModel& model, const std::vector<FeatureVector>& normalized,
                              std::uint64_t seed);
nlohmann::ordered_json to_json(const LatentAnalysis& a, const std::vector<std::string>& names);

}  // namespace mad::service
