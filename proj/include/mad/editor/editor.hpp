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
#include <string>
#include <vector>

#include "json.hpp"
#include "mad/core/features.hpp"
#include "mad/morphometry/morphometry.hpp"
#include "mad/vae/vae.hpp"

namespace mad::editor {

enum class Optimizer { adam, gradient_descent };

/// Loss weights and descent settings shared by every edit of a run.
struct EditOptions {
  double lambda_tgt = 1.0;
  double lambda_reg = 0.1;
  double lambda_prior = 0.001;
  std::size_t steps = 500;
  double lr = 0.05;
  double tol = 0.05;
  std::size_t log_interval = 10;
  Optimizer optimizer = Optimizer::adam;
};

/// One single-feature edit. All values in normalized units.
struct EditSpec {
  FeatureVector y_orig;
  std::size_t target_index = 0;
  double target_value = 0;
  /// Per-feature weights on the non-target residuals; empty means all 1.
  std::vector<double> weights;
  EditOptions options;
};

struct TrajectoryPoint {
  std::size_t step;
  FeatureVector y;
  double loss;
};

struct EditResult {
  FeatureVector y_new;  // decode(z_star)
  vae::LatentCode z_init;
  vae::LatentCode z_star;
  std::vector<TrajectoryPoint> trajectory;
  bool converged = false;
};

void validate(const EditSpec& spec, std::size_t dim);

/// lambda_tgt (D(z)_k - v)^2 + lambda_reg sum_{j != k} w_j (D(z)_j - y_j)^2 + lambda_prior |z|^2
/// for a [1, d] latent node.
Var edit_objective(ParamBinding<double>& frozen, const vae::VaeModel& model, Var z, const EditSpec& spec);
double edit_objective(const vae::VaeModel& model, const vae::LatentCode& z, const EditSpec& spec);

/// Descends the objective from encode_mean(y_orig) with the decoder frozen.
EditResult edit(const vae::VaeModel& model, const EditSpec& spec);

/// The independence baseline: y_orig with coordinate k replaced by the target.
FeatureVector edit_without_vae(const EditSpec& spec);

enum class Execution { parallel, serial_reference };

/// Independent edits; results in input order and identical for both modes.
std::vector<EditResult> batch_edit(const vae::VaeModel& model, const std::vector<EditSpec>& specs,
                                   Execution mode = Execution::parallel);

/// Cartesian product of origins and target values for feature k.
std::vector<EditSpec> grid_specs(const std::vector<FeatureVector>& origins, std::size_t k,
                                 const std::vector<double>& targets, const EditOptions& options);

/// Evenly spaced grid over the normalizer's trimmed range of feature k, in
/// normalized units.
std::vector<double> target_grid(const morphometry::Normalizer& norm, std::size_t k, std::size_t points);

/// Builds a spec from raw-unit inputs.
EditSpec make_spec(const morphometry::Normalizer& norm, const FeatureVector& y_raw, const std::string& feature,
                   double target_raw, const EditOptions& options);

nlohmann::json options_to_json(const EditOptions& o);
EditOptions options_from_json(const nlohmann::json& j, EditOptions base = {});

/// Result as JSON. With a normalizer, raw-unit copies of y_orig/y_new are added.
/// Trajectories longer than max_points are decimated (first and last kept).
nlohmann::ordered_json to_json(const EditResult& r, const EditSpec& spec, const morphometry::Normalizer* norm = nullptr,
                       std::size_t max_points = static_cast<std::size_t>(-1));

std::vector<TrajectoryPoint> decimate(const std::vector<TrajectoryPoint>& t, std::size_t max_points);

}  // namespace mad::editor
