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

#include "json.hpp"
#include "mad/diffusion/diffusion.hpp"
#include "mad/editor/editor.hpp"
#include "mad/vae/vae.hpp"

namespace mad::service {

/// Everything a pipeline run needs. Loaded from JSON (MAD_CONFIG) and then
/// overridden by command-line flags.
struct RunConfig {
  std::uint64_t seed = 7;
  std::vector<std::string> features{"area", "perimeter", "orientation", "intensity"};
  std::filesystem::path dataset_dir = "data";
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path report_dir = "report";

  vae::VaeConfig vae;
  vae::TrainConfig vae_train;
  editor::EditOptions edit;
  diffusion::DenoiserConfig diffusion;
  diffusion::DiffusionTrainConfig diffusion_train;

  std::string eval_mode = "decoded";  // or "image"
  std::size_t eval_samples = 300;
  std::size_t eval_grid = 9;
};

/// Merges the keys present in `j` over `base`. ConfigError on unknown
/// sections, wrong types or invalid values.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::ordered_json config_to_json(const RunConfig& c);
void validate(const RunConfig& c);

/// Reads the file named by MAD_CONFIG if set, else returns the defaults.
RunConfig config_from_environment();

/// Checkpoint layout inside checkpoint_dir.
struct CheckpointPaths {
  std::filesystem::path vae, normalizer, vae_log, diffusion, diffusion_log;
  static CheckpointPaths in(const std::filesystem::path& dir);
};

}  // namespace mad::service
