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

#include "mad/service/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace mad::service {

namespace {

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const nlohmann::json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j, RunConfig c) {
  try {
    check_keys(j, "config", {"seed", "features", "dataset_dir", "checkpoint_dir", "report_dir", "vae", "edit",
                             "diffusion", "eval"});
    read(j, "seed", c.seed);
    read(j, "features", c.features);
    if (j.contains("dataset_dir")) c.dataset_dir = j.at("dataset_dir").get<std::string>();
    if (j.contains("checkpoint_dir")) c.checkpoint_dir = j.at("checkpoint_dir").get<std::string>();
    if (j.contains("report_dir")) c.report_dir = j.at("report_dir").get<std::string>();
    if (j.contains("vae")) {
      const auto& v = j.at("vae");
      check_keys(v, "vae", {"latent_dim", "hidden_width", "hidden_layers", "beta", "max_epochs", "batch_size",
                            "patience", "learning_rate", "validation_fraction"});
      read(v, "latent_dim", c.vae.latent_dim);
      read(v, "hidden_width", c.vae.hidden_width);
      read(v, "hidden_layers", c.vae.hidden_layers);
      read(v, "beta", c.vae.beta);
      read(v, "max_epochs", c.vae_train.max_epochs);
      read(v, "batch_size", c.vae_train.batch_size);
      read(v, "patience", c.vae_train.patience);
      read(v, "learning_rate", c.vae_train.learning_rate);
      read(v, "validation_fraction", c.vae_train.validation_fraction);
    }
    if (j.contains("edit")) c.edit = editor::options_from_json(j.at("edit"), c.edit);
    if (j.contains("diffusion")) {
      const auto& d = j.at("diffusion");
      check_keys(d, "diffusion", {"image_size", "width1", "width2", "width3", "embed_dim", "steps", "beta_min", "beta_max",
                                  "iterations", "batch_size", "learning_rate", "log_interval", "ema_decay"});
      read(d, "image_size", c.diffusion.image_size);
      read(d, "width1", c.diffusion.width1);
      read(d, "width2", c.diffusion.width2);
      read(d, "width3", c.diffusion.width3);
      read(d, "embed_dim", c.diffusion.embed_dim);
      read(d, "steps", c.diffusion.steps);
      read(d, "beta_min", c.diffusion.beta_min);
      read(d, "beta_max", c.diffusion.beta_max);
      read(d, "iterations", c.diffusion_train.iterations);
      read(d, "batch_size", c.diffusion_train.batch_size);
      read(d, "learning_rate", c.diffusion_train.learning_rate);
      read(d, "log_interval", c.diffusion_train.log_interval);
      read(d, "ema_decay", c.diffusion_train.ema_decay);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      check_keys(e, "eval", {"mode", "samples", "grid"});
      read(e, "mode", c.eval_mode);
      read(e, "samples", c.eval_samples);
      read(e, "grid", c.eval_grid);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
  validate(c);
  return c;
}

nlohmann::ordered_json config_to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["features"] = c.features;
  j["dataset_dir"] = c.dataset_dir.string();
  j["checkpoint_dir"] = c.checkpoint_dir.string();
  j["report_dir"] = c.report_dir.string();
  j["vae"] = {{"latent_dim", c.vae.latent_dim},
              {"hidden_width", c.vae.hidden_width},
              {"hidden_layers", c.vae.hidden_layers},
              {"beta", c.vae.beta},
              {"max_epochs", c.vae_train.max_epochs},
              {"batch_size", c.vae_train.batch_size},
              {"patience", c.vae_train.patience},
              {"learning_rate", c.vae_train.learning_rate},
              {"validation_fraction", c.vae_train.validation_fraction}};
  j["edit"] = editor::options_to_json(c.edit);
  j["diffusion"] = {{"image_size", c.diffusion.image_size},
                    {"width1", c.diffusion.width1},
                    {"width2", c.diffusion.width2},
                    {"width3", c.diffusion.width3},
                    {"embed_dim", c.diffusion.embed_dim},
                    {"steps", c.diffusion.steps},
                    {"beta_min", c.diffusion.beta_min},
                    {"beta_max", c.diffusion.beta_max},
                    {"iterations", c.diffusion_train.iterations},
                    {"batch_size", c.diffusion_train.batch_size},
                    {"learning_rate", c.diffusion_train.learning_rate},
                    {"log_interval", c.diffusion_train.log_interval},
                    {"ema_decay", c.diffusion_train.ema_decay}};
  j["eval"] = {{"mode", c.eval_mode}, {"samples", c.eval_samples}, {"grid", c.eval_grid}};
  return j;
}

void validate(const RunConfig& c) {
  if (c.features.empty()) throw ConfigError("features must not be empty");
  std::set<std::string> seen;
  for (const auto& f : c.features) {
    feature_index({geo::kNames.begin(), geo::kNames.end()}, f);
    if (!seen.insert(f).second) throw ConfigError("duplicate feature '" + f + "'");
  }
  if (c.vae.latent_dim < 1 || c.vae.hidden_width < 1) throw ConfigError("vae dimensions must be positive");
  if (c.vae.beta < 0) throw ConfigError("vae.beta must be >= 0");
  if (c.vae_train.batch_size < 1 || c.vae_train.max_epochs < 1) throw ConfigError("vae batch/epochs must be positive");
  if (!(c.vae_train.validation_fraction > 0 && c.vae_train.validation_fraction < 1))
    throw ConfigError("vae.validation_fraction must be in (0, 1)");
  if (c.edit.lambda_tgt < 0 || c.edit.lambda_reg < 0 || c.edit.lambda_prior < 0)
    throw ConfigError("edit lambdas must be >= 0");
  if (c.diffusion.steps < 2) throw ConfigError("diffusion.steps must be >= 2");
  if (!(c.diffusion.beta_min > 0 && c.diffusion.beta_min < c.diffusion.beta_max && c.diffusion.beta_max < 1))
    throw ConfigError("diffusion betas must satisfy 0 < beta_min < beta_max < 1");
  if (c.diffusion.image_size != 32 && c.diffusion.image_size != 64)
    throw ConfigError("diffusion.image_size must be 32 or 64");
  if (c.diffusion_train.batch_size < 1 || c.diffusion_train.log_interval < 1)
    throw ConfigError("diffusion batch_size and log_interval must be positive");
  if (!(c.diffusion_train.ema_decay >= 0 && c.diffusion_train.ema_decay < 1))
    throw ConfigError("diffusion.ema_decay must lie in [0, 1)");
  if (c.eval_mode != "decoded" && c.eval_mode != "image") throw ConfigError("eval.mode must be decoded or image");
  if (c.eval_samples < 1 || c.eval_grid < 1) throw ConfigError("eval samples and grid must be positive");
}

RunConfig config_from_environment() {
  const char* path = std::getenv("MAD_CONFIG");
  if (!path || !*path) return {};
  std::ifstream f(path);
  if (!f) throw ConfigError(std::string("MAD_CONFIG points to unreadable file ") + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("MAD_CONFIG is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

CheckpointPaths CheckpointPaths::in(const std::filesystem::path& dir) {
  return {dir / "vae.ckpt", dir / "normalizer.json", dir / "vae_log.csv", dir / "diffusion.ckpt",
          dir / "diffusion_log.csv"};
}

}  // namespace mad::service
