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
#include <functional>
#include <string>
#include <vector>

#include "mad/core/features.hpp"
#include "mad/core/rng.hpp"
#include "mad/numerics/checkpoint.hpp"
#include "mad/numerics/nn.hpp"

namespace mad::vae {

struct VaeConfig {
  std::size_t input_dim = 4;
  std::size_t latent_dim = 4;
  std::size_t hidden_width = 64;
  std::size_t hidden_layers = 2;
  double beta = 0.1;
  /// Zero the encoder's output layer so an untrained model maps every input
  /// to the prior (mu = 0, log_var = 0).
  bool zero_init_encoder_head = false;
  std::uint64_t init_seed = 0;
};

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// Point in the latent space.
struct LatentCode {
  std::vector<double> values;
  std::size_t size() const noexcept { return values.size(); }
  friend bool operator==(const LatentCode&, const LatentCode&) = default;
};

struct PosteriorParams {
  std::vector<double> mu;
  std::vector<double> log_var;  // clamped to [kLogVarMin, kLogVarMax]
};

/// Closed-form KL(N(mu, diag(exp(log_var))) || N(0, I)).
double kl_divergence(const PosteriorParams& q);

/// Encoder MLP D -> (mu, log_var) and decoder MLP d -> D, tanh hidden layers.
class VaeModel {
 public:
  VaeModel() = default;
  explicit VaeModel(const VaeConfig& config);

  const VaeConfig& config() const noexcept { return config_; }
  std::size_t input_dim() const noexcept { return config_.input_dim; }
  std::size_t latent_dim() const noexcept { return config_.latent_dim; }
  ParamStore<double>& params() noexcept { return store_; }
  const ParamStore<double>& params() const noexcept { return store_; }

  PosteriorParams encode(const FeatureVector& y) const;
  LatentCode encode_mean(const FeatureVector& y) const;
  FeatureVector decode(const LatentCode& z) const;

  /// Batched forms over [n, D] / [n, d] matrices.
  Tensor<double> encode_mean_batch(const Tensor<double>& y) const;
  Tensor<double> decode_batch(const Tensor<double>& z) const;

  struct EncoderNodes {
    Var mu;
    Var log_var;
  };
  EncoderNodes encoder(ParamBinding<double>& p, Var y) const;
  Var decoder(ParamBinding<double>& p, Var z) const;

  Checkpoint to_checkpoint() const;
  static VaeModel from_checkpoint(const Checkpoint& ck);
  void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
  static VaeModel load(const std::filesystem::path& path) { return from_checkpoint(Checkpoint::load(path)); }

 private:
  VaeConfig config_;
  ParamStore<double> store_;
  Mlp encoder_;
  Mlp decoder_;
};

/// Mean over the batch of ||y - D(mu + sigma * eps)||^2 + beta * KL, with
/// eps ~ N(0, I) drawn from `rng`. `y` is [n, D] in normalized units.
Var vae_loss(ParamBinding<double>& p, const VaeModel& model, const Tensor<double>& y, Rng& rng);
/// Single-sample convenience wrapper.
double vae_loss(const VaeModel& model, const FeatureVector& y, Rng& rng);

struct TrainConfig {
  std::size_t max_epochs = 3000;
  std::size_t batch_size = 256;
  std::size_t patience = 50;
  double learning_rate = 1e-3;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct TrainLogRow {
  std::size_t epoch;
  double train_loss;
  double val_loss;
};

struct TrainResult {
  VaeModel model;  // parameters from the best validation epoch
  std::vector<TrainLogRow> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0;
};

/// Adam on shuffled mini-batches with early stopping on validation loss.
TrainResult train_vae(const std::vector<FeatureVector>& normalized, const VaeConfig& config,
                      const TrainConfig& train);

/// CSV with header epoch,train_loss,val_loss.
void write_training_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

Tensor<double> stack(const std::vector<FeatureVector>& rows);

}  // namespace mad::vae
