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
#include <optional>
#include <functional>
#include <vector>

#include "mad/core/features.hpp"
#include "mad/core/image.hpp"
#include "mad/core/rng.hpp"
#include "mad/numerics/checkpoint.hpp"
#include "mad/numerics/nn.hpp"

namespace mad::diffusion {

/// Linear-beta DDPM schedule. Index t runs 0..T-1; alpha_bar[0] = 1 - beta[0].
struct NoiseSchedule {
  std::size_t steps = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;
};

NoiseSchedule make_schedule(std::size_t steps = 200, double beta_min = 1e-4, double beta_max = 0.02);

/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps, elementwise.
Tensor<float> forward_sample(const Tensor<float>& x0, std::size_t t, const Tensor<float>& eps,
                             const NoiseSchedule& schedule);

/// u8 pixels to [-1, 1] as [n, 1, h, w], and back with clamping and rounding.
Tensor<float> to_model_space(const std::vector<Image>& images);
Image from_model_space(const Tensor<float>& x, std::size_t index);

struct DenoiserConfig {
  std::size_t image_size = 32;
  std::size_t cond_dim = 4;
  std::size_t width1 = 16;
  std::size_t width2 = 32;
  std::size_t width3 = 64;
  std::size_t embed_dim = 64;
  std::size_t steps = 200;
  double beta_min = 5e-4;
  double beta_max = 0.1;
  std::uint64_t init_seed = 0;
};

/// Three-level U-Net predicting the injected noise. Input channels are the
/// noisy image plus two coordinate planes. A sinusoidal timestep embedding and
/// an MLP embedding of the condition are summed; every residual block scales
/// and shifts its channels from that embedding.
/// Trained and sampled in float; the double instantiation serves gradient checks.
template <class T>
class BasicDenoiser {
 public:
  BasicDenoiser() = default;
  explicit BasicDenoiser(const DenoiserConfig& config);

  const DenoiserConfig& config() const noexcept { return config_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }
  ParamStore<T>& params() noexcept { return store_; }
  const ParamStore<T>& params() const noexcept { return store_; }

  /// x_t: [n, 1, s, s]; y: [n, cond_dim] normalized features; one step per row.
  Var predict(ParamBinding<T>& p, Var x_t, const std::vector<std::size_t>& t, Var y) const;
  Tensor<T> predict(const Tensor<T>& x_t, const std::vector<std::size_t>& t, const Tensor<T>& y) const;

  Checkpoint to_checkpoint() const;
  static BasicDenoiser from_checkpoint(const Checkpoint& ck);
  void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
  static BasicDenoiser load(const std::filesystem::path& path) { return from_checkpoint(Checkpoint::load(path)); }

 private:
  struct Block {
    Conv2d conv1, conv2;
    Linear scale, shift;
    std::optional<Conv2d> skip;  // 1x1 projection when the width changes
  };
  Var block(ParamBinding<T>& p, const Block& b, Var x, Var emb) const;

  DenoiserConfig config_;
  NoiseSchedule schedule_;
  ParamStore<T> store_;
  Linear time1_, time2_;
  Mlp cond_;
  Block down1_, down2_, down3_, up2_, up1_;
  Conv2d reduce3_, reduce2_, out_;
};

extern template class BasicDenoiser<float>;
extern template class BasicDenoiser<double>;
using Denoiser = BasicDenoiser<float>;

/// Sinusoidal embedding of integer steps, [n, dim].
template <class T>
Tensor<T> timestep_embedding(const std::vector<std::size_t>& t, std::size_t dim);

/// Batch mean of ||eps - eps_theta(x_t, t, c(y))||^2 with t uniform and eps ~ N(0, I).
template <class T>
Var diffusion_loss(ParamBinding<T>& p, const BasicDenoiser<T>& model, const Tensor<T>& x0, const Tensor<T>& y,
                   Rng& rng);
double diffusion_loss(const Denoiser& model, const Tensor<float>& x0, const Tensor<float>& y, Rng& rng);

struct DiffusionTrainConfig {
  std::size_t iterations = 20000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t log_interval = 100;  // log rows average the loss over this many iterations
  /// Decay of the exponential moving average of the weights that becomes the
  /// trained model; 0 returns the raw weights.
  double ema_decay = 0.999;
  std::uint64_t seed = 0;
};

struct DiffusionLogRow {
  std::size_t iteration;
  double loss;
};

struct DiffusionTrainResult {
  Denoiser model;
  std::vector<DiffusionLogRow> log;
};

using ProgressFn = std::function<void(const DiffusionLogRow&)>;

/// x0: [n, 1, s, s] in [-1, 1]; y: [n, cond_dim] normalized.
DiffusionTrainResult train_diffusion(const Tensor<float>& x0, const Tensor<float>& y, const DenoiserConfig& config,
                                     const DiffusionTrainConfig& train, const ProgressFn& progress = {});

void write_loss_log(const std::filesystem::path& path, const std::vector<DiffusionLogRow>& log);

/// Ancestral sampling from x_T ~ N(0, I) with the clipped-x0 posterior mean.
/// Row i uses its own generator seeded with seeds[i], so each image depends
/// only on (y_i, seed_i).
std::vector<Image> sample(const Denoiser& model, const Tensor<float>& y, const std::vector<std::uint64_t>& seeds);
Image sample(const Denoiser& model, const FeatureVector& y, std::uint64_t seed);

}  // namespace mad::diffusion
