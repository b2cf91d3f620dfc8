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

#include "mad/vae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "mad/numerics/adam.hpp"

namespace mad::vae {

namespace {

std::vector<std::size_t> mlp_widths(std::size_t in, std::size_t hidden, std::size_t layers, std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < layers; ++i) w.push_back(hidden);
  w.push_back(out);
  return w;
}

nlohmann::json config_json(const VaeConfig& c) {
  return {{"input_dim", c.input_dim},         {"latent_dim", c.latent_dim},
          {"hidden_width", c.hidden_width},   {"hidden_layers", c.hidden_layers},
          {"beta", c.beta},                   {"zero_init_encoder_head", c.zero_init_encoder_head},
          {"init_seed", c.init_seed}};
}

Tensor<double> row(const std::vector<double>& v) { return Tensor<double>(Shape{1, v.size()}, v); }

}  // namespace

double kl_divergence(const PosteriorParams& q) {
  MAD_REQUIRE(q.mu.size() == q.log_var.size(), "kl_divergence: size mismatch");
  double kl = 0;
  for (std::size_t i = 0; i < q.mu.size(); ++i)
    kl += q.mu[i] * q.mu[i] + std::exp(q.log_var[i]) - q.log_var[i] - 1.0;
  return 0.5 * kl;
}

VaeModel::VaeModel(const VaeConfig& config) : config_(config) {
  MAD_REQUIRE(config.input_dim >= 1 && config.latent_dim >= 1 && config.hidden_width >= 1,
              "VaeConfig: dimensions must be positive");
  MAD_REQUIRE(config.beta >= 0.0, "VaeConfig: beta must be non-negative");
  Rng rng(config.init_seed);
  encoder_ = Mlp::create(store_, "encoder",
                         mlp_widths(config.input_dim, config.hidden_width, config.hidden_layers, 2 * config.latent_dim),
                         Activation::tanh, rng);
  decoder_ = Mlp::create(store_, "decoder",
                         mlp_widths(config.latent_dim, config.hidden_width, config.hidden_layers, config.input_dim),
                         Activation::tanh, rng);
  if (config.zero_init_encoder_head) store_.value(encoder_.layers.back().weight).fill(0.0);
}

VaeModel::EncoderNodes VaeModel::encoder(ParamBinding<double>& p, Var y) const {
  auto& g = p.graph();
  MAD_REQUIRE(g.value(y).rank() == 2 && g.value(y).dim(1) == input_dim(),
              "encode: expected feature dimension " + std::to_string(input_dim()));
  const Var h = encoder_(p, y);
  const std::size_t d = latent_dim();
  return {g.slice(h, 0, d), g.clamp(g.slice(h, d, 2 * d), kLogVarMin, kLogVarMax)};
}

Var VaeModel::decoder(ParamBinding<double>& p, Var z) const {
  MAD_REQUIRE(p.graph().value(z).rank() == 2 && p.graph().value(z).dim(1) == latent_dim(),
              "decode: expected latent dimension " + std::to_string(latent_dim()));
  return decoder_(p, z);
}

PosteriorParams VaeModel::encode(const FeatureVector& y) const {
  MAD_REQUIRE(y.space == FeatureSpace::normalized, "encode: expected normalized features");
  MAD_REQUIRE(y.size() == input_dim(), "encode: expected feature dimension " + std::to_string(input_dim()));
  Graph<double> g;
  ParamBinding<double> p(g, store_, false);
  const auto nodes = encoder(p, g.constant(row(y.values)));
  return {g.value(nodes.mu).vec(), g.value(nodes.log_var).vec()};
}

LatentCode VaeModel::encode_mean(const FeatureVector& y) const { return {encode(y).mu}; }

FeatureVector VaeModel::decode(const LatentCode& z) const {
  MAD_REQUIRE(z.size() == latent_dim(), "decode: expected latent dimension " + std::to_string(latent_dim()));
  return {decode_batch(row(z.values)).vec(), FeatureSpace::normalized};
}

Tensor<double> VaeModel::encode_mean_batch(const Tensor<double>& y) const {
  Graph<double> g;
  ParamBinding<double> p(g, store_, false);
  return g.value(encoder(p, g.constant(y)).mu);
}

Tensor<double> VaeModel::decode_batch(const Tensor<double>& z) const {
  Graph<double> g;
  ParamBinding<double> p(g, store_, false);
  return g.value(decoder(p, g.constant(z)));
}

Checkpoint VaeModel::to_checkpoint() const {
  Checkpoint ck;
  ck.add_text("config", config_json(config_).dump());
  for (std::size_t i = 0; i < store_.size(); ++i) ck.add(store_.name(i), store_.value(i));
  return ck;
}

VaeModel VaeModel::from_checkpoint(const Checkpoint& ck) {
  const auto j = nlohmann::json::parse(ck.text("config"));
  VaeConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.latent_dim = j.at("latent_dim").get<std::size_t>();
  c.hidden_width = j.at("hidden_width").get<std::size_t>();
  c.hidden_layers = j.at("hidden_layers").get<std::size_t>();
  c.beta = j.at("beta").get<double>();
  c.zero_init_encoder_head = j.value("zero_init_encoder_head", false);
  c.init_seed = j.value("init_seed", std::uint64_t{0});
  VaeModel m(c);
  for (std::size_t i = 0; i < m.store_.size(); ++i) {
    auto t = ck.tensor<double>(m.store_.name(i));
    if (t.shape() != m.store_.value(i).shape())
      throw ConfigError("checkpoint shape mismatch for " + m.store_.name(i));
    m.store_.value(i) = std::move(t);
  }
  return m;
}

Var vae_loss(ParamBinding<double>& p, const VaeModel& model, const Tensor<double>& y, Rng& rng) {
  auto& g = p.graph();
  MAD_REQUIRE(y.rank() == 2 && y.dim(1) == model.input_dim(), "vae_loss: bad batch shape");
  const std::size_t n = y.dim(0), d = model.latent_dim();
  const Var target = g.constant(y);
  const auto q = model.encoder(p, target);
  Tensor<double> eps(Shape{n, d});
  for (auto& v : eps.vec()) v = rng.normal();
  const Var sigma = g.exp(g.scale(q.log_var, 0.5));
  const Var z = g.add(q.mu, g.mul(sigma, g.constant(std::move(eps))));
  const Var recon = g.sum(g.square(g.sub(target, model.decoder(p, z))));
  const Var kl_terms = g.add_scalar(g.sub(g.add(g.square(q.mu), g.exp(q.log_var)), q.log_var), -1.0);
  const Var kl = g.scale(g.sum(kl_terms), 0.5);
  const Var total = g.add(recon, g.scale(kl, model.config().beta));
  return g.scale(total, 1.0 / static_cast<double>(n));
}

double vae_loss(const VaeModel& model, const FeatureVector& y, Rng& rng) {
  MAD_REQUIRE(y.space == FeatureSpace::normalized, "vae_loss: expected normalized features");
  Graph<double> g;
  ParamBinding<double> p(g, model.params(), false);
  return g.value(vae_loss(p, model, row(y.values), rng))[0];
}

Tensor<double> stack(const std::vector<FeatureVector>& rows) {
  MAD_REQUIRE(!rows.empty(), "stack: no rows");
  const std::size_t D = rows.front().size();
  Tensor<double> out(Shape{rows.size(), D});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    MAD_REQUIRE(rows[i].size() == D, "stack: ragged rows");
    std::copy(rows[i].values.begin(), rows[i].values.end(), out.data() + i * D);
  }
  return out;
}

TrainResult train_vae(const std::vector<FeatureVector>& normalized, const VaeConfig& config,
                      const TrainConfig& train) {
  MAD_REQUIRE(normalized.size() >= 1000, "train_vae: need at least 1000 feature vectors");
  MAD_REQUIRE(train.validation_fraction > 0.0 && train.validation_fraction < 1.0,
              "train_vae: validation fraction must be in (0, 1)");
  MAD_REQUIRE(train.batch_size >= 1, "train_vae: batch size must be positive");
  for (const auto& y : normalized) {
    MAD_REQUIRE(y.space == FeatureSpace::normalized, "train_vae: expected normalized features");
    MAD_REQUIRE(y.size() == config.input_dim, "train_vae: feature dimension does not match config");
  }

  Rng rng(train.seed);
  std::vector<std::size_t> order(normalized.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i-- > 1;)
    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
  const auto n_val = static_cast<std::size_t>(std::ceil(train.validation_fraction * normalized.size()));
  std::vector<FeatureVector> val_rows, train_rows;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_val ? val_rows : train_rows).push_back(normalized[order[i]]);
  const Tensor<double> val = stack(val_rows);
  const std::uint64_t val_seed = rng();

  VaeModel model(config);
  AdamState<double> adam;
  adam.config.lr = train.learning_rate;

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Tensor<double>> best_params = model.params().values();
  std::vector<std::size_t> idx(train_rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t D = config.input_dim;

  try {
    for (std::size_t epoch = 1; epoch <= train.max_epochs; ++epoch) {
      for (std::size_t i = idx.size(); i-- > 1;)
        std::swap(idx[i], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
      double train_sum = 0;
      for (std::size_t start = 0; start < idx.size(); start += train.batch_size) {
        const std::size_t n = std::min(train.batch_size, idx.size() - start);
        Tensor<double> batch(Shape{n, D});
        for (std::size_t r = 0; r < n; ++r)
          std::copy(train_rows[idx[start + r]].values.begin(), train_rows[idx[start + r]].values.end(),
                    batch.data() + r * D);
        Graph<double> g;
        ParamBinding<double> p(g, model.params(), true);
        const Var loss = vae_loss(p, model, batch, rng);
        g.backward(loss);
        train_sum += g.value(loss)[0] * static_cast<double>(n);
        auto grads = p.gradients();
        adam_step(model.params().values(), grads, adam);
      }
      Rng val_rng(val_seed);
      Graph<double> g;
      ParamBinding<double> p(g, model.params(), false);
      const double val_loss = g.value(vae_loss(p, model, val, val_rng))[0];
      if (!std::isfinite(val_loss)) throw TrainingFailure("VAE validation loss diverged at epoch " + std::to_string(epoch));
      result.log.push_back({epoch, train_sum / static_cast<double>(idx.size()), val_loss});
      if (val_loss < result.best_val_loss) {
        result.best_val_loss = val_loss;
        result.best_epoch = epoch;
        best_params = model.params().values();
      } else if (epoch - result.best_epoch >= train.patience) {
        break;
      }
    }
  } catch (const NumericFault& e) {
    throw TrainingFailure(std::string("VAE training diverged: ") + e.what());
  }
  model.params().values() = std::move(best_params);
  result.model = std::move(model);
  return result;
}

void write_training_log(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.epoch, r.train_loss, r.val_loss);
    f << buf;
  }
}

}  // namespace mad::vae
