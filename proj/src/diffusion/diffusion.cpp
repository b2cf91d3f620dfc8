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

#include "mad/diffusion/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "mad/numerics/adam.hpp"

namespace mad::diffusion {

NoiseSchedule make_schedule(std::size_t steps, double beta_min, double beta_max) {
  MAD_REQUIRE(steps >= 2, "make_schedule: need at least two steps");
  MAD_REQUIRE(beta_min > 0 && beta_min < beta_max && beta_max < 1, "make_schedule: need 0 < beta_min < beta_max < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  s.alpha_bar.resize(steps);
  double prod = 1.0;
  for (std::size_t t = 0; t < steps; ++t) {
    s.beta[t] = beta_min + (beta_max - beta_min) * static_cast<double>(t) / static_cast<double>(steps - 1);
    prod *= 1.0 - s.beta[t];
    s.alpha_bar[t] = prod;
  }
  return s;
}

Tensor<float> forward_sample(const Tensor<float>& x0, std::size_t t, const Tensor<float>& eps,
                             const NoiseSchedule& schedule) {
  MAD_REQUIRE(t < schedule.steps, "forward_sample: step out of range");
  MAD_REQUIRE(x0.shape() == eps.shape(), "forward_sample: x0 and eps shapes differ");
  const auto a = static_cast<float>(std::sqrt(schedule.alpha_bar[t]));
  const auto b = static_cast<float>(std::sqrt(1.0 - schedule.alpha_bar[t]));
  Tensor<float> out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

Tensor<float> to_model_space(const std::vector<Image>& images) {
  MAD_REQUIRE(!images.empty(), "to_model_space: no images");
  const std::size_t h = images[0].height, w = images[0].width;
  Tensor<float> x(Shape{images.size(), 1, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    MAD_REQUIRE(images[n].width == w && images[n].height == h, "to_model_space: mixed image sizes");
    for (std::size_t i = 0; i < h * w; ++i) x[n * h * w + i] = static_cast<float>(images[n].pixels[i]) / 127.5f - 1.0f;
  }
  return x;
}

Image from_model_space(const Tensor<float>& x, std::size_t index) {
  MAD_REQUIRE(x.rank() == 4 && x.dim(1) == 1 && index < x.dim(0), "from_model_space: expected [n, 1, h, w]");
  const std::size_t h = x.dim(2), w = x.dim(3);
  Image img(w, h);
  for (std::size_t i = 0; i < h * w; ++i) {
    const float v = std::clamp(x[index * h * w + i], -1.0f, 1.0f);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround((v + 1.0f) * 127.5f));
  }
  return img;
}

template <class T>
Tensor<T> timestep_embedding(const std::vector<std::size_t>& t, std::size_t dim) {
  MAD_REQUIRE(dim % 2 == 0 && dim >= 2, "timestep_embedding: dimension must be even");
  const std::size_t half = dim / 2;
  Tensor<T> e(Shape{t.size(), dim});
  for (std::size_t n = 0; n < t.size(); ++n)
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
      const double arg = static_cast<double>(t[n]) * freq;
      e.at(n, i) = static_cast<T>(std::sin(arg));
      e.at(n, half + i) = static_cast<T>(std::cos(arg));
    }
  return e;
}

namespace {

constexpr double kReluGain = std::numbers::sqrt2;

nlohmann::json config_json(const DenoiserConfig& c) {
  return {{"image_size", c.image_size}, {"cond_dim", c.cond_dim},   {"width1", c.width1},
          {"width2", c.width2},         {"width3", c.width3},       {"embed_dim", c.embed_dim},
          {"steps", c.steps},           {"beta_min", c.beta_min},   {"beta_max", c.beta_max},
          {"init_seed", c.init_seed}};
}

template <class T>
Tensor<T> coordinate_planes(std::size_t n, std::size_t s) {
  Tensor<T> c(Shape{n, 2, s, s});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t y = 0; y < s; ++y)
      for (std::size_t x = 0; x < s; ++x) {
        const T u = (T(2) * static_cast<T>(x) + T(1)) / static_cast<T>(s) - T(1);
        const T v = (T(2) * static_cast<T>(y) + T(1)) / static_cast<T>(s) - T(1);
        c[((b * 2 + 0) * s + y) * s + x] = u;
        c[((b * 2 + 1) * s + y) * s + x] = v;
      }
  return c;
}

}  // namespace

template <class T>
BasicDenoiser<T>::BasicDenoiser(const DenoiserConfig& c) : config_(c), schedule_(make_schedule(c.steps, c.beta_min, c.beta_max)) {
  MAD_REQUIRE(c.image_size >= 4 && c.image_size % 4 == 0, "Denoiser: image size must be a multiple of 4");
  MAD_REQUIRE(c.cond_dim >= 1 && c.width1 >= 1 && c.width2 >= 1 && c.width3 >= 1 && c.embed_dim >= 2,
              "Denoiser: bad widths");
  Rng rng(c.init_seed);
  const std::size_t E = c.embed_dim;
  time1_ = Linear::create(store_, "time.0", E, E, rng, kReluGain);
  time2_ = Linear::create(store_, "time.1", E, E, rng);
  cond_ = Mlp::create(store_, "cond", {c.cond_dim, E, E}, Activation::relu, rng);
  const auto make_block = [&](const std::string& name, std::size_t in, std::size_t out) {
    Block b{Conv2d::create(store_, name + ".conv1", in, out, 3, rng, kReluGain),
            Conv2d::create(store_, name + ".conv2", out, out, 3, rng, kReluGain),
            Linear::create(store_, name + ".scale", E, out, rng),
            Linear::create(store_, name + ".shift", E, out, rng),
            std::nullopt};
    // Scales start at exactly 1.
    store_.value(b.scale.weight).fill(T(0));
    if (in != out) b.skip = Conv2d::create(store_, name + ".skip", in, out, 1, rng);
    return b;
  };
  down1_ = make_block("down1", 3, c.width1);
  down2_ = make_block("down2", c.width1, c.width2);
  down3_ = make_block("down3", c.width2, c.width3);
  reduce3_ = Conv2d::create(store_, "reduce3", c.width3, c.width2, 1, rng);
  up2_ = make_block("up2", 2 * c.width2, c.width2);
  reduce2_ = Conv2d::create(store_, "reduce2", c.width2, c.width1, 1, rng);
  up1_ = make_block("up1", 2 * c.width1, c.width1);
  out_ = Conv2d::create(store_, "out", c.width1, 1, 1, rng);
  store_.value(out_.weight).fill(T(0));
}

template <class T>
Var BasicDenoiser<T>::block(ParamBinding<T>& p, const Block& b, Var x, Var emb) const {
  auto& g = p.graph();
  Var h = g.mul_channel(b.conv1(p, x), g.add_scalar(b.scale(p, emb), T(1)));
  h = g.relu(g.add_channel(h, b.shift(p, emb)));
  h = b.conv2(p, h);
  return g.relu(g.add(h, b.skip ? (*b.skip)(p, x) : x));
}

template <class T>
Var BasicDenoiser<T>::predict(ParamBinding<T>& p, Var x_t, const std::vector<std::size_t>& t, Var y) const {
  auto& g = p.graph();
  const auto& xs = g.value(x_t).shape();
  const std::size_t s = config_.image_size;
  MAD_REQUIRE(xs.size() == 4 && xs[1] == 1 && xs[2] == s && xs[3] == s,
              "Denoiser: expected x_t of shape [n, 1, " + std::to_string(s) + ", " + std::to_string(s) + "]");
  const std::size_t n = xs[0];
  MAD_REQUIRE(t.size() == n, "Denoiser: one timestep per image required");
  for (std::size_t ti : t) MAD_REQUIRE(ti < config_.steps, "Denoiser: timestep out of range");
  MAD_REQUIRE(g.value(y).rank() == 2 && g.value(y).dim(0) == n && g.value(y).dim(1) == config_.cond_dim,
              "Denoiser: expected condition of shape [n, " + std::to_string(config_.cond_dim) + "]");

  Var temb = g.constant(timestep_embedding<T>(t, config_.embed_dim));
  temb = time2_(p, g.relu(time1_(p, temb)));
  const Var emb = g.relu(g.add(temb, cond_(p, y)));

  const Var x = g.concat(x_t, g.constant(coordinate_planes<T>(n, s)));
  const Var h1 = block(p, down1_, x, emb);
  const Var h2 = block(p, down2_, g.avg_pool2(h1), emb);
  const Var h3 = block(p, down3_, g.avg_pool2(h2), emb);
  const Var u2 = block(p, up2_, g.concat(g.upsample2(reduce3_(p, h3)), h2), emb);
  const Var u1 = block(p, up1_, g.concat(g.upsample2(reduce2_(p, u2)), h1), emb);
  return out_(p, u1);
}

template <class T>
Tensor<T> BasicDenoiser<T>::predict(const Tensor<T>& x_t, const std::vector<std::size_t>& t,
                                    const Tensor<T>& y) const {
  Graph<T> g;
  ParamBinding<T> p(g, store_, false);
  return g.value(predict(p, g.constant(x_t), t, g.constant(y)));
}

template <class T>
Checkpoint BasicDenoiser<T>::to_checkpoint() const {
  Checkpoint ck;
  ck.add_text("config", config_json(config_).dump());
  for (std::size_t i = 0; i < store_.size(); ++i) ck.add(store_.name(i), store_.value(i));
  return ck;
}

template <class T>
BasicDenoiser<T> BasicDenoiser<T>::from_checkpoint(const Checkpoint& ck) {
  const auto j = nlohmann::json::parse(ck.text("config"));
  DenoiserConfig c;
  c.image_size = j.at("image_size").get<std::size_t>();
  c.cond_dim = j.at("cond_dim").get<std::size_t>();
  c.width1 = j.at("width1").get<std::size_t>();
  c.width2 = j.at("width2").get<std::size_t>();
  c.width3 = j.at("width3").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.steps = j.at("steps").get<std::size_t>();
  c.beta_min = j.at("beta_min").get<double>();
  c.beta_max = j.at("beta_max").get<double>();
  c.init_seed = j.value("init_seed", std::uint64_t{0});
  BasicDenoiser m(c);
  for (std::size_t i = 0; i < m.store_.size(); ++i) {
    auto t = ck.tensor<T>(m.store_.name(i));
    if (t.shape() != m.store_.value(i).shape()) throw ConfigError("checkpoint shape mismatch for " + m.store_.name(i));
    m.store_.value(i) = std::move(t);
  }
  return m;
}

template class BasicDenoiser<float>;
template class BasicDenoiser<double>;

template <class T>
Var diffusion_loss(ParamBinding<T>& p, const BasicDenoiser<T>& model, const Tensor<T>& x0, const Tensor<T>& y,
                   Rng& rng) {
  auto& g = p.graph();
  MAD_REQUIRE(x0.rank() == 4 && y.rank() == 2 && x0.dim(0) == y.dim(0), "diffusion_loss: batch shapes differ");
  const std::size_t n = x0.dim(0), plane = x0.size() / n;
  const auto& sched = model.schedule();
  std::vector<std::size_t> t(n);
  Tensor<T> eps(x0.shape()), x_t(x0.shape());
  for (std::size_t b = 0; b < n; ++b) {
    t[b] = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(sched.steps) - 1));
    const auto a = static_cast<T>(std::sqrt(sched.alpha_bar[t[b]]));
    const auto s = static_cast<T>(std::sqrt(1.0 - sched.alpha_bar[t[b]]));
    for (std::size_t i = b * plane; i < (b + 1) * plane; ++i) {
      eps[i] = static_cast<T>(rng.normal());
      x_t[i] = a * x0[i] + s * eps[i];
    }
  }
  const Var pred = model.predict(p, g.constant(std::move(x_t)), t, g.constant(y));
  const Var err = g.sum(g.square(g.sub(pred, g.constant(std::move(eps)))));
  return g.scale(err, T(1) / static_cast<T>(n));
}

template Var diffusion_loss<float>(ParamBinding<float>&, const BasicDenoiser<float>&, const Tensor<float>&,
                                   const Tensor<float>&, Rng&);
template Var diffusion_loss<double>(ParamBinding<double>&, const BasicDenoiser<double>&, const Tensor<double>&,
                                    const Tensor<double>&, Rng&);
template Tensor<float> timestep_embedding<float>(const std::vector<std::size_t>&, std::size_t);
template Tensor<double> timestep_embedding<double>(const std::vector<std::size_t>&, std::size_t);

double diffusion_loss(const Denoiser& model, const Tensor<float>& x0, const Tensor<float>& y, Rng& rng) {
  Graph<float> g;
  ParamBinding<float> p(g, model.params(), false);
  return g.value(diffusion_loss(p, model, x0, y, rng))[0];
}

DiffusionTrainResult train_diffusion(const Tensor<float>& x0, const Tensor<float>& y, const DenoiserConfig& config,
                                     const DiffusionTrainConfig& train, const ProgressFn& progress) {
  MAD_REQUIRE(x0.rank() == 4 && y.rank() == 2 && x0.dim(0) == y.dim(0) && x0.dim(0) >= 1,
              "train_diffusion: need matching image and feature batches");
  MAD_REQUIRE(train.batch_size >= 1 && train.log_interval >= 1, "train_diffusion: bad batch size or log interval");
  MAD_REQUIRE(train.ema_decay >= 0 && train.ema_decay < 1, "train_diffusion: ema_decay must lie in [0, 1)");
  const std::size_t N = x0.dim(0), plane = x0.size() / N, D = y.dim(1);
  Denoiser model(config);
  std::vector<Tensor<float>> ema = model.params().values();
  AdamState<float> adam;
  adam.config.lr = train.learning_rate;
  Rng rng(train.seed);
  DiffusionTrainResult result;
  double window = 0;
  std::size_t in_window = 0;
  for (std::size_t it = 1; it <= train.iterations; ++it) {
    const std::size_t B = std::min(train.batch_size, N);
    Tensor<float> xb(Shape{B, 1, x0.dim(2), x0.dim(3)}), yb(Shape{B, D});
    for (std::size_t b = 0; b < B; ++b) {
      const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(N) - 1));
      std::copy_n(x0.data() + i * plane, plane, xb.data() + b * plane);
      std::copy_n(y.data() + i * D, D, yb.data() + b * D);
    }
    Graph<float> g;
    ParamBinding<float> p(g, model.params(), true);
    double loss_value = 0;
    try {
      const Var loss = diffusion_loss(p, model, xb, yb, rng);
      loss_value = g.value(loss)[0];
      g.backward(loss);
    } catch (const NumericFault& e) {
      throw TrainingFailure("diffusion training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    auto grads = p.gradients();
    adam_step(model.params().values(), grads, adam);
    // Warm-up keeps the average from being dominated by the initial weights.
    const float d = static_cast<float>(
        std::min(train.ema_decay, static_cast<double>(it) / static_cast<double>(it + 10)));
    const auto& w = model.params().values();
    for (std::size_t k = 0; k < ema.size(); ++k)
      for (std::size_t i = 0; i < ema[k].size(); ++i) ema[k][i] = d * ema[k][i] + (1.0f - d) * w[k][i];
    window += loss_value;
    if (++in_window == train.log_interval || it == train.iterations) {
      result.log.push_back({it, window / static_cast<double>(in_window)});
      if (progress) progress(result.log.back());
      window = 0;
      in_window = 0;
    }
  }
  if (train.ema_decay > 0) model.params().values() = std::move(ema);
  result.model = std::move(model);
  return result;
}

void write_loss_log(const std::filesystem::path& path, const std::vector<DiffusionLogRow>& log) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << "iteration,loss\n";
  char buf[64];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", r.iteration, r.loss);
    f << buf;
  }
}

std::vector<Image> sample(const Denoiser& model, const Tensor<float>& y, const std::vector<std::uint64_t>& seeds) {
  const auto& c = model.config();
  MAD_REQUIRE(y.rank() == 2 && y.dim(1) == c.cond_dim && y.dim(0) == seeds.size() && !seeds.empty(),
              "sample: need one condition row per seed");
  const std::size_t n = seeds.size(), s = c.image_size, plane = s * s;
  const auto& sch = model.schedule();
  std::vector<Rng> rngs;
  for (auto seed : seeds) rngs.emplace_back(seed);
  Tensor<float> x(Shape{n, 1, s, s});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < plane; ++i) x[b * plane + i] = static_cast<float>(rngs[b].normal());

  for (std::size_t t = sch.steps; t-- > 0;) {
    const Tensor<float> eps = model.predict(x, std::vector<std::size_t>(n, t), y);
    if (!eps.all_finite()) throw NumericFault("sample", sch.steps - t);
    const double ab = sch.alpha_bar[t], ab_prev = t > 0 ? sch.alpha_bar[t - 1] : 1.0;
    const double beta = sch.beta[t];
    // Posterior q(x_{t-1} | x_t, x0_hat) with x0_hat clipped to the data range.
    const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
    const double ct = std::sqrt(1.0 - beta) * (1.0 - ab_prev) / (1.0 - ab);
    const double sigma = t > 0 ? std::sqrt(beta * (1.0 - ab_prev) / (1.0 - ab)) : 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = b * plane; i < (b + 1) * plane; ++i) {
        double x0_hat = (x[i] - std::sqrt(1.0 - ab) * eps[i]) / std::sqrt(ab);
        x0_hat = std::clamp(x0_hat, -1.0, 1.0);
        double next = c0 * x0_hat + ct * x[i];
        if (t > 0) next += sigma * rngs[b].normal();
        x[i] = static_cast<float>(next);
      }
  }
  std::vector<Image> out;
  for (std::size_t b = 0; b < n; ++b) out.push_back(from_model_space(x, b));
  return out;
}

Image sample(const Denoiser& model, const FeatureVector& y, std::uint64_t seed) {
  MAD_REQUIRE(y.space == FeatureSpace::normalized, "sample: expected normalized features");
  return sample(model, Tensor<float>(Shape{1, y.size()}, std::vector<float>(y.values.begin(), y.values.end())),
                {seed})[0];
}

}  // namespace mad::diffusion
