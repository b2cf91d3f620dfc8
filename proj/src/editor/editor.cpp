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

#include "mad/editor/editor.hpp"

#include <cmath>
#include <utility>

#include "mad/numerics/adam.hpp"

namespace mad::editor {

namespace {

Tensor<double> row(const std::vector<double>& v) { return Tensor<double>(Shape{1, v.size()}, v); }

double weight(const EditSpec& s, std::size_t j) { return s.weights.empty() ? 1.0 : s.weights[j]; }

}  // namespace

void validate(const EditSpec& s, std::size_t dim) {
  MAD_REQUIRE(s.y_orig.space == FeatureSpace::normalized, "edit: y_orig must be normalized");
  MAD_REQUIRE(s.y_orig.size() == dim, "edit: expected feature dimension " + std::to_string(dim));
  MAD_REQUIRE(s.target_index < dim, "edit: target index out of range");
  MAD_REQUIRE(std::isfinite(s.target_value), "edit: target value must be finite");
  MAD_REQUIRE(s.weights.empty() || s.weights.size() == dim, "edit: weights must have one entry per feature");
  for (double w : s.weights) MAD_REQUIRE(w >= 0.0, "edit: weights must be non-negative");
  const auto& o = s.options;
  MAD_REQUIRE(o.lambda_tgt >= 0 && o.lambda_reg >= 0 && o.lambda_prior >= 0, "edit: lambdas must be non-negative");
  MAD_REQUIRE(o.steps >= 1, "edit: steps must be >= 1");
  MAD_REQUIRE(o.lr > 0, "edit: learning rate must be positive");
  MAD_REQUIRE(o.log_interval >= 1, "edit: log interval must be >= 1");
}

Var edit_objective(ParamBinding<double>& frozen, const vae::VaeModel& model, Var z, const EditSpec& spec) {
  validate(spec, model.input_dim());
  auto& g = frozen.graph();
  const std::size_t D = model.input_dim();
  std::vector<double> w(D), t(D);
  for (std::size_t j = 0; j < D; ++j) {
    if (j == spec.target_index) {
      w[j] = spec.options.lambda_tgt;
      t[j] = spec.target_value;
    } else {
      w[j] = spec.options.lambda_reg * weight(spec, j);
      t[j] = spec.y_orig[j];
    }
  }
  const Var resid = g.sub(model.decoder(frozen, z), g.constant(row(t)));
  const Var fit = g.sum(g.mul(g.square(resid), g.constant(row(w))));
  return g.add(fit, g.scale(g.sum(g.square(z)), spec.options.lambda_prior));
}

double edit_objective(const vae::VaeModel& model, const vae::LatentCode& z, const EditSpec& spec) {
  Graph<double> g;
  ParamBinding<double> p(g, model.params(), false);
  return g.value(edit_objective(p, model, g.constant(row(z.values)), spec))[0];
}

EditResult edit(const vae::VaeModel& model, const EditSpec& spec) {
  validate(spec, model.input_dim());
  const auto& o = spec.options;
  EditResult r;
  r.z_init = model.encode_mean(spec.y_orig);
  std::vector<Tensor<double>> z{row(r.z_init.values)};
  AdamState<double> adam;
  adam.config.lr = o.lr;

  for (std::size_t step = 0;; ++step) {
    Graph<double> g;
    ParamBinding<double> p(g, model.params(), false);
    Var zv;
    Var loss;
    try {
      zv = g.leaf(z[0]);
      loss = edit_objective(p, model, zv, spec);
      if (step < o.steps) g.backward(loss);
    } catch (const NumericFault& e) {
      throw NumericFault(e.op(), step);
    }
    if (step % o.log_interval == 0 || step == o.steps) {
      r.trajectory.push_back({step, model.decode({z[0].vec()}), g.value(loss)[0]});
    }
    if (step == o.steps) break;
    std::vector<Tensor<double>> grad{g.grad(zv)};
    if (o.optimizer == Optimizer::adam) {
      adam_step(z, grad, adam);
    } else {
      for (std::size_t i = 0; i < z[0].size(); ++i) z[0][i] -= o.lr * grad[0][i];
    }
    if (!z[0].all_finite()) throw NumericFault("latent update", step);
  }
  r.z_star = {z[0].vec()};
  r.y_new = model.decode(r.z_star);
  r.converged = std::abs(r.y_new[spec.target_index] - spec.target_value) < o.tol;
  return r;
}

FeatureVector edit_without_vae(const EditSpec& spec) {
  MAD_REQUIRE(spec.target_index < spec.y_orig.size(), "edit_without_vae: target index out of range");
  FeatureVector y = spec.y_orig;
  y[spec.target_index] = spec.target_value;
  return y;
}

std::vector<EditResult> batch_edit(const vae::VaeModel& model, const std::vector<EditSpec>& specs, Execution mode) {
  for (const auto& s : specs) validate(s, model.input_dim());
  std::vector<EditResult> out(specs.size());
  if (mode == Execution::serial_reference) {
    for (std::size_t i = 0; i < specs.size(); ++i) out[i] = edit(model, specs[i]);
    return out;
  }
  std::exception_ptr error;
  const auto n = static_cast<std::ptrdiff_t>(specs.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = edit(model, specs[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(mad_batch_edit_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return out;
}

std::vector<EditSpec> grid_specs(const std::vector<FeatureVector>& origins, std::size_t k,
                                 const std::vector<double>& targets, const EditOptions& options) {
  std::vector<EditSpec> specs;
  specs.reserve(origins.size() * targets.size());
  for (const auto& y : origins)
    for (double v : targets) specs.push_back({y, k, v, {}, options});
  return specs;
}

std::vector<double> target_grid(const morphometry::Normalizer& norm, std::size_t k, std::size_t points) {
  MAD_REQUIRE(k < norm.dim(), "target_grid: feature index out of range");
  MAD_REQUIRE(points >= 1, "target_grid: need at least one point");
  const double lo = norm.normalize_value(k, norm.lower()[k]);
  const double hi = norm.normalize_value(k, norm.upper()[k]);
  if (points == 1) return {0.5 * (lo + hi)};
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

EditSpec make_spec(const morphometry::Normalizer& norm, const FeatureVector& y_raw, const std::string& feature,
                   double target_raw, const EditOptions& options) {
  const std::size_t k = feature_index(norm.names(), feature);
  return {norm.normalize(y_raw), k, norm.normalize_value(k, target_raw), {}, options};
}

nlohmann::json options_to_json(const EditOptions& o) {
  return {{"lambda_tgt", o.lambda_tgt},
          {"lambda_reg", o.lambda_reg},
          {"lambda_prior", o.lambda_prior},
          {"steps", o.steps},
          {"lr", o.lr},
          {"tol", o.tol},
          {"log_interval", o.log_interval},
          {"optimizer", o.optimizer == Optimizer::adam ? "adam" : "gd"}};
}

EditOptions options_from_json(const nlohmann::json& j, EditOptions o) {
  if (!j.is_object()) throw ConfigError("edit options must be a JSON object");
  try {
    o.lambda_tgt = j.value("lambda_tgt", o.lambda_tgt);
    o.lambda_reg = j.value("lambda_reg", o.lambda_reg);
    o.lambda_prior = j.value("lambda_prior", o.lambda_prior);
    o.steps = j.value("steps", o.steps);
    o.lr = j.value("lr", o.lr);
    o.tol = j.value("tol", o.tol);
    o.log_interval = j.value("log_interval", o.log_interval);
    if (j.contains("optimizer")) {
      const auto name = j.at("optimizer").get<std::string>();
      if (name == "adam")
        o.optimizer = Optimizer::adam;
      else if (name == "gd")
        o.optimizer = Optimizer::gradient_descent;
      else
        throw ConfigError("unknown optimizer '" + name + "' (expected adam or gd)");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad edit options: ") + e.what());
  }
  if (o.lambda_tgt < 0 || o.lambda_reg < 0 || o.lambda_prior < 0) throw ConfigError("lambdas must be >= 0");
  if (o.steps < 1 || o.log_interval < 1 || !(o.lr > 0)) throw ConfigError("steps, log_interval and lr must be positive");
  return o;
}

std::vector<TrajectoryPoint> decimate(const std::vector<TrajectoryPoint>& t, std::size_t max_points) {
  if (t.size() <= max_points || max_points < 2) return t;
  std::vector<TrajectoryPoint> out;
  for (std::size_t i = 0; i < max_points; ++i)
    out.push_back(t[i * (t.size() - 1) / (max_points - 1)]);
  return out;
}

nlohmann::ordered_json to_json(const EditResult& r, const EditSpec& spec, const morphometry::Normalizer* norm,
                       std::size_t max_points) {
  nlohmann::ordered_json j;
  j["target_index"] = spec.target_index;
  j["target_value"] = spec.target_value;
  if (norm) {
    j["target_feature"] = norm->names()[spec.target_index];
    j["target_value_raw"] = norm->denormalize_value(spec.target_index, spec.target_value);
  }
  j["options"] = options_to_json(spec.options);
  j["y_orig"] = spec.y_orig.values;
  j["y_new"] = r.y_new.values;
  if (norm) {
    j["feature_names"] = norm->names();
    j["y_orig_raw"] = norm->denormalize(spec.y_orig).values;
    j["y_new_raw"] = norm->denormalize(r.y_new).values;
  }
  j["z_init"] = r.z_init.values;
  j["z_star"] = r.z_star.values;
  j["converged"] = r.converged;
  auto traj = nlohmann::ordered_json::array();
  for (const auto& p : decimate(r.trajectory, max_points)) {
    nlohmann::ordered_json e{{"step", p.step}, {"loss", p.loss}, {"y", p.y.values}};
    if (norm) e["y_raw"] = norm->denormalize(p.y).values;
    traj.push_back(std::move(e));
  }
  j["trajectory"] = std::move(traj);
  return j;
}

}  // namespace mad::editor
