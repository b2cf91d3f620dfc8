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

#include "mad/service/server.hpp"

#include <chrono>
#include <cstdio>
#include <thread>

#include "httplib.h"

namespace mad::service {

struct Service::Models {
  geometry::GeoDataset dataset;
  morphometry::Normalizer normalizer;
  vae::VaeModel vae;
  std::optional<diffusion::Denoiser> denoiser;
};

Service::Service(RunConfig config) : config_(std::move(config)) {}
Service::~Service() = default;

void Service::load() {
  try {
    auto m = std::make_unique<Models>();
    const auto paths = CheckpointPaths::in(config_.checkpoint_dir);
    m->dataset = geometry::load_dataset(config_.dataset_dir);
    m->normalizer = morphometry::Normalizer::load(paths.normalizer);
    m->vae = vae::VaeModel::load(paths.vae);
    if (m->normalizer.dim() != m->vae.input_dim())
      throw ConfigError("normalizer and VAE checkpoints disagree on the feature dimension");
    if (std::filesystem::exists(paths.diffusion)) m->denoiser = diffusion::Denoiser::load(paths.diffusion);
    models_ = std::move(m);
    ready_.store(true);
  } catch (const std::exception& e) {
    std::lock_guard lock(error_mutex_);
    load_error_ = e.what();
    failed_.store(true);
    throw;
  }
}

namespace {

Response error(int status, const std::string& message) { return {status, {{"error", message}}}; }

Response loading() { return {503, {{"error", "checkpoints are still loading"}, {"status", "loading"}}}; }

nlohmann::ordered_json named(const std::vector<std::string>& names, const FeatureVector& v) {
  nlohmann::ordered_json j;
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = v[i];
  return j;
}

}  // namespace

Response Service::health() const {
  if (failed_.load()) {
    std::lock_guard lock(error_mutex_);
    return {503, {{"status", "error"}, {"error", load_error_}}};
  }
  if (!ready()) return {503, {{"status", "loading"}}};
  return {200,
          {{"status", "ok"},
           {"vae", true},
           {"diffusion", models_->denoiser.has_value()},
           {"samples", models_->dataset.images.size()}}};
}

Response Service::features() const {
  if (!ready()) return loading();
  const auto& n = models_->normalizer;
  auto list = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < n.dim(); ++i)
    list.push_back({{"name", n.names()[i]},
                    {"min", n.lower()[i]},
                    {"max", n.upper()[i]},
                    {"mean", n.means()[i]},
                    {"std", n.stds()[i]}});
  return {200, {{"units", "raw"}, {"features", std::move(list)}}};
}

Response Service::sample(const std::string& id_text) const {
  if (!ready()) return loading();
  std::size_t id = 0;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(id_text, &used);
    if (used != id_text.size() || v < 0) throw std::invalid_argument("id");
    id = static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    return error(400, "query parameter 'id' must be a non-negative integer");
  }
  const auto& ds = models_->dataset;
  if (id >= ds.images.size()) return error(404, "no sample with id " + id_text);
  const auto& names = models_->normalizer.names();
  return {200,
          {{"id", id},
           {"image_format", "pgm"},
           {"image_base64", base64_encode(encode_pgm(ds.images[id]))},
           {"features", named(names, select_features(ds.features[id], names))}}};
}

Response Service::edit(const std::string& body) const {
  if (!ready()) return loading();
  const auto start = std::chrono::steady_clock::now();
  const auto& m = *models_;
  const auto& norm = m.normalizer;
  const auto& names = norm.names();

  nlohmann::json req;
  try {
    req = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception&) {
    return error(400, "request body is not valid JSON");
  }
  if (!req.is_object()) return error(400, "request body must be a JSON object");

  FeatureVector origin{{}, FeatureSpace::raw};
  std::string feature;
  double target = 0;
  editor::EditOptions options = config_.edit;
  std::string generator = "oracle";
  std::uint64_t seed = config_.seed;
  try {
    const bool has_id = req.contains("sample_id"), has_features = req.contains("features");
    if (has_id == has_features) return error(400, "give exactly one of 'sample_id' or 'features'");
    if (has_id) {
      const auto id = req.at("sample_id").get<long long>();
      if (id < 0 || static_cast<std::size_t>(id) >= m.dataset.images.size())
        return error(400, "sample_id out of range");
      origin = select_features(m.dataset.features[static_cast<std::size_t>(id)], names);
    } else {
      const auto& f = req.at("features");
      if (f.is_array()) {
        origin.values = f.get<std::vector<double>>();
        if (origin.size() != names.size()) return error(400, "features must have one value per feature");
      } else if (f.is_object()) {
        for (const auto& n : names) {
          if (!f.contains(n)) return error(400, "features is missing '" + n + "'");
          origin.values.push_back(f.at(n).get<double>());
        }
      } else {
        return error(400, "features must be an array or an object");
      }
    }
    feature = req.at("target_feature").get<std::string>();
    target = req.at("target_value").get<double>();
    if (req.contains("options")) {
      nlohmann::json o = req.at("options");
      if (!o.is_object()) return error(400, "options must be an object");
      if (o.contains("generator")) generator = o.at("generator").get<std::string>();
      if (o.contains("seed")) seed = o.at("seed").get<std::uint64_t>();
      o.erase("generator");
      o.erase("seed");
      options = editor::options_from_json(o, options);
    }
  } catch (const nlohmann::json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  } catch (const ConfigError& e) {
    return error(400, e.what());
  }
  if (options.steps > 5000) return error(400, "options.steps must be <= 5000");
  if (generator != "oracle" && generator != "diffusion" && generator != "none")
    return error(400, "options.generator must be oracle, diffusion or none");
  if (generator == "diffusion" && !m.denoiser) return error(400, "no diffusion checkpoint is loaded");

  const auto it = std::find(names.begin(), names.end(), feature);
  if (it == names.end()) return error(400, "unknown target_feature '" + feature + "'");
  const auto k = static_cast<std::size_t>(it - names.begin());
  if (!std::isfinite(target) || target < norm.lower()[k] || target > norm.upper()[k]) {
    Response r = error(422, "target_value outside the valid range for " + feature);
    r.body["feature"] = feature;
    r.body["valid_range"] = {norm.lower()[k], norm.upper()[k]};
    return r;
  }
  for (double v : origin.values)
    if (!std::isfinite(v)) return error(400, "features must be finite");

  editor::EditSpec spec{norm.normalize(origin), k, norm.normalize_value(k, target), {}, options};
  editor::EditResult result;
  try {
    result = editor::edit(m.vae, spec);
  } catch (const NumericFault& e) {
    return error(500, e.what());
  }
  const FeatureVector y_new = norm.denormalize(result.y_new);

  nlohmann::ordered_json out;
  out["target_feature"] = feature;
  out["target_value"] = target;
  out["y_orig"] = named(names, origin);
  out["y_new"] = named(names, y_new);
  out["converged"] = result.converged;
  auto traj = nlohmann::ordered_json::array();
  for (const auto& p : editor::decimate(result.trajectory, 50))
    traj.push_back({{"step", p.step}, {"loss", p.loss}, {"features", named(names, norm.denormalize(p.y))}});
  out["trajectory"] = std::move(traj);
  out["generator"] = generator;
  if (generator == "oracle") {
    out["image_format"] = "pgm";
    out["image_base64"] = base64_encode(encode_pgm(oracle_render(y_new, names)));
  } else if (generator == "diffusion") {
    out["image_format"] = "pgm";
    out["image_base64"] = base64_encode(encode_pgm(diffusion::sample(*m.denoiser, result.y_new, seed)));
  } else {
    out["image_base64"] = nullptr;
  }
  out["timing_ms"] =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return {200, std::move(out)};
}

std::unique_ptr<httplib::Server> make_http_server(Service& service) {
  auto server = std::make_unique<httplib::Server>();
  const auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body.dump(), "application/json; charset=utf-8");
  };
  server->Get("/api/health", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.health());
  });
  server->Get("/api/features", [&service, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, service.features());
  });
  server->Get("/api/sample", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("id")) return reply(res, {400, {{"error", "missing query parameter 'id'"}}});
    reply(res, service.sample(req.get_param_value("id")));
  });
  server->Post("/api/edit", [&service, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, service.edit(req.body));
  });
  server->Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  return server;
}

void serve(const RunConfig& config, const std::string& host, int port) {
  Service service(config);
  auto server = make_http_server(service);
  std::thread loader([&service] {
    try {
      service.load();
      std::fprintf(stderr, "checkpoints loaded\n");
    } catch (const std::exception& e) {
      std::fprintf(stderr, "loading failed: %s\n", e.what());
    }
  });
  std::fprintf(stderr, "listening on http://%s:%d\n", host.c_str(), port);
  const bool ok = server->listen(host, port);
  loader.join();
  if (!ok) throw ConfigError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace mad::service
