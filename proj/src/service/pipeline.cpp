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

#include "mad/service/pipeline.hpp"

#include <algorithm>
#include <numeric>

namespace mad::service {

PreparedFeatures prepare_features(const geometry::GeoDataset& ds, const std::vector<std::string>& names) {
  PreparedFeatures pf;
  for (const auto& f : ds.features) pf.raw.push_back(select_features(f, names));
  auto fit = morphometry::fit_normalizer(pf.raw, names);
  pf.normalizer = std::move(fit.normalizer);
  pf.kept = std::move(fit.kept_indices);
  for (std::size_t i : pf.kept) pf.normalized.push_back(pf.normalizer.normalize(pf.raw[i]));
  return pf;
}

std::optional<FeatureVector> measure(const Image& image, const std::vector<std::string>& names, double scale) {
  const auto seg = morphometry::segment_single(image);
  if (!seg.accepted) return std::nullopt;
  FeatureVector f = morphometry::extract_features(image, seg.mask);
  f[geo::kArea] *= scale * scale;
  f[geo::kPerimeter] *= scale;
  return select_features(f, names);
}

Image oracle_render(const FeatureVector& raw, const std::vector<std::string>& names) {
  return geometry::render(geometry::nearest_feasible_params(raw, names));
}

Tensor<float> diffusion_images(const geometry::GeoDataset& ds, std::size_t image_size) {
  MAD_REQUIRE(image_size >= 1 && geometry::kFrame % image_size == 0, "diffusion_images: size must divide the frame");
  const std::size_t factor = geometry::kFrame / image_size;
  std::vector<Image> imgs;
  imgs.reserve(ds.images.size());
  for (const auto& im : ds.images) imgs.push_back(factor == 1 ? im : downscale(im, factor));
  return diffusion::to_model_space(imgs);
}

Tensor<float> condition_rows(const std::vector<FeatureVector>& normalized) {
  MAD_REQUIRE(!normalized.empty(), "condition_rows: no rows");
  const std::size_t D = normalized[0].size();
  Tensor<float> y(Shape{normalized.size(), D});
  for (std::size_t i = 0; i < normalized.size(); ++i)
    for (std::size_t k = 0; k < D; ++k) y.at(i, k) = static_cast<float>(normalized[i][k]);
  return y;
}

Tensor<float> diffusion_conditions(const PreparedFeatures& pf) {
  std::vector<FeatureVector> all;
  all.reserve(pf.raw.size());
  for (const auto& r : pf.raw) all.push_back(pf.normalizer.normalize(r));
  return condition_rows(all);
}

EvalOutputs run_eval(const geometry::GeoDataset& ds, const PreparedFeatures& pf, const vae::VaeModel& model,
                     const diffusion::Denoiser* denoiser, const editor::EditOptions& options,
                     const EvalRequest& req) {
  if (req.mode != "decoded" && req.mode != "image") throw ConfigError("eval mode must be decoded or image");
  if (req.mode == "image" && !denoiser) throw ConfigError("image-mode evaluation needs a diffusion checkpoint");
  if (req.samples < 1 || req.samples > pf.kept.size())
    throw ConfigError("eval samples must be between 1 and " + std::to_string(pf.kept.size()));
  const auto& names = pf.normalizer.names();

  Rng rng(req.seed);
  std::vector<std::size_t> pos(pf.kept.size());
  std::iota(pos.begin(), pos.end(), 0);
  for (std::size_t i = 0; i < req.samples; ++i)
    std::swap(pos[i], pos[i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pos.size() - i - 1)))]);
  pos.resize(req.samples);
  std::vector<FeatureVector> origins;
  for (std::size_t p : pos) origins.push_back(pf.normalized[p]);

  EvalOutputs out;
  std::vector<Image> origin_images;
  for (const auto& feature : req.edited) {
    const std::size_t k = feature_index(names, feature);
    const auto specs = editor::grid_specs(origins, k, editor::target_grid(pf.normalizer, k, req.grid), options);
    std::vector<FeatureVector> finals(specs.size());
    if (req.baseline) {
      for (std::size_t i = 0; i < specs.size(); ++i) finals[i] = editor::edit_without_vae(specs[i]);
    } else {
      const auto results = editor::batch_edit(model, specs);
      for (std::size_t i = 0; i < specs.size(); ++i) finals[i] = results[i].y_new;
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
      out.records.push_back({k, specs[i].y_orig, specs[i].target_value, finals[i], true});
      origin_images.push_back(ds.images[pf.kept[pos[i / req.grid]]]);
    }
  }

  if (req.mode == "image") {
    const std::size_t s = denoiser->config().image_size;
    const double scale = static_cast<double>(geometry::kFrame) / static_cast<double>(s);
    constexpr std::size_t kChunk = 64;
    double identity = 0;
    for (std::size_t start = 0; start < out.records.size(); start += kChunk) {
      const std::size_t end = std::min(out.records.size(), start + kChunk);
      std::vector<FeatureVector> conds;
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = start; i < end; ++i) {
        conds.push_back(out.records[i].y_final);
        seeds.push_back(req.seed * 1000003ULL + i);
      }
      const auto imgs = diffusion::sample(*denoiser, condition_rows(conds), seeds);
      for (std::size_t i = start; i < end; ++i) {
        const Image& img = imgs[i - start];
        const auto measured = measure(img, names, scale);
        auto& r = out.records[i];
        r.detected = measured.has_value();
        if (measured) r.y_final = pf.normalizer.normalize(*measured);
        const Image reference = scale == 1.0 ? origin_images[i]
                                             : downscale(origin_images[i], static_cast<std::size_t>(scale));
        identity += evaluation::identity_similarity(reference, img);
        out.generated.push_back(img);
      }
    }
    const evaluation::FeatureLaw law(names, geometry::manifold_ratio());
    out.report = evaluation::build_report(req.mode, out.records, pf.normalizer, law, req.measured);
    out.report.ssr = 100.0 * static_cast<double>(out.report.n_detected) / static_cast<double>(out.report.n_total);
    out.report.identity = identity / static_cast<double>(out.records.size());
    return out;
  }
  const evaluation::FeatureLaw law(names, geometry::manifold_ratio());
  out.report = evaluation::build_report(req.mode, out.records, pf.normalizer, law, req.measured);
  return out;
}

LatentAnalysis analyze_latent(const vae::VaeModel& model, const std::vector<FeatureVector>& normalized,
                              std::uint64_t seed) {
  LatentAnalysis a;
  a.pca_ratios = vae::latent_pca(model, normalized);
  a.components_90 = vae::components_for_variance(a.pca_ratios, 0.9);
  Rng rng(seed);
  a.distance_r = vae::distance_preservation(model, normalized, 2000, rng);
  a.interpolation = vae::interpolation_smoothness(model, normalized, 10, 50, rng);
  a.smoothness = a.interpolation.mean_score;
  return a;
}

nlohmann::ordered_json to_json(const LatentAnalysis& a, const std::vector<std::string>& names) {
  nlohmann::ordered_json j;
  j["pca_explained_variance"] = a.pca_ratios;
  j["components_for_90_percent"] = a.components_90;
  j["distance_preservation_r"] = a.distance_r;
  j["interpolation_smoothness"] = a.smoothness;
  j["interpolation_pair_scores"] = a.interpolation.pair_scores;
  j["feature_names"] = names;
  auto paths = nlohmann::ordered_json::array();
  for (const auto& path : a.interpolation.trajectories) {
    auto p = nlohmann::ordered_json::array();
    for (const auto& y : path) p.push_back(y.values);
    paths.push_back(std::move(p));
  }
  j["interpolation_paths"] = std::move(paths);
  return j;
}

}  // namespace mad::service
