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

#include "mad/service/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "mad/service/config.hpp"
#include "mad/service/pipeline.hpp"
#include "mad/service/server.hpp"

namespace mad::service {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << text;
}

void require_file(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::exists(p)) throw ConfigError(what + " not found: " + p.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

struct Loaded {
  morphometry::Normalizer normalizer;
  vae::VaeModel vae;
};

Loaded load_models(const std::filesystem::path& ckpt) {
  const auto paths = CheckpointPaths::in(ckpt);
  require_file(paths.vae, "VAE checkpoint");
  require_file(paths.normalizer, "normalizer");
  Loaded l{morphometry::Normalizer::load(paths.normalizer), vae::VaeModel::load(paths.vae)};
  if (l.normalizer.dim() != l.vae.input_dim())
    throw ConfigError("normalizer and VAE checkpoints disagree on the feature dimension");
  return l;
}

geometry::GeoDataset load_data(const std::filesystem::path& dir) {
  require_file(dir / "meta.json", "dataset");
  return geometry::load_dataset(dir);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = config_from_environment();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  CLI::App app{"Manifold-aware feature editing: synthetic data, VAE, latent editing, diffusion, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_file;
  app.add_option("--config", config_file, "JSON config merged under flags (overrides MAD_CONFIG)");

  std::size_t n = 4000;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> data, ckpt, out_path;

  auto* synth = app.add_subcommand("synth", "render the synthetic ellipse dataset");
  synth->add_option("--n", n, "number of images")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed);
  synth->add_option("--out", out_path, "dataset directory");

  std::optional<double> beta;
  std::optional<std::size_t> epochs;
  auto* train_vae = app.add_subcommand("train-vae", "fit the normalizer and train the feature VAE");
  train_vae->add_option("--data", data, "dataset directory");
  train_vae->add_option("--out", ckpt, "checkpoint directory");
  train_vae->add_option("--seed", seed);
  train_vae->add_option("--beta", beta);
  train_vae->add_option("--epochs", epochs, "maximum epochs");

  auto* analyze = app.add_subcommand("analyze-vae", "latent PCA, distance preservation and smoothness");
  analyze->add_option("--data", data);
  analyze->add_option("--ckpt", ckpt);
  analyze->add_option("--out", out_path, "analysis JSON (default <ckpt>/analysis.json)");
  analyze->add_option("--seed", seed);

  std::optional<std::size_t> iterations, batch;
  auto* train_diff = app.add_subcommand("train-diffusion", "train the conditional denoiser");
  train_diff->add_option("--data", data);
  train_diff->add_option("--out", ckpt, "checkpoint directory");
  train_diff->add_option("--seed", seed);
  train_diff->add_option("--iterations", iterations);
  train_diff->add_option("--batch", batch);

  std::string feature;
  double target = 0;
  std::optional<std::string> input, image_out, options_json;
  std::optional<std::size_t> sample_id;
  std::vector<double> raw_features;
  std::string generator = "oracle";
  std::size_t max_points = 50;
  auto* edit = app.add_subcommand("edit", "run one latent edit");
  edit->add_option("--ckpt", ckpt);
  edit->add_option("--feature", feature, "feature to edit")->required();
  edit->add_option("--target", target, "target value in raw units")->required();
  auto* in_opt = edit->add_option("--input", input, "PGM image to measure");
  auto* id_opt = edit->add_option("--sample", sample_id, "dataset sample id (needs --data)");
  auto* feat_opt = edit->add_option("--features", raw_features, "raw feature values in model order");
  in_opt->excludes(id_opt)->excludes(feat_opt);
  id_opt->excludes(feat_opt);
  edit->add_option("--data", data);
  edit->add_option("--out", out_path, "EditResult JSON (default stdout)");
  edit->add_option("--image", image_out, "write the edited image as PGM");
  edit->add_option("--generator", generator, "oracle or diffusion")->check(CLI::IsMember({"oracle", "diffusion"}));
  edit->add_option("--options", options_json, "edit options as JSON");
  edit->add_option("--max-points", max_points, "trajectory points kept in the output");
  edit->add_option("--seed", seed);

  std::optional<std::string> mode;
  std::string eval_features = "all";
  std::optional<std::size_t> samples, grid;
  bool baseline = false;
  auto* eval = app.add_subcommand("eval", "batch edits plus the delta-delta report");
  eval->add_option("--mode", mode)->check(CLI::IsMember({"decoded", "image"}));
  eval->add_option("--feature", eval_features, "edited feature(s): name, comma list or all");
  eval->add_option("--samples", samples);
  eval->add_option("--grid", grid, "target grid points");
  eval->add_option("--data", data);
  eval->add_option("--ckpt", ckpt);
  eval->add_option("--out", out_path, "report directory");
  eval->add_flag("--baseline", baseline, "replace latent editing with the independence baseline");
  eval->add_option("--seed", seed);

  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP API for interactive editing");
  serve_cmd->add_option("--ckpt", ckpt);
  serve_cmd->add_option("--data", data);
  serve_cmd->add_option("--host", host);
  serve_cmd->add_option("--port", port)->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (!config_file.empty()) {
      std::ifstream f(config_file);
      if (!f) throw ConfigError("cannot read config " + config_file);
      try {
        cfg = config_from_json(nlohmann::json::parse(f), cfg);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
      }
    }
    if (seed) cfg.seed = *seed;
    if (data) cfg.dataset_dir = *data;
    if (ckpt) cfg.checkpoint_dir = *ckpt;
    if (beta) cfg.vae.beta = *beta;
    if (epochs) cfg.vae_train.max_epochs = *epochs;
    if (iterations) cfg.diffusion_train.iterations = *iterations;
    if (batch) cfg.diffusion_train.batch_size = *batch;
    if (mode) cfg.eval_mode = *mode;
    if (samples) cfg.eval_samples = *samples;
    if (grid) cfg.eval_grid = *grid;
    cfg.vae_train.seed = cfg.seed;
    cfg.diffusion_train.seed = cfg.seed;
    validate(cfg);
    const auto paths = CheckpointPaths::in(cfg.checkpoint_dir);

    if (*synth) {
      const auto dir = out_path ? std::filesystem::path(*out_path) : cfg.dataset_dir;
      geometry::save_dataset(geometry::build_dataset(n, cfg.seed), dir);
      out << "wrote " << n << " images to " << dir.string() << '\n';
    } else if (*train_vae) {
      const auto ds = load_data(cfg.dataset_dir);
      const auto pf = prepare_features(ds, cfg.features);
      auto vc = cfg.vae;
      vc.input_dim = cfg.features.size();
      vc.init_seed = cfg.seed;
      const auto result = vae::train_vae(pf.normalized, vc, cfg.vae_train);
      std::filesystem::create_directories(cfg.checkpoint_dir);
      pf.normalizer.save(paths.normalizer);
      result.model.save(paths.vae);
      vae::write_training_log(paths.vae_log, result.log);
      out << "trained VAE on " << pf.normalized.size() << " vectors; best epoch " << result.best_epoch
          << ", val loss " << result.best_val_loss << '\n';
    } else if (*analyze) {
      const auto ds = load_data(cfg.dataset_dir);
      const auto models = load_models(cfg.checkpoint_dir);
      std::vector<FeatureVector> normalized;
      for (const auto& f : ds.features) {
        const auto raw = select_features(f, models.normalizer.names());
        normalized.push_back(models.normalizer.normalize(raw));
      }
      const auto a = analyze_latent(models.vae, normalized, cfg.seed);
      const auto dest = out_path ? std::filesystem::path(*out_path) : cfg.checkpoint_dir / "analysis.json";
      write_text(dest, to_json(a, models.normalizer.names()).dump(2) + "\n");
      out << "components for 90%: " << a.components_90 << ", distance r: " << a.distance_r
          << ", smoothness: " << a.smoothness << '\n';
    } else if (*train_diff) {
      const auto ds = load_data(cfg.dataset_dir);
      const auto pf = prepare_features(ds, cfg.features);
      auto dc = cfg.diffusion;
      dc.cond_dim = cfg.features.size();
      dc.init_seed = cfg.seed;
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = diffusion::train_diffusion(
          diffusion_images(ds, dc.image_size), diffusion_conditions(pf), dc, cfg.diffusion_train,
          [&](const diffusion::DiffusionLogRow& r) {
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            err << "iteration " << r.iteration << " loss " << r.loss << " (" << s << " s)\n";
          });
      std::filesystem::create_directories(cfg.checkpoint_dir);
      result.model.save(paths.diffusion);
      diffusion::write_loss_log(paths.diffusion_log, result.log);
      out << "trained denoiser for " << cfg.diffusion_train.iterations << " iterations\n";
    } else if (*edit) {
      const auto models = load_models(cfg.checkpoint_dir);
      const auto& names = models.normalizer.names();
      FeatureVector origin{{}, FeatureSpace::raw};
      if (input) {
        const Image img = read_pgm(*input);
        if (img.width == 0 || geometry::kFrame % img.width != 0 || img.width != img.height)
          throw ConfigError("input must be a square image whose side divides 64");
        const auto m = measure(img, names, static_cast<double>(geometry::kFrame) / static_cast<double>(img.width));
        if (!m) throw ConfigError("input image does not contain exactly one object");
        origin = *m;
      } else if (sample_id) {
        const auto ds = load_data(cfg.dataset_dir);
        if (*sample_id >= ds.features.size()) throw ConfigError("sample id out of range");
        origin = select_features(ds.features[*sample_id], names);
      } else if (!raw_features.empty()) {
        if (raw_features.size() != names.size()) throw ConfigError("--features needs one value per model feature");
        origin.values = raw_features;
      } else {
        throw ConfigError("edit needs --input, --sample or --features");
      }
      auto options = cfg.edit;
      if (options_json) {
        try {
          options = editor::options_from_json(nlohmann::json::parse(*options_json), options);
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(std::string("--options is not valid JSON: ") + e.what());
        }
      }
      const auto spec = editor::make_spec(models.normalizer, origin, feature, target, options);
      const auto result = editor::edit(models.vae, spec);
      const auto j = editor::to_json(result, spec, &models.normalizer, max_points);
      if (out_path)
        write_text(*out_path, j.dump(2) + "\n");
      else
        out << j.dump(2) << '\n';
      if (image_out) {
        const FeatureVector y_new = models.normalizer.denormalize(result.y_new);
        Image img;
        if (generator == "diffusion") {
          require_file(paths.diffusion, "diffusion checkpoint");
          img = diffusion::sample(diffusion::Denoiser::load(paths.diffusion), result.y_new, cfg.seed);
        } else {
          img = oracle_render(y_new, names);
        }
        write_pgm(*image_out, img);
      }
    } else if (*eval) {
      const auto ds = load_data(cfg.dataset_dir);
      const auto models = load_models(cfg.checkpoint_dir);
      const auto pf = prepare_features(ds, models.normalizer.names());
      std::optional<diffusion::Denoiser> denoiser;
      if (cfg.eval_mode == "image") {
        require_file(paths.diffusion, "diffusion checkpoint");
        denoiser = diffusion::Denoiser::load(paths.diffusion);
      }
      EvalRequest req;
      req.mode = cfg.eval_mode;
      req.edited = eval_features == "all" ? std::vector<std::string>{"area", "perimeter", "intensity"}
                                          : split_list(eval_features);
      for (const auto& f : req.edited) feature_index(models.normalizer.names(), f);
      req.samples = cfg.eval_samples;
      req.grid = cfg.eval_grid;
      req.baseline = baseline;
      req.seed = cfg.seed;
      const auto outputs = run_eval(ds, pf, models.vae, denoiser ? &*denoiser : nullptr, cfg.edit, req);
      const auto dir = out_path ? std::filesystem::path(*out_path) : cfg.report_dir;
      evaluation::render_report(outputs.report, dir);
      for (const auto& c : outputs.report.delta_delta)
        out << c.edited << " -> " << c.measured << ' ' << c.metric << " = "
            << (c.value ? std::to_string(*c.value) : std::string("n/a")) << '\n';
      if (outputs.report.ssr) out << "ssr = " << *outputs.report.ssr << "%\n";
      out << "report written to " << dir.string() << '\n';
    } else if (*serve_cmd) {
      serve(cfg, host, port);
    }
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const TrainingFailure& e) {
    err << "training failed: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ContractViolation& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DegenerateFeature& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UndefinedR2& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace mad::service
