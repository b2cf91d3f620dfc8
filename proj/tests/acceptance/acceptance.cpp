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

// Acceptance runner: one PASS/FAIL line per criterion. A1-A5 and A9 drive the
// `mad` command line end to end; A6-A8 call the library directly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "../support/random_graph.hpp"
#include "CLI11.hpp"
#include "mad/numerics/adam.hpp"
#include "mad/numerics/gradcheck.hpp"
#include "mad/service/cli.hpp"
#include "mad/service/config.hpp"
#include "mad/service/pipeline.hpp"

using namespace mad;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string show(std::optional<double> v) { return v ? fmt("%.4f", *v) : std::string("undefined"); }

void run_mad(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"mad"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = service::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) throw std::runtime_error("mad " + args.front() + " exited " + std::to_string(code) + ": " + err.str());
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return out;
}

evaluation::EvalReport read_report(const fs::path& dir) {
  return evaluation::report_from_json(nlohmann::json::parse(slurp(dir / "report.json")));
}

std::optional<double> cell(const evaluation::EvalReport& r, const std::string& e, const std::string& m) {
  const auto* c = evaluation::find_cell(r, e, m);
  if (!c) throw std::runtime_error("report has no cell " + e + " -> " + m);
  return c->value;
}

bool at_least(std::optional<double> v, double t) { return v && *v >= t; }
bool at_most(std::optional<double> v, double t) { return v && *v <= t; }

// Shared state for the pipeline criteria: one dataset, one VAE, one eval.
// `prepare` builds it and records timings; later runs reuse it from disk.
struct Pipeline {
  fs::path root;
  std::uint64_t seed = 7;
  double train_seconds = 0, eval_seconds = 0;
  bool ready = false;

  fs::path data() const { return root / "data"; }
  fs::path ckpt() const { return root / "checkpoints"; }
  fs::path timings() const { return root / "timings.json"; }

  void prepare() {
    fs::remove_all(root);
    auto t0 = std::chrono::steady_clock::now();
    run_mad({"synth", "--n", "4000", "--seed", std::to_string(seed), "--out", data().string()});
    run_mad({"train-vae", "--data", data().string(), "--out", ckpt().string(), "--seed", std::to_string(seed)});
    train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    t0 = std::chrono::steady_clock::now();
    run_mad({"eval", "--mode", "decoded", "--feature", "all", "--samples", "300", "--data", data().string(),
             "--ckpt", ckpt().string(), "--seed", std::to_string(seed), "--out", (root / "report").string()});
    eval_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream(timings()) << nlohmann::json{{"train_seconds", train_seconds}, {"eval_seconds", eval_seconds}};
    ready = true;
  }
  void ensure() {
    if (ready) return;
    if (!fs::exists(timings())) return prepare();
    const auto j = nlohmann::json::parse(slurp(timings()));
    train_seconds = j.at("train_seconds").get<double>();
    eval_seconds = j.at("eval_seconds").get<double>();
    ready = true;
  }
};

Verdict a1(Pipeline& p) {
  p.ensure();
  const auto r = read_report(p.root / "report");
  const auto area = cell(r, "area", "area"), perim = cell(r, "area", "perimeter"),
             inten = cell(r, "area", "intensity");
  // Synthesis, VAE training and the full three-feature eval.
  const double seconds = p.train_seconds + p.eval_seconds;
  const bool ok = at_least(area, 0.97) && at_least(perim, 0.95) && at_most(inten, 0.3) && seconds <= 600;
  return {ok, "area R2 " + show(area) + " (>=0.97), perimeter R2 " + show(perim) + " (>=0.95), intensity MAE " +
                  show(inten) + " (<=0.3), runtime " + fmt("%.0f s", seconds) + " (<=600)"};
}

Verdict a2(Pipeline& p) {
  p.ensure();
  const auto r = read_report(p.root / "report");
  const auto perim = cell(r, "perimeter", "perimeter"), area = cell(r, "perimeter", "area"),
             inten = cell(r, "perimeter", "intensity");
  const bool ok = at_least(perim, 0.95) && at_least(area, 0.93) && at_most(inten, 0.3);
  return {ok, "perimeter R2 " + show(perim) + " (>=0.95), area R2 " + show(area) + " (>=0.93), intensity MAE " +
                  show(inten) + " (<=0.3)"};
}

Verdict a3(Pipeline& p) {
  p.ensure();
  const auto r = read_report(p.root / "report");
  const auto inten = cell(r, "intensity", "intensity"), area = cell(r, "intensity", "area"),
             perim = cell(r, "intensity", "perimeter");
  const bool ok = at_least(inten, 0.97) && at_most(area, 0.15) && at_most(perim, 0.15);
  return {ok, "intensity R2 " + show(inten) + " (>=0.97), area MAE " + show(area) + " (<=0.15), perimeter MAE " +
                  show(perim) + " (<=0.15)"};
}

Verdict a4(Pipeline& p) {
  p.ensure();
  run_mad({"eval", "--mode", "decoded", "--feature", "area", "--samples", "300", "--baseline", "--data",
           p.data().string(), "--ckpt", p.ckpt().string(), "--seed", std::to_string(p.seed), "--out",
           (p.root / "baseline").string()});
  const auto base = cell(read_report(p.root / "baseline"), "area", "perimeter");
  const auto mad = cell(read_report(p.root / "report"), "area", "perimeter");
  const bool ok = at_most(base, 0.0) && at_least(mad, 0.95);
  return {ok, "baseline perimeter R2 " + show(base) + " (<=0), latent editing perimeter R2 " + show(mad) + " (>=0.95)"};
}

Verdict a5(Pipeline& p) {
  p.ensure();
  const auto out = p.root / "analysis.json";
  run_mad({"analyze-vae", "--data", p.data().string(), "--ckpt", p.ckpt().string(), "--seed",
           std::to_string(p.seed), "--out", out.string()});
  const auto j = nlohmann::json::parse(slurp(out));
  const double smooth = j.at("interpolation_smoothness").get<double>();
  const double r = j.at("distance_preservation_r").get<double>();
  const auto comps = j.at("components_for_90_percent").get<std::size_t>();
  const bool ok = smooth < 0.01 && r > 0.7 && comps <= 3;
  return {ok, "smoothness " + fmt("%.2e", smooth) + " (<0.01), distance r " + fmt("%.4f", r) +
                  " (>0.7), components for 90% " + std::to_string(comps) + " (<=3)"};
}

Verdict a6() {
  Rng rng(2024);
  double worst = 0;
  int failed = 0;
  for (int i = 0; i < 100; ++i) {
    auto c = testing::make_random_graph(rng);
    const double e = finite_diff_check(c.build, c.params, 1e-5);
    worst = std::max(worst, e);
    failed += e >= 1e-4;
  }

  double kl_err = 0;
  for (int trial = 0; trial < 5; ++trial) {
    vae::PosteriorParams q;
    for (int k = 0; k < 4; ++k) {
      q.mu.push_back(rng.normal());
      q.log_var.push_back(rng.uniform(-1.0, 1.0));
    }
    // Antithetic pairs (e, -e): 10^5 samples in total.
    double mc = 0;
    const int n = 100000;
    for (int s = 0; s < n / 2; ++s)
      for (int k = 0; k < 4; ++k) {
        const double e = rng.normal();
        for (double sign : {1.0, -1.0}) {
          const double z = q.mu[k] + std::exp(0.5 * q.log_var[k]) * sign * e;
          mc += -0.5 * q.log_var[k] - 0.5 * e * e + 0.5 * z * z;
        }
      }
    mc /= n;
    const double kl = vae::kl_divergence(q);
    kl_err = std::max(kl_err, std::abs(mc - kl) / kl);
  }

  std::vector<Tensor<double>> param{Tensor<double>::scalar(0.0)};
  AdamState<double> s;
  s.config.lr = 0.1;
  adam_step(param, {Tensor<double>::scalar(1.0)}, s);
  const double adam = param[0][0];

  const bool ok = failed == 0 && kl_err < 0.01 && std::abs(adam + 0.1) < 1e-6;
  return {ok, "gradcheck worst " + fmt("%.2e", worst) + " over 100 graphs (<1e-4), KL vs MC " +
                  fmt("%.3f%%", 100 * kl_err) + " (<1%), Adam step " + fmt("%.12f", adam) + " (-0.1)"};
}

Verdict a7() {
  const auto ds = geometry::build_dataset(4000, 7);
  std::vector<double> ta, ea, tp, ep;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto seg = morphometry::segment_single(ds.images[i]);
    if (!seg.accepted) continue;
    const auto f = morphometry::extract_features(ds.images[i], seg.mask);
    ta.push_back(ds.features[i][0]);
    ea.push_back(f[0]);
    tp.push_back(ds.features[i][1]);
    ep.push_back(f[1]);
  }
  const double ssr = evaluation::ssr(ds.images).percent;
  const double ra = evaluation::r2(ta, ea), rp = evaluation::r2(tp, ep);
  const bool ok = ra > 0.999 && rp > 0.99 && ssr == 100.0;
  return {ok, "area R2 " + fmt("%.5f", ra) + " (>0.999), perimeter R2 " + fmt("%.5f", rp) + " (>0.99), SSR " +
                  fmt("%.2f%%", ssr) + " (=100%)"};
}

Verdict a8(const fs::path& root, std::size_t iterations) {
  service::RunConfig cfg;
  const auto ds = geometry::build_dataset(4000, cfg.seed);
  const auto pf = service::prepare_features(ds, cfg.features);
  auto dc = cfg.diffusion;
  dc.cond_dim = cfg.features.size();
  dc.init_seed = cfg.seed;
  auto tc = cfg.diffusion_train;
  tc.iterations = iterations;
  tc.seed = cfg.seed;
  const auto x0 = service::diffusion_images(ds, dc.image_size);
  const auto t0 = std::chrono::steady_clock::now();
  const auto trained = diffusion::train_diffusion(x0, service::diffusion_conditions(pf), dc, tc, {});
  const double train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fs::create_directories(root);
  trained.model.save(root / "diffusion.ckpt");
  diffusion::write_loss_log(root / "diffusion_log.csv", trained.log);

  // 100 conditions from distinct dataset vectors.
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(pf.kept.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < 100; ++i)
    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                                        static_cast<std::int64_t>(order.size() - 1)))]);
  order.resize(100);
  std::vector<FeatureVector> conds;
  std::vector<std::uint64_t> seeds;
  for (std::size_t i : order) {
    conds.push_back(pf.normalized[i]);
    seeds.push_back(cfg.seed * 1000003 + seeds.size());
  }
  const auto images = diffusion::sample(trained.model, service::condition_rows(conds), seeds);
  const auto s = evaluation::ssr(images);
  std::vector<double> want, got;
  const std::size_t ai = feature_index(cfg.features, "area");
  const double scale = static_cast<double>(geometry::kFrame) / static_cast<double>(dc.image_size);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!s.detected[i]) continue;
    const auto m = service::measure(images[i], cfg.features, scale);
    if (!m) continue;
    want.push_back(pf.raw[pf.kept[order[i]]][ai]);
    got.push_back((*m)[ai]);
  }
  const std::optional<double> area_r2 = want.size() > 2 ? std::optional(evaluation::r2(want, got)) : std::nullopt;
  for (std::size_t i = 0; i < std::min<std::size_t>(images.size(), 16); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%02zu.pgm", i);
    write_pgm(root / name, images[i]);
  }

  // Forward-process variance law on training images.
  const auto sched = diffusion::make_schedule(dc.steps, dc.beta_min, dc.beta_max);
  double worst = 0;
  Tensor<float> batch(Shape{64, 1, dc.image_size, dc.image_size});
  std::copy_n(x0.data(), batch.size(), batch.data());
  double m0 = 0, v0 = 0;
  for (float v : batch.vec()) m0 += v;
  m0 /= static_cast<double>(batch.size());
  for (float v : batch.vec()) v0 += (v - m0) * (v - m0);
  v0 /= static_cast<double>(batch.size());
  for (std::size_t t : {20u, 100u, 199u}) {
    const double ab = sched.alpha_bar[t];
    double s1 = 0, s2 = 0, total = 0;
    Tensor<float> eps(batch.shape());
    for (int d = 0; d < 50; ++d) {
      for (auto& v : eps.vec()) v = static_cast<float>(rng.normal());
      const auto xt = diffusion::forward_sample(batch, t, eps, sched);
      for (float v : xt.vec()) s1 += v, s2 += static_cast<double>(v) * v, total += 1;
    }
    const double var = s2 / total - (s1 / total) * (s1 / total);
    const double expected = ab * v0 + (1 - ab);
    worst = std::max(worst, std::abs(var - expected) / expected);
  }

  const double total_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool ok =
      iterations == 20000 && s.percent >= 90 && at_least(area_r2, 0.8) && worst < 0.05 && total_s <= 7200;
  return {ok, std::to_string(iterations) + " iterations (train " + fmt("%.0f s", train_s) + ", total " +
                  fmt("%.0f s", total_s) + " <= 7200 s), SSR " +
                  fmt("%.1f%%", s.percent) + " (>=90%), area R2 " + show(area_r2) + " (>=0.8) over " +
                  std::to_string(want.size()) + " measured samples, variance law error " +
                  fmt("%.2f%%", 100 * worst) + " (<5%)"};
}

Verdict a9(const fs::path& root) {
  const auto a = root / "run_a", b = root / "run_b";
  for (const auto& d : {a, b}) {
    fs::remove_all(d);
    run_mad({"synth", "--n", "4000", "--seed", "7", "--out", (d / "data").string()});
    run_mad({"train-vae", "--data", (d / "data").string(), "--out", (d / "ckpt").string(), "--seed", "7"});
    run_mad({"edit", "--ckpt", (d / "ckpt").string(), "--feature", "area", "--target", "450", "--input",
             (d / "data" / "images" / "000003.pgm").string(), "--seed", "7", "--out", (d / "edit.json").string(),
             "--image", (d / "edit.pgm").string()});
  }
  const auto ta = tree(a), tb = tree(b);
  std::size_t differ = ta.size() == tb.size() ? 0 : 1;
  for (const auto& [name, bytes] : ta) {
    const auto it = tb.find(name);
    differ += it == tb.end() || it->second != bytes;
  }
  return {differ == 0, std::to_string(ta.size()) + " files compared, " + std::to_string(differ) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria A1-A9"};
  std::vector<std::string> criteria{"A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9"};
  fs::path workdir = fs::temp_directory_path() / "mad_acceptance";
  std::optional<fs::path> results;
  std::size_t iterations = 20000;
  bool prepare = false;
  app.add_option("--criteria", criteria, "criteria to run")->delimiter(',');
  app.add_option("--workdir", workdir, "scratch directory for datasets, checkpoints and reports");
  app.add_option("--diffusion-iterations", iterations, "A8 training length (the criterion requires 20000)");
  app.add_option("--results", results, "also append the verdict lines to this file");
  app.add_flag("--prepare", prepare, "rebuild the shared dataset, VAE and report used by A1-A5, then exit");
  CLI11_PARSE(app, argc, argv);

  Pipeline pipeline;
  pipeline.root = workdir / "pipeline";
  if (prepare) {
    try {
      pipeline.prepare();
    } catch (const std::exception& e) {
      std::fprintf(stderr, "prepare failed: %s\n", e.what());
      return 1;
    }
    std::printf("pipeline prepared: train %.1f s, eval %.1f s\n", pipeline.train_seconds, pipeline.eval_seconds);
    return 0;
  }
  const std::map<std::string, std::function<Verdict()>> table{
      {"A1", [&] { return a1(pipeline); }},
      {"A2", [&] { return a2(pipeline); }},
      {"A3", [&] { return a3(pipeline); }},
      {"A4", [&] { return a4(pipeline); }},
      {"A5", [&] { return a5(pipeline); }},
      {"A6", [] { return a6(); }},
      {"A7", [] { return a7(); }},
      {"A8", [&] { return a8(workdir / "diffusion", iterations); }},
      {"A9", [&] { return a9(workdir / "determinism"); }},
  };

  int failures = 0;
  for (const auto& id : criteria) {
    const auto it = table.find(id);
    if (it == table.end()) {
      std::fprintf(stderr, "unknown criterion %s\n", id.c_str());
      return 2;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = it->second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    char line[1024];
    std::snprintf(line, sizeof line, "%s %s  %s  [%.1f s]\n", id.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str(),
                  s);
    std::fputs(line, stdout);
    std::fflush(stdout);
    if (results) std::ofstream(*results, std::ios::app) << line;
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
