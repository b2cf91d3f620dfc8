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

#include "mad/geometry/ellipse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace mad::geometry {

namespace {

constexpr double kPi = std::numbers::pi;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

double ramanujan_perimeter(double a, double b) {
  const double h = std::pow((a - b) / (a + b), 2);
  return kPi * (a + b) * (1.0 + 3.0 * h / (10.0 + std::sqrt(4.0 - 3.0 * h)));
}

double manifold_ratio() { return ramanujan_perimeter(2.0, 1.0) / std::sqrt(2.0 * kPi); }

double wrap_orientation(double theta) {
  double t = std::fmod(theta, kPi);
  if (t < 0) t += kPi;
  if (t >= kPi) t -= kPi;
  return t;
}

void validate(const EllipseParams& p) {
  MAD_REQUIRE(std::isfinite(p.semi_minor) && p.semi_minor >= kMinSemiMinor && p.semi_minor <= kMaxSemiMinor,
              "ellipse semi-minor axis outside [4, 14] would not fit the frame");
  MAD_REQUIRE(std::isfinite(p.theta) && p.theta >= 0.0 && p.theta < kPi, "ellipse orientation outside [0, pi)");
  MAD_REQUIRE(p.intensity >= kMinIntensity && p.intensity <= kMaxIntensity, "ellipse intensity outside [40, 220]");
}

EllipseParams sample_params(Rng& rng) {
  EllipseParams p;
  p.semi_minor = rng.uniform(kMinSemiMinor, kMaxSemiMinor);
  p.theta = rng.uniform(0.0, kPi);
  p.intensity = static_cast<int>(rng.uniform_int(kMinIntensity, kMaxIntensity));
  return p;
}

Image render(const EllipseParams& p) {
  validate(p);
  Image img(kFrame, kFrame);
  const double c = static_cast<double>(kFrame) / 2.0;
  const double a = p.semi_major(), b = p.semi_minor;
  const double ct = std::cos(p.theta), st = std::sin(p.theta);
  for (std::size_t y = 0; y < kFrame; ++y) {
    const double dy = static_cast<double>(y) + 0.5 - c;
    for (std::size_t x = 0; x < kFrame; ++x) {
      const double dx = static_cast<double>(x) + 0.5 - c;
      const double u = dx * ct + dy * st;
      const double v = -dx * st + dy * ct;
      if ((u / a) * (u / a) + (v / b) * (v / b) <= 1.0) img.at(x, y) = static_cast<std::uint8_t>(p.intensity);
    }
  }
  return img;
}

FeatureVector analytic_features(const EllipseParams& p) {
  const double a = p.semi_major(), b = p.semi_minor;
  FeatureVector f{std::vector<double>(geo::kCount), FeatureSpace::raw};
  f[geo::kArea] = kPi * a * b;
  f[geo::kPerimeter] = ramanujan_perimeter(a, b);
  f[geo::kEccentricity] = std::sqrt(1.0 - (b / a) * (b / a));
  f[geo::kOrientation] = p.theta;
  f[geo::kIntensity] = static_cast<double>(p.intensity);
  return f;
}

EllipseParams nearest_feasible_params(const FeatureVector& y) {
  MAD_REQUIRE(y.size() == geo::kCount, "nearest_feasible_params: expected a 5-feature vector");
  MAD_REQUIRE(y.space == FeatureSpace::raw, "nearest_feasible_params: expected raw features");
  for (double v : y.values) MAD_REQUIRE(std::isfinite(v), "nearest_feasible_params: non-finite feature");
  EllipseParams p;
  const double area = std::max(y[geo::kArea], 0.0);
  p.semi_minor = std::clamp(std::sqrt(area / (2.0 * kPi)), kMinSemiMinor, kMaxSemiMinor);
  p.theta = wrap_orientation(y[geo::kOrientation]);
  p.intensity = static_cast<int>(
      std::clamp(std::round(y[geo::kIntensity]), static_cast<double>(kMinIntensity), static_cast<double>(kMaxIntensity)));
  return p;
}

EllipseParams nearest_feasible_params(const FeatureVector& raw, const std::vector<std::string>& names) {
  MAD_REQUIRE(raw.size() == names.size(), "nearest_feasible_params: names do not match vector");
  FeatureVector canonical{std::vector<double>(geo::kCount, 0.0), raw.space};
  canonical[geo::kArea] = raw[feature_index(names, "area")];
  canonical[geo::kOrientation] = raw[feature_index(names, "orientation")];
  canonical[geo::kIntensity] = raw[feature_index(names, "intensity")];
  return nearest_feasible_params(canonical);
}

GeoDataset build_dataset(std::size_t n, std::uint64_t seed) {
  MAD_REQUIRE(n >= 1, "build_dataset: n must be >= 1");
  GeoDataset ds;
  ds.seed = seed;
  Rng rng(seed);
  ds.params.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ds.params.push_back(sample_params(rng));
  ds.images.resize(n);
  ds.features.resize(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    ds.images[static_cast<std::size_t>(i)] = render(ds.params[static_cast<std::size_t>(i)]);
    ds.features[static_cast<std::size_t>(i)] = analytic_features(ds.params[static_cast<std::size_t>(i)]);
  }
  return ds;
}

void save_dataset(const GeoDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  for (std::size_t i = 0; i < ds.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", i);
    write_pgm(dir / "images" / name, ds.images[i]);
  }
  std::ofstream feats(dir / "features.csv", std::ios::binary);
  feats << "id,area,perimeter,eccentricity,orientation,intensity\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    feats << i;
    for (double v : ds.features[i].values) feats << ',' << fmt_double(v);
    feats << '\n';
  }
  std::ofstream params(dir / "params.csv", std::ios::binary);
  params << "id,b,theta,intensity\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    params << i << ',' << fmt_double(ds.params[i].semi_minor) << ',' << fmt_double(ds.params[i].theta) << ','
           << ds.params[i].intensity << '\n';
  nlohmann::ordered_json meta;
  meta["seed"] = ds.seed;
  meta["count"] = ds.size();
  meta["frame"] = kFrame;
  meta["semi_minor_range"] = {kMinSemiMinor, kMaxSemiMinor};
  meta["intensity_range"] = {kMinIntensity, kMaxIntensity};
  meta["aspect_ratio"] = 2.0;
  std::ofstream(dir / "meta.json", std::ios::binary) << meta.dump(2) << '\n';
}

GeoDataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw ConfigError("dataset meta.json missing in " + dir.string());
  const auto meta = nlohmann::json::parse(mf);
  GeoDataset ds;
  ds.seed = meta.at("seed").get<std::uint64_t>();
  const auto n = meta.at("count").get<std::size_t>();

  const auto prow = read_csv(dir / "params.csv");
  const auto frow = read_csv(dir / "features.csv");
  if (prow.size() != n + 1 || frow.size() != n + 1) throw ConfigError("dataset CSV row count mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pr = prow[i + 1];
    const auto& fr = frow[i + 1];
    if (pr.size() != 4 || fr.size() != 6) throw ConfigError("dataset CSV has wrong column count");
    ds.params.push_back({std::stod(pr[1]), std::stod(pr[2]), std::stoi(pr[3])});
    FeatureVector f{{}, FeatureSpace::raw};
    for (std::size_t c = 1; c < 6; ++c) f.values.push_back(std::stod(fr[c]));
    ds.features.push_back(std::move(f));
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.pgm", i);
    ds.images.push_back(read_pgm(dir / "images" / name));
  }
  return ds;
}

}  // namespace mad::geometry
