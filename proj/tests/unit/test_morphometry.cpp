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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mad/geometry/ellipse.hpp"
#include "mad/morphometry/morphometry.hpp"

using namespace mad;
using namespace mad::morphometry;

namespace {

Image blank() { return Image(64, 64); }

void fill_rect(Image& img, std::size_t x0, std::size_t y0, std::size_t w, std::size_t h, std::uint8_t v) {
  for (std::size_t y = y0; y < y0 + h; ++y)
    for (std::size_t x = x0; x < x0 + w; ++x) img.at(x, y) = v;
}

// Test-local rasterizer that accepts any angle (render() only takes [0, pi)).
Image raster_any_angle(double b, double theta, std::uint8_t v) {
  Image img(64, 64);
  const double ct = std::cos(theta), st = std::sin(theta);
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const double dx = x + 0.5 - 32.0, dy = y + 0.5 - 32.0;
      const double u = dx * ct + dy * st, w = -dx * st + dy * ct;
      if ((u / (2 * b)) * (u / (2 * b)) + (w / b) * (w / b) <= 1.0) img.at(x, y) = v;
    }
  return img;
}

double angle_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), std::numbers::pi);
  return std::min(d, std::numbers::pi - d);
}

}  // namespace

TEST_CASE("segmentation counts 8-connected regions") {
  auto s = segment_single(blank());
  CHECK(s.mask.region_count == 0);
  CHECK_FALSE(s.accepted);

  Image two = blank();
  fill_rect(two, 5, 5, 5, 5, 200);
  fill_rect(two, 30, 30, 5, 5, 200);
  s = segment_single(two);
  CHECK(s.mask.region_count == 2);
  CHECK_FALSE(s.accepted);

  Image diagonal = blank();
  diagonal.at(10, 10) = 200;
  diagonal.at(11, 11) = 200;
  CHECK(segment_single(diagonal).mask.region_count == 1);

  Image dim = blank();
  fill_rect(dim, 5, 5, 5, 5, 10);  // not above threshold
  CHECK(segment_single(dim).mask.region_count == 0);
}

TEST_CASE("every rendered ellipse segments to one region") {
  Rng rng(19);
  for (int i = 0; i < 300; ++i) CHECK(segment_single(geometry::render(geometry::sample_params(rng))).accepted);
}

TEST_CASE("filled square features") {
  Image img = blank();
  fill_rect(img, 20, 20, 10, 10, 100);
  const auto seg = segment_single(img);
  const auto f = extract_features(img, seg.mask);
  CHECK(f[geo::kArea] == 100.0);
  CHECK(f[geo::kIntensity] == 100.0);
  CHECK(f[geo::kEccentricity] < 0.05);
}

TEST_CASE("rendered ellipse features match the analytic oracle") {
  const geometry::EllipseParams p{10.0, 0.0, 150};
  const Image img = geometry::render(p);
  const auto f = extract_features(img, segment_single(img).mask);
  CHECK(std::abs(f[geo::kArea] - 200.0 * std::numbers::pi) / (200.0 * std::numbers::pi) < 0.03);
  CHECK(std::abs(f[geo::kEccentricity] - std::sqrt(3.0) / 2.0) < 0.03);
  CHECK(angle_distance(f[geo::kOrientation], 0.0) < 0.05);
  CHECK(f[geo::kIntensity] == 150.0);
}

TEST_CASE("extracted features within 3% of analytic for b >= 8") {
  Rng rng(23);
  for (int i = 0; i < 200; ++i) {
    auto p = geometry::sample_params(rng);
    p.semi_minor = 8.0 + 6.0 * rng.uniform();
    const auto ana = geometry::analytic_features(p);
    const Image img = geometry::render(p);
    const auto f = extract_features(img, segment_single(img).mask);
    CHECK(std::abs(f[geo::kArea] - ana[geo::kArea]) / ana[geo::kArea] < 0.03);
    CHECK(std::abs(f[geo::kPerimeter] - ana[geo::kPerimeter]) / ana[geo::kPerimeter] < 0.03);
  }
}

TEST_CASE("orientation is axial: theta and theta + pi agree") {
  for (double theta : {0.2, 1.0, 2.5}) {
    const Image a = raster_any_angle(9.0, theta, 120), b = raster_any_angle(9.0, theta + std::numbers::pi, 120);
    const auto fa = extract_features(a, segment_single(a).mask);
    const auto fb = extract_features(b, segment_single(b).mask);
    CHECK(fa[geo::kOrientation] == doctest::Approx(fb[geo::kOrientation]).epsilon(1e-9));
    CHECK(fa[geo::kOrientation] >= 0.0);
    CHECK(fa[geo::kOrientation] < std::numbers::pi);
    CHECK(angle_distance(fa[geo::kOrientation], theta) < 0.05);
  }
}

TEST_CASE("Crofton perimeter of rectangles equals the intercept-count closed form") {
  // Four-direction sampling of the width function undercounts straight edges:
  // pi/4 * (w + h + 2(w + h - 1)/sqrt(2)) against the true 2(w + h).
  for (auto [w, h] : {std::pair<std::size_t, std::size_t>{10, 10}, {20, 10}, {30, 40}, {12, 25}}) {
    Image img = blank();
    fill_rect(img, 5, 5, w, h, 200);
    const double p = crofton_perimeter(segment_single(img).mask);
    const double expected = std::numbers::pi / 4.0 * (w + h + 2.0 * (w + h - 1.0) / std::numbers::sqrt2);
    CHECK(p == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(p - 2.0 * (w + h)) / (2.0 * (w + h)) < 0.08);
  }
}

TEST_CASE("features are translation invariant") {
  const Image img = geometry::render({7.0, 0.7, 90});
  Image shifted = blank();
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x)
      if (img.at(x, y)) shifted.at(x + 3, y - 2) = img.at(x, y);
  const auto a = extract_features(img, segment_single(img).mask);
  const auto b = extract_features(shifted, segment_single(shifted).mask);
  for (std::size_t j = 0; j < geo::kCount; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12));
}

TEST_CASE("multi-region or empty masks are rejected by extraction") {
  Image two = blank();
  fill_rect(two, 5, 5, 5, 5, 200);
  fill_rect(two, 30, 30, 5, 5, 200);
  CHECK_THROWS_AS(extract_features(two, segment_single(two).mask), ContractViolation);
  CHECK_THROWS_AS(extract_features(blank(), segment_single(blank()).mask), ContractViolation);
}

TEST_CASE("normalizer keeps data already inside its bounds") {
  std::vector<FeatureVector> data;
  for (int i = 0; i < 300; ++i) data.push_back({{double(i % 3), double((i / 3) % 2)}, FeatureSpace::raw});
  const auto fit = fit_normalizer(data, {"a", "b"});
  CHECK(fit.kept_indices.size() == 300);
}

TEST_CASE("normalizer trims about 5% of a standard normal") {
  Rng rng(99);
  std::vector<FeatureVector> data;
  for (int i = 0; i < 1000; ++i) data.push_back({{rng.normal()}, FeatureSpace::raw});
  const auto fit = fit_normalizer(data, {"x"});
  CHECK(std::abs(static_cast<double>(fit.kept_indices.size()) - 950.0) <= 0.03 * 950.0);
}

TEST_CASE("normalized survivors are z-scored") {
  Rng rng(5);
  std::vector<FeatureVector> data;
  for (int i = 0; i < 2000; ++i)
    data.push_back({{3.0 + 2.0 * rng.normal(), -100.0 + 10.0 * rng.uniform(), rng.normal() * rng.normal()},
                    FeatureSpace::raw});
  const auto fit = fit_normalizer(data, {"a", "b", "c"});
  std::vector<double> mean(3, 0), sq(3, 0);
  for (std::size_t i : fit.kept_indices) {
    const auto z = fit.normalizer.normalize(data[i]);
    for (std::size_t j = 0; j < 3; ++j) mean[j] += z[j], sq[j] += z[j] * z[j];
  }
  const double n = static_cast<double>(fit.kept_indices.size());
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(mean[j] / n) < 0.05);
    CHECK(std::abs(std::sqrt(sq[j] / n - (mean[j] / n) * (mean[j] / n)) - 1.0) < 0.05);
  }
}

TEST_CASE("zero-variance feature is reported by name") {
  const auto ds = geometry::build_dataset(200, 1);
  const std::vector<std::string> names(geo::kNames.begin(), geo::kNames.end());
  try {
    fit_normalizer(ds.features, names);
    FAIL("expected DegenerateFeature");
  } catch (const DegenerateFeature& e) {
    CHECK(e.feature() == "eccentricity");
  }
  CHECK_THROWS_AS(fit_normalizer(std::vector<FeatureVector>(50, FeatureVector{{1.0}, FeatureSpace::raw}), {"x"}),
                  ContractViolation);
}

TEST_CASE("normalize and denormalize are inverse affine maps") {
  Rng rng(12);
  std::vector<FeatureVector> data;
  for (int i = 0; i < 500; ++i) data.push_back({{rng.normal() * 40 + 300, rng.uniform() * 3}, FeatureSpace::raw});
  const auto fit = fit_normalizer(data, {"area", "orientation"});
  const auto& nz = fit.normalizer;

  FeatureVector mean{nz.means(), FeatureSpace::raw};
  for (double v : nz.normalize(mean).values) CHECK(std::abs(v) < 1e-12);

  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    FeatureVector y{{rng.normal() * 100, rng.normal() * 5}, FeatureSpace::raw};
    const auto back = nz.denormalize(nz.normalize(y));
    for (std::size_t j = 0; j < 2; ++j) worst = std::max(worst, std::abs(back[j] - y[j]));
    FeatureVector y2 = y;
    y2[0] += 1.0;
    CHECK(nz.normalize(y2)[0] > nz.normalize(y)[0]);
  }
  CHECK(worst < 1e-9);

  CHECK_THROWS_AS(Normalizer().normalize(mean), ContractViolation);
  CHECK_THROWS_AS(nz.denormalize(mean), ContractViolation);  // raw vector passed as normalized
  const auto restored = Normalizer::from_json(nz.to_json());
  CHECK(restored.means() == nz.means());
  CHECK(restored.stds() == nz.stds());
  CHECK(restored.upper() == nz.upper());
}
