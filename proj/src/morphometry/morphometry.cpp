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

#include "mad/morphometry/morphometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace mad::morphometry {

std::size_t Mask::area() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

std::vector<std::uint32_t> label_components(const Mask& mask, std::size_t* count) {
  const std::size_t W = mask.width, H = mask.height;
  std::vector<std::uint32_t> labels(W * H, 0);
  std::vector<std::size_t> stack;
  std::uint32_t next = 0;
  for (std::size_t start = 0; start < W * H; ++start) {
    if (!mask.bits[start] || labels[start]) continue;
    labels[start] = ++next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const auto px = static_cast<std::ptrdiff_t>(p % W), py = static_cast<std::ptrdiff_t>(p / W);
      for (std::ptrdiff_t dy = -1; dy <= 1; ++dy)
        for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
          const std::ptrdiff_t nx = px + dx, ny = py + dy;
          if (nx < 0 || ny < 0 || nx >= static_cast<std::ptrdiff_t>(W) || ny >= static_cast<std::ptrdiff_t>(H)) continue;
          const std::size_t q = static_cast<std::size_t>(ny) * W + static_cast<std::size_t>(nx);
          if (mask.bits[q] && !labels[q]) {
            labels[q] = next;
            stack.push_back(q);
          }
        }
    }
  }
  if (count) *count = next;
  return labels;
}

Mask make_mask(std::size_t width, std::size_t height, std::vector<std::uint8_t> bits) {
  MAD_REQUIRE(bits.size() == width * height, "make_mask: size mismatch");
  Mask m{width, height, std::move(bits), 0};
  for (auto& b : m.bits) b = b ? 1 : 0;
  label_components(m, &m.region_count);
  return m;
}

Segmentation segment_single(const Image& image, int threshold) {
  std::vector<std::uint8_t> bits(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) bits[i] = image.pixels[i] > threshold ? 1 : 0;
  Segmentation s;
  s.mask = make_mask(image.width, image.height, std::move(bits));
  s.accepted = s.mask.region_count == 1;
  return s;
}

double crofton_perimeter(const Mask& mask) {
  const auto W = static_cast<std::ptrdiff_t>(mask.width), H = static_cast<std::ptrdiff_t>(mask.height);
  auto fg = [&](std::ptrdiff_t x, std::ptrdiff_t y) {
    return x >= 0 && y >= 0 && x < W && y < H && mask.bits[static_cast<std::size_t>(y * W + x)];
  };
  // Each direction counts entries into the foreground along parallel lines
  // one pixel apart (1/sqrt(2) apart for the diagonals).
  std::size_t horizontal = 0, vertical = 0, diag = 0, anti = 0;
  for (std::ptrdiff_t y = 0; y < H; ++y)
    for (std::ptrdiff_t x = 0; x < W; ++x) {
      if (!fg(x, y)) continue;
      if (!fg(x - 1, y)) ++horizontal;
      if (!fg(x, y - 1)) ++vertical;
      if (!fg(x - 1, y - 1)) ++diag;
      if (!fg(x + 1, y - 1)) ++anti;
    }
  return std::numbers::pi / 4.0 *
         (static_cast<double>(horizontal + vertical) + static_cast<double>(diag + anti) / std::numbers::sqrt2);
}

FeatureVector extract_features(const Image& image, const Mask& mask) {
  MAD_REQUIRE(image.width == mask.width && image.height == mask.height, "extract_features: size mismatch");
  MAD_REQUIRE(mask.region_count == 1, "extract_features: mask must contain exactly one region");
  double n = 0, sx = 0, sy = 0, sum_i = 0;
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      n += 1;
      sx += static_cast<double>(x);
      sy += static_cast<double>(y);
      sum_i += image.at(x, y);
    }
  const double cx = sx / n, cy = sy / n;
  double mu20 = 0, mu02 = 0, mu11 = 0;
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (!mask.at(x, y)) continue;
      const double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      mu20 += dx * dx;
      mu02 += dy * dy;
      mu11 += dx * dy;
    }
  const double half_trace = 0.5 * (mu20 + mu02);
  const double disc = std::sqrt(0.25 * (mu20 - mu02) * (mu20 - mu02) + mu11 * mu11);
  const double lmax = half_trace + disc, lmin = half_trace - disc;

  FeatureVector f{std::vector<double>(geo::kCount), FeatureSpace::raw};
  f[geo::kArea] = n;
  f[geo::kPerimeter] = crofton_perimeter(mask);
  f[geo::kEccentricity] = lmax > 0 ? std::sqrt(std::max(0.0, 1.0 - lmin / lmax)) : 0.0;
  double theta = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02);
  if (theta < 0) theta += std::numbers::pi;
  if (theta >= std::numbers::pi) theta -= std::numbers::pi;
  f[geo::kOrientation] = theta;
  f[geo::kIntensity] = sum_i / n;
  return f;
}

double quantile(std::vector<double> values, double q) {
  MAD_REQUIRE(!values.empty(), "quantile of empty data");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

NormalizerFit fit_normalizer(const std::vector<FeatureVector>& raw, const std::vector<std::string>& names,
                             double trim) {
  MAD_REQUIRE(raw.size() >= 100, "fit_normalizer: need at least 100 samples");
  const std::size_t D = names.size();
  for (const auto& y : raw) {
    MAD_REQUIRE(y.size() == D, "fit_normalizer: vector dimension does not match feature names");
    MAD_REQUIRE(y.space == FeatureSpace::raw, "fit_normalizer: expected raw features");
  }
  NormalizerFit fit;
  Normalizer& nz = fit.normalizer;
  nz.names_ = names;
  nz.lower_.resize(D);
  nz.upper_.resize(D);
  for (std::size_t j = 0; j < D; ++j) {
    std::vector<double> col(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) col[i] = raw[i][j];
    nz.lower_[j] = quantile(col, trim);
    nz.upper_[j] = quantile(std::move(col), 1.0 - trim);
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    bool inside = true;
    for (std::size_t j = 0; j < D && inside; ++j) inside = raw[i][j] >= nz.lower_[j] && raw[i][j] <= nz.upper_[j];
    if (inside) fit.kept_indices.push_back(i);
  }
  MAD_REQUIRE(!fit.kept_indices.empty(), "fit_normalizer: trimming removed every sample");
  const double n = static_cast<double>(fit.kept_indices.size());
  std::vector<double> means(D, 0.0), stds(D, 0.0);
  for (std::size_t i : fit.kept_indices)
    for (std::size_t j = 0; j < D; ++j) means[j] += raw[i][j];
  for (auto& m : means) m /= n;
  for (std::size_t i : fit.kept_indices)
    for (std::size_t j = 0; j < D; ++j) stds[j] += (raw[i][j] - means[j]) * (raw[i][j] - means[j]);
  for (std::size_t j = 0; j < D; ++j) {
    stds[j] = std::sqrt(stds[j] / n);
    if (!(stds[j] > 1e-12 * std::max(1.0, std::abs(means[j])))) throw DegenerateFeature(names[j]);
  }
  nz.means_ = std::move(means);
  nz.stds_ = std::move(stds);
  return fit;
}

void Normalizer::require_fitted(const FeatureVector& y, FeatureSpace expected) const {
  MAD_REQUIRE(fitted(), "normalizer used before fitting");
  MAD_REQUIRE(y.size() == dim(), "normalizer: dimension mismatch");
  MAD_REQUIRE(y.space == expected, "normalizer: feature vector is in the wrong space");
}

FeatureVector Normalizer::normalize(const FeatureVector& raw) const {
  require_fitted(raw, FeatureSpace::raw);
  FeatureVector out{std::vector<double>(dim()), FeatureSpace::normalized};
  for (std::size_t j = 0; j < dim(); ++j) out[j] = (raw[j] - means_[j]) / stds_[j];
  return out;
}

FeatureVector Normalizer::denormalize(const FeatureVector& z) const {
  require_fitted(z, FeatureSpace::normalized);
  FeatureVector out{std::vector<double>(dim()), FeatureSpace::raw};
  for (std::size_t j = 0; j < dim(); ++j) out[j] = z[j] * stds_[j] + means_[j];
  return out;
}

double Normalizer::normalize_delta(std::size_t i, double raw_delta) const {
  MAD_REQUIRE(fitted() && i < dim(), "normalizer: bad feature index");
  return raw_delta / stds_[i];
}

double Normalizer::normalize_value(std::size_t i, double raw) const {
  MAD_REQUIRE(fitted() && i < dim(), "normalizer: bad feature index");
  return (raw - means_[i]) / stds_[i];
}

double Normalizer::denormalize_value(std::size_t i, double normalized) const {
  MAD_REQUIRE(fitted() && i < dim(), "normalizer: bad feature index");
  return normalized * stds_[i] + means_[i];
}

std::string Normalizer::to_json() const {
  nlohmann::ordered_json j;
  j["feature_names"] = names_;
  j["means"] = means_;
  j["stds"] = stds_;
  j["lower_bounds"] = lower_;
  j["upper_bounds"] = upper_;
  return j.dump(2);
}

Normalizer Normalizer::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Normalizer n;
  n.names_ = j.at("feature_names").get<std::vector<std::string>>();
  n.means_ = j.at("means").get<std::vector<double>>();
  n.stds_ = j.at("stds").get<std::vector<double>>();
  n.lower_ = j.at("lower_bounds").get<std::vector<double>>();
  n.upper_ = j.at("upper_bounds").get<std::vector<double>>();
  const std::size_t D = n.names_.size();
  if (n.means_.size() != D || n.stds_.size() != D || n.lower_.size() != D || n.upper_.size() != D)
    throw ConfigError("normalizer.json: inconsistent lengths");
  for (double s : n.stds_)
    if (!(s > 0)) throw ConfigError("normalizer.json: non-positive std");
  return n;
}

void Normalizer::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << to_json() << '\n';
}

Normalizer Normalizer::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace mad::morphometry
