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

#include "mad/vae/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>

namespace mad::vae {

namespace {

double row_distance(const Tensor<double>& t, std::size_t i, std::size_t j) {
  const std::size_t d = t.dim(1);
  double s = 0;
  for (std::size_t k = 0; k < d; ++k) {
    const double diff = t.at(i, k) - t.at(j, k);
    s += diff * diff;
  }
  return std::sqrt(s);
}

std::size_t pick(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
}

}  // namespace

LatentMap LatentMap::of(const VaeModel& model) {
  return {[&model](const Tensor<double>& y) { return model.encode_mean_batch(y); },
          [&model](const Tensor<double>& z) { return model.decode_batch(z); }};
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  MAD_REQUIRE(x.size() == y.size() && x.size() >= 2, "pearson: need two equal-length series");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::vector<double> latent_pca(const LatentMap& map, const std::vector<FeatureVector>& dataset) {
  const Tensor<double> z = map.encode_mean(stack(dataset));
  const auto n = static_cast<Eigen::Index>(z.dim(0)), d = static_cast<Eigen::Index>(z.dim(1));
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(z.data(), n, d);
  const Eigen::MatrixXd centered = m.rowwise() - m.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  std::vector<double> ratios(static_cast<std::size_t>(d));
  double total = 0;
  for (Eigen::Index i = 0; i < d; ++i) total += std::max(eig.eigenvalues()[i], 0.0);
  for (Eigen::Index i = 0; i < d; ++i)
    ratios[static_cast<std::size_t>(i)] = total > 0 ? std::max(eig.eigenvalues()[i], 0.0) / total : 0.0;
  std::sort(ratios.begin(), ratios.end(), std::greater<>());
  return ratios;
}

std::vector<double> latent_pca(const VaeModel& model, const std::vector<FeatureVector>& dataset) {
  return latent_pca(LatentMap::of(model), dataset);
}

std::size_t components_for_variance(const std::vector<double>& ratios, double fraction) {
  double cum = 0;
  for (std::size_t k = 0; k < ratios.size(); ++k) {
    cum += ratios[k];
    if (cum >= fraction - 1e-12) return k + 1;
  }
  return ratios.size();
}

double distance_preservation(const LatentMap& map, const std::vector<FeatureVector>& dataset,
                             std::size_t n_pairs, Rng& rng) {
  MAD_REQUIRE(dataset.size() >= 2, "distance_preservation: need at least two samples");
  const Tensor<double> z = map.encode_mean(stack(dataset));
  const Tensor<double> y = map.decode(z);
  std::vector<double> dz, dy;
  dz.reserve(n_pairs);
  dy.reserve(n_pairs);
  while (dz.size() < n_pairs) {
    const std::size_t i = pick(rng, z.dim(0)), j = pick(rng, z.dim(0));
    if (i == j) continue;
    dz.push_back(row_distance(z, i, j));
    dy.push_back(row_distance(y, i, j));
  }
  return pearson(dz, dy);
}

double distance_preservation(const VaeModel& model, const std::vector<FeatureVector>& dataset,
                             std::size_t n_pairs, Rng& rng) {
  return distance_preservation(LatentMap::of(model), dataset, n_pairs, rng);
}

double path_roughness(const std::vector<FeatureVector>& path) {
  MAD_REQUIRE(path.size() >= 3, "path_roughness: need at least three points");
  const std::size_t D = path.front().size();
  double s = 0;
  for (std::size_t t = 1; t + 1 < path.size(); ++t)
    for (std::size_t k = 0; k < D; ++k) {
      const double dd = path[t + 1][k] - 2.0 * path[t][k] + path[t - 1][k];
      s += dd * dd;
    }
  return s / static_cast<double>((path.size() - 2) * D);
}

InterpolationResult interpolation_smoothness(const LatentMap& map, const Tensor<double>& pool,
                                             std::size_t n_pairs, std::size_t steps, Rng& rng) {
  MAD_REQUIRE(pool.rank() == 2 && pool.dim(0) >= 2, "interpolation_smoothness: need at least two codes");
  MAD_REQUIRE(steps >= 3 && n_pairs >= 1, "interpolation_smoothness: need >= 3 steps and >= 1 pair");
  const std::size_t d = pool.dim(1);
  InterpolationResult out;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    std::size_t i = pick(rng, pool.dim(0)), j = pick(rng, pool.dim(0));
    while (j == i) j = pick(rng, pool.dim(0));
    Tensor<double> path(Shape{steps, d});
    for (std::size_t s = 0; s < steps; ++s) {
      const double t = static_cast<double>(s) / static_cast<double>(steps - 1);
      for (std::size_t k = 0; k < d; ++k) path.at(s, k) = (1.0 - t) * pool.at(i, k) + t * pool.at(j, k);
    }
    const Tensor<double> y = map.decode(path);
    std::vector<FeatureVector> traj(steps);
    for (std::size_t s = 0; s < steps; ++s)
      traj[s] = {std::vector<double>(y.data() + s * y.dim(1), y.data() + (s + 1) * y.dim(1)),
                 FeatureSpace::normalized};
    out.pair_scores.push_back(path_roughness(traj));
    out.trajectories.push_back(std::move(traj));
  }
  double total = 0;
  for (double s : out.pair_scores) total += s;
  out.mean_score = total / static_cast<double>(out.pair_scores.size());
  return out;
}

InterpolationResult interpolation_smoothness(const VaeModel& model, const std::vector<FeatureVector>& dataset,
                                             std::size_t n_pairs, std::size_t steps, Rng& rng) {
  const auto map = LatentMap::of(model);
  return interpolation_smoothness(map, map.encode_mean(stack(dataset)), n_pairs, steps, rng);
}

}  // namespace mad::vae
