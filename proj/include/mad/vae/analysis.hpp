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

#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "mad/core/features.hpp"
#include "mad/core/rng.hpp"
#include "mad/numerics/tensor.hpp"
#include "mad/vae/vae.hpp"

namespace mad::vae {

/// Batched encoder-mean and decoder maps over [n, D] / [n, d] matrices. Lets
/// the analyses run on stubs as well as trained models.
struct LatentMap {
  std::function<Tensor<double>(const Tensor<double>&)> encode_mean;
  std::function<Tensor<double>(const Tensor<double>&)> decode;

  static LatentMap of(const VaeModel& model);
};

/// Explained-variance ratios of the encoder-mean codes, sorted descending.
std::vector<double> latent_pca(const LatentMap& map, const std::vector<FeatureVector>& dataset);
std::vector<double> latent_pca(const VaeModel& model, const std::vector<FeatureVector>& dataset);

/// Smallest k with cumulative ratio >= fraction.
std::size_t components_for_variance(const std::vector<double>& ratios, double fraction);

/// Pearson r between ||z_i - z_j|| and ||D(z_i) - D(z_j)|| over random pairs.
double distance_preservation(const LatentMap& map, const std::vector<FeatureVector>& dataset,
                             std::size_t n_pairs, Rng& rng);
double distance_preservation(const VaeModel& model, const std::vector<FeatureVector>& dataset,
                             std::size_t n_pairs, Rng& rng);

struct InterpolationResult {
  /// trajectories[pair][step] is the decoded feature vector along the path.
  std::vector<std::vector<FeatureVector>> trajectories;
  std::vector<double> pair_scores;
  double mean_score = 0;
};

/// Mean squared discrete second difference of a decoded path, over steps and
/// features.
double path_roughness(const std::vector<FeatureVector>& path);

/// Linear paths between random pairs of codes from `pool` ([m, d]), decoded
/// at `steps` points each.
InterpolationResult interpolation_smoothness(const LatentMap& map, const Tensor<double>& pool,
                                             std::size_t n_pairs, std::size_t steps, Rng& rng);
/// Pairs drawn from the encoder-mean codes of `dataset`.
InterpolationResult interpolation_smoothness(const VaeModel& model, const std::vector<FeatureVector>& dataset,
                                             std::size_t n_pairs, std::size_t steps, Rng& rng);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mad::vae
