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

#include "mad/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mad {

namespace {

double evaluate(const ScalarBuilder& f, const std::vector<Tensor<double>>& params) {
  Graph<double> g;
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(g.constant(p));
  return g.value(f(g, vars))[0];
}

}  // namespace

double finite_diff_check(const ScalarBuilder& f, const std::vector<Tensor<double>>& params,
                         double h, double floor) {
  MAD_REQUIRE(h > 0.0 && floor > 0.0, "finite_diff_check: h and floor must be positive");
  Graph<double> g;
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(g.leaf(p));
  g.backward(f(g, vars));

  double worst = 0.0;
  std::vector<Tensor<double>> probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& analytic = g.grad(vars[i]);
    for (std::size_t j = 0; j < params[i].size(); ++j) {
      const double x = params[i][j];
      probe[i][j] = x + h;
      const double up = evaluate(f, probe);
      probe[i][j] = x - h;
      const double down = evaluate(f, probe);
      probe[i][j] = x;
      const double numeric = (up - down) / (2.0 * h);
      const double ad = analytic.empty() ? 0.0 : analytic[j];
      worst = std::max(worst, std::abs(ad - numeric) / std::max(std::abs(numeric), floor));
    }
  }
  return worst;
}

}  // namespace mad
