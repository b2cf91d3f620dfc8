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

#include "doctest.h"
#include "mad/core/rng.hpp"
#include "mad/numerics/adam.hpp"

using namespace mad;

TEST_CASE("zero gradients leave parameters unchanged") {
  std::vector<Tensor<double>> p{Tensor<double>(Shape{3}, {1.0, -2.0, 0.5})};
  const auto before = p;
  AdamState<double> s;
  for (int i = 0; i < 10; ++i) adam_step(p, {Tensor<double>(Shape{3})}, s);
  CHECK(p == before);
  CHECK(s.step == 10);
}

TEST_CASE("first step with unit gradient moves by lr") {
  // m = 0.1, v = 0.001; bias correction gives m_hat = 1, v_hat = 1.
  std::vector<Tensor<double>> p{Tensor<double>::scalar(0.0)};
  AdamState<double> s;
  s.config.lr = 0.1;
  adam_step(p, {Tensor<double>::scalar(1.0)}, s);
  CHECK(p[0][0] == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("independent parameters do not interact") {
  AdamState<double> joint, a_only, b_only;
  std::vector<Tensor<double>> both{Tensor<double>::scalar(1.0), Tensor<double>::scalar(-3.0)};
  std::vector<Tensor<double>> a{Tensor<double>::scalar(1.0)}, b{Tensor<double>::scalar(-3.0)};
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const double ga = rng.normal(), gb = 5.0 * rng.normal();
    adam_step(both, {Tensor<double>::scalar(ga), Tensor<double>::scalar(gb)}, joint);
    adam_step(a, {Tensor<double>::scalar(ga)}, a_only);
    adam_step(b, {Tensor<double>::scalar(gb)}, b_only);
  }
  CHECK(both[0][0] == a[0][0]);
  CHECK(both[1][0] == b[0][0]);
}

TEST_CASE("shape mismatch is a contract violation") {
  std::vector<Tensor<double>> p{Tensor<double>(Shape{2})};
  AdamState<double> s;
  CHECK_THROWS_AS(adam_step(p, {Tensor<double>(Shape{3})}, s), ContractViolation);
}

TEST_CASE("identical seeds give bit-identical trajectories") {
  auto run = [] {
    Rng rng(77);
    std::vector<Tensor<double>> p{Tensor<double>(Shape{4}, 0.5)};
    AdamState<double> s;
    for (int i = 0; i < 200; ++i) {
      Tensor<double> g(Shape{4});
      for (std::size_t j = 0; j < 4; ++j) g[j] = p[0][j] * p[0][j] + rng.normal();
      adam_step(p, {g}, s);
    }
    return p[0];
  };
  CHECK(run() == run());
}
