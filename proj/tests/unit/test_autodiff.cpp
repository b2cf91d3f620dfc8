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
#include <limits>

#include "../support/random_graph.hpp"
#include "doctest.h"
#include "mad/numerics/autodiff.hpp"
#include "mad/numerics/gradcheck.hpp"
#include "mad/numerics/nn.hpp"

using namespace mad;

TEST_CASE("gradient of sum is all ones for any shape") {
  for (const Shape& s : {Shape{1}, Shape{3, 4}, Shape{2, 3, 2, 2}}) {
    Graph<double> g;
    Var p = g.leaf(Tensor<double>(s, 0.3));
    g.backward(g.sum(p));
    for (double v : g.grad(p).vec()) CHECK(v == 1.0);
  }
}

TEST_CASE("gradient of sum of squares is 2p") {
  Graph<double> g;
  Var p = g.leaf(Tensor<double>(Shape{3}, {1.0, 2.0, 3.0}));
  g.backward(g.sum(g.square(p)));
  CHECK(g.grad(p).vec() == std::vector<double>{2.0, 4.0, 6.0});
}

TEST_CASE("backward leaves node values untouched and can be repeated") {
  Graph<double> g;
  Var p = g.leaf(Tensor<double>(Shape{2, 2}, {1, -2, 3, 0.5}));
  Var h = g.tanh(p);
  Var loss = g.sum(g.square(h));
  const auto before = g.value(h);
  g.backward(loss);
  const auto first = g.grad(p);
  g.backward(loss);
  CHECK(g.value(h) == before);
  CHECK(g.grad(p) == first);
}

TEST_CASE("non-scalar root is a contract violation") {
  Graph<double> g;
  Var p = g.leaf(Tensor<double>(Shape{2}, 1.0));
  CHECK_THROWS_AS(g.backward(g.square(p)), ContractViolation);
}

TEST_CASE("non-finite output raises a numeric fault naming the op") {
  Graph<double> g;
  Var p = g.leaf(Tensor<double>(Shape{2}, {1.0, -1.0}));
  try {
    g.log(p);
    FAIL("expected NumericFault");
  } catch (const NumericFault& e) {
    CHECK(e.op() == "log");
  }
  Var big = g.leaf(Tensor<double>(Shape{1}, 1000.0));
  CHECK_THROWS_AS(g.exp(big), NumericFault);
}

TEST_CASE("3-layer MLP gradient matches central differences") {
  Rng rng(3);
  ParamStore<double> store;
  const Mlp mlp = Mlp::create(store, "mlp", {4, 6, 5, 1}, Activation::tanh, rng);
  for (auto& t : store.values())
    for (auto& v : t.vec()) v += 0.1 * rng.normal();
  Tensor<double> x(Shape{3, 4});
  for (auto& v : x.vec()) v = rng.normal();

  const ScalarBuilder f = [&](Graph<double>& g, const std::vector<Var>& vars) {
    // vars mirror the store order; rebuild a binding over them.
    struct Fixed {
      const std::vector<Var>& v;
    } fixed{vars};
    Var h = g.constant(x);
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      h = g.add_bias(g.matmul(h, fixed.v[mlp.layers[i].weight]), fixed.v[mlp.layers[i].bias]);
      if (i + 1 < mlp.layers.size()) h = g.tanh(h);
    }
    return g.sum(h);
  };
  CHECK(finite_diff_check(f, store.values(), 1e-5) < 1e-4);
}

TEST_CASE("finite_diff_check: constant is exact, quadratic form is O(h^2)-exact") {
  const std::vector<Tensor<double>> p{Tensor<double>(Shape{3}, {0.5, -1.0, 2.0})};
  CHECK(finite_diff_check([](Graph<double>& g, const std::vector<Var>&) {
          return g.constant(Tensor<double>::scalar(4.2));
        },
                          p) == 0.0);

  const Tensor<double> Q(Shape{3, 3}, {2, 0.5, 0, 0.5, 3, -1, 0, -1, 1.5});
  const ScalarBuilder quad = [&](Graph<double>& g, const std::vector<Var>& v) {
    Var row = g.reshape(v[0], {1, 3});
    return g.sum(g.mul(g.matmul(row, g.constant(Q)), row));
  };
  CHECK(finite_diff_check(quad, p, 1e-5) < 1e-6);
}

TEST_CASE("random small graphs pass the finite-difference check") {
  Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    auto c = testing::make_random_graph(rng);
    CHECK(finite_diff_check(c.build, c.params, 1e-5) < 1e-4);
  }
}

TEST_CASE("image primitives pass the finite-difference check") {
  Rng rng(9);
  std::vector<Tensor<double>> p{testing::random_tensor({2, 2, 4, 4}, rng),
                                testing::random_tensor({3, 2, 3, 3}, rng, 0.5),
                                testing::random_tensor({3}, rng), testing::random_tensor({2, 3}, rng),
                                testing::random_tensor({2, 3}, rng)};
  const ScalarBuilder f = [](Graph<double>& g, const std::vector<Var>& v) {
    Var h = g.add_bias(g.conv2d(v[0], v[1]), v[2]);
    h = g.add_channel(h, v[3]);
    h = g.mul_channel(h, v[4]);
    Var pooled = g.tanh(g.avg_pool2(h));
    Var up = g.upsample2(pooled);
    Var cat = g.concat(up, v[0]);
    return g.mean(g.square(g.row_sum(g.tanh(cat))));
  };
  CHECK(finite_diff_check(f, p, 1e-5) < 1e-4);
}

TEST_CASE("clamp passes gradient only inside the range") {
  Graph<double> g;
  Var p = g.leaf(Tensor<double>(Shape{3}, {-20.0, 0.5, 20.0}));
  g.backward(g.sum(g.clamp(p, -10.0, 10.0)));
  CHECK(g.grad(p).vec() == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("frozen bindings produce no parameter gradients") {
  Rng rng(1);
  ParamStore<double> store;
  const Linear lin = Linear::create(store, "l", 2, 2, rng);
  Graph<double> g;
  ParamBinding<double> bind(g, store, false);
  Var x = g.leaf(Tensor<double>(Shape{1, 2}, {0.3, -0.2}));
  g.backward(g.sum(lin(bind, x)));
  CHECK_FALSE(g.grad(x).empty());
  for (const auto& grad : bind.gradients())
    for (double v : grad.vec()) CHECK(v == 0.0);
}
