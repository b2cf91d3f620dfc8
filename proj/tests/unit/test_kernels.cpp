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
#include <vector>

#include "doctest.h"
#include "mad/core/rng.hpp"
#include "mad/numerics/kernels.hpp"

using namespace mad;
using kernels::Trans;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, Rng& rng) {
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.normal());
  return v;
}

template <class T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
  return worst;
}

}  // namespace

TEST_CASE_TEMPLATE("tuned gemm matches the serial reference for all transposes", T, float, double) {
  Rng rng(11);
  const double tol = std::is_same_v<T, float> ? 1e-3 : 1e-10;
  for (int trial = 0; trial < 40; ++trial) {
    const auto M = static_cast<std::size_t>(rng.uniform_int(1, 37));
    const auto N = static_cast<std::size_t>(rng.uniform_int(1, 70));
    const auto K = static_cast<std::size_t>(rng.uniform_int(1, 50));
    const Trans ta = rng.uniform() < 0.5 ? Trans::no : Trans::yes;
    const Trans tb = rng.uniform() < 0.5 ? Trans::no : Trans::yes;
    const T beta = trial % 3 == 0 ? T(0) : T(0.5);
    auto A = random_vec<T>(M * K, rng);
    auto B = random_vec<T>(K * N, rng);
    auto C0 = random_vec<T>(M * N, rng);
    auto C1 = C0;
    kernels::gemm(ta, tb, M, N, K, T(1.5), A.data(), B.data(), beta, C0.data());
    kernels::reference::gemm(ta, tb, M, N, K, T(1.5), A.data(), B.data(), beta, C1.data());
    CHECK(max_abs_diff(C0, C1) < tol);
  }
}

TEST_CASE_TEMPLATE("tuned conv2d matches the direct reference", T, float, double) {
  Rng rng(5);
  const double tol = std::is_same_v<T, float> ? 1e-3 : 1e-10;
  for (std::size_t ks : {1u, 3u, 5u}) {
    const kernels::ConvShape s{2, 3, 7, 9, 4, ks};
    auto x = random_vec<T>(s.batch * s.in_channels * s.plane(), rng);
    auto w = random_vec<T>(s.out_channels * s.patch(), rng);
    auto dy = random_vec<T>(s.batch * s.out_channels * s.plane(), rng);
    std::vector<T> y0(dy.size()), y1(dy.size());
    kernels::conv2d_forward(s, x.data(), w.data(), y0.data());
    kernels::reference::conv2d_forward(s, x.data(), w.data(), y1.data());
    CHECK(max_abs_diff(y0, y1) < tol);

    std::vector<T> dx0(x.size()), dx1(x.size()), dw0(w.size()), dw1(w.size());
    kernels::conv2d_backward(s, x.data(), w.data(), dy.data(), dx0.data(), dw0.data());
    kernels::reference::conv2d_backward(s, x.data(), w.data(), dy.data(), dx1.data(), dw1.data());
    CHECK(max_abs_diff(dx0, dx1) < tol);
    CHECK(max_abs_diff(dw0, dw1) < tol);
  }
}

TEST_CASE("conv2d backward may skip either gradient") {
  Rng rng(2);
  const kernels::ConvShape s{1, 2, 4, 4, 2, 3};
  auto x = random_vec<double>(32, rng);
  auto w = random_vec<double>(36, rng);
  auto dy = random_vec<double>(32, rng);
  std::vector<double> dw(36), dw_ref(36), dx_ref(32);
  kernels::conv2d_backward<double>(s, x.data(), w.data(), dy.data(), nullptr, dw.data());
  kernels::reference::conv2d_backward(s, x.data(), w.data(), dy.data(), dx_ref.data(), dw_ref.data());
  CHECK(max_abs_diff(dw, dw_ref) < 1e-12);
}
