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

#include <benchmark/benchmark.h>

#include <vector>

#include "mad/core/rng.hpp"
#include "mad/editor/editor.hpp"
#include "mad/numerics/kernels.hpp"

using namespace mad;

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

template <bool Tuned>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_floats(n * n, 1), b = random_floats(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Tuned)
      kernels::gemm(kernels::Trans::no, kernels::Trans::no, n, n, n, 1.0f, a.data(), b.data(), 0.0f, c.data());
    else
      kernels::reference::gemm(kernels::Trans::no, kernels::Trans::no, n, n, n, 1.0f, a.data(), b.data(), 0.0f,
                               c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

// One denoiser-sized layer: 16 -> 16 channels, 3x3, 32x32, batch 8.
template <bool Tuned>
void BM_Conv(benchmark::State& state) {
  const kernels::ConvShape s{8, 16, 32, 32, 16, 3};
  auto x = random_floats(s.batch * s.in_channels * s.plane(), 3);
  auto w = random_floats(s.out_channels * s.patch(), 4);
  auto dy = random_floats(s.batch * s.out_channels * s.plane(), 5);
  std::vector<float> y(dy.size()), dx(x.size()), dw(w.size());
  for (auto _ : state) {
    if constexpr (Tuned) {
      kernels::conv2d_forward(s, x.data(), w.data(), y.data());
      kernels::conv2d_backward(s, x.data(), w.data(), dy.data(), dx.data(), dw.data());
    } else {
      kernels::reference::conv2d_forward(s, x.data(), w.data(), y.data());
      kernels::reference::conv2d_backward(s, x.data(), w.data(), dy.data(), dx.data(), dw.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  const double macs = 3.0 * s.batch * s.out_channels * s.patch() * s.plane();
  state.counters["GMACS"] =
      benchmark::Counter(macs, benchmark::Counter::kIsIterationInvariantRate, benchmark::Counter::kIs1000);
}

// 32 independent latent edits on an untrained default-size VAE.
template <editor::Execution Mode>
void BM_BatchEdit(benchmark::State& state) {
  const vae::VaeModel model{vae::VaeConfig{}};
  Rng rng(6);
  std::vector<editor::EditSpec> specs;
  for (int i = 0; i < 32; ++i) {
    editor::EditSpec s;
    s.y_orig.space = FeatureSpace::normalized;
    for (int k = 0; k < 4; ++k) s.y_orig.values.push_back(rng.normal());
    s.target_index = 0;
    s.target_value = rng.normal();
    s.options.steps = 100;
    specs.push_back(std::move(s));
  }
  for (auto _ : state) benchmark::DoNotOptimize(editor::batch_edit(model, specs, Mode));
  state.counters["edits/s"] =
      benchmark::Counter(static_cast<double>(specs.size()), benchmark::Counter::kIsIterationInvariantRate);
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial_reference")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Name("gemm/openmp_tuned")->Arg(64)->Arg(256);
BENCHMARK(BM_Conv<false>)->Name("conv3x3/serial_reference");
BENCHMARK(BM_Conv<true>)->Name("conv3x3/openmp_tuned");

BENCHMARK(BM_BatchEdit<editor::Execution::serial_reference>)->Name("batch_edit/serial_reference");
BENCHMARK(BM_BatchEdit<editor::Execution::parallel>)->Name("batch_edit/openmp");

BENCHMARK_MAIN();
