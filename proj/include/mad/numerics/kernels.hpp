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

namespace mad::kernels {

enum class Trans { no, yes };

/// Geometry of a stride-1, zero-padded ("same") 2-D convolution over an
/// NCHW batch with a square odd kernel.
struct ConvShape {
  std::size_t batch, in_channels, height, width, out_channels, ksize;

  std::size_t pad() const noexcept { return ksize / 2; }
  std::size_t plane() const noexcept { return height * width; }
  std::size_t patch() const noexcept { return in_channels * ksize * ksize; }
};

// Tuned kernels. Work is split across OpenMP threads by output row so every
// element is produced by the same instruction sequence regardless of the
// thread count; results are bit-identical across OMP_NUM_THREADS settings.

/// C[M,N] = alpha * op(A) * op(B) + beta * C, all row-major. op(A) is MxK.
template <class T>
void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, T alpha, const T* A,
          const T* B, T beta, T* C);

/// y[n, cout, h, w] = conv(x, weight[cout, cin, k, k]). Bias is applied by the caller.
template <class T>
void conv2d_forward(const ConvShape& s, const T* x, const T* weight, T* y);

/// Accumulates into dx and dweight; either may be null to skip it.
template <class T>
void conv2d_backward(const ConvShape& s, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight);

/// Serial textbook implementations kept as the test oracle for the tuned
/// kernels above and as the baseline in the benchmark.
namespace reference {

template <class T>
void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, T alpha, const T* A,
          const T* B, T beta, T* C);

template <class T>
void conv2d_forward(const ConvShape& s, const T* x, const T* weight, T* y);

template <class T>
void conv2d_backward(const ConvShape& s, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight);

}  // namespace reference

/// Number of OpenMP threads the tuned kernels will use (1 without OpenMP).
int max_threads() noexcept;

}  // namespace mad::kernels
