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

#include "mad/numerics/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mad::kernels {

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

template <class T>
void transpose(std::size_t rows, std::size_t cols, const T* src, T* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    const std::size_t r1 = std::min(rows, r0 + kBlock);
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

#if defined(__AVX512F__)
constexpr std::size_t kVecBytes = 64;
#else
constexpr std::size_t kVecBytes = 32;
#endif

template <class T>
struct Simd {
  typedef T vec __attribute__((vector_size(kVecBytes)));
  static constexpr std::size_t lanes = kVecBytes / sizeof(T);

  static vec load(const T* p) {
    vec v;
    std::memcpy(&v, p, sizeof(vec));
    return v;
  }
  static void add_store(T* p, vec v) {
    vec cur = load(p);
    cur += v;
    std::memcpy(p, &cur, sizeof(vec));
  }
};

// Computes R rows by V vectors of C += alpha * A * B starting at (i0, j0).
template <class T, std::size_t R, std::size_t V>
inline void micro_kernel(std::size_t N, std::size_t K, T alpha, const T* A, const T* B, T* C,
                         std::size_t i0, std::size_t j0) {
  using S = Simd<T>;
  using vec = typename S::vec;
  vec acc[R][V];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < V; ++v) acc[r][v] = vec{};
  const T* arow[R];
  for (std::size_t r = 0; r < R; ++r) arow[r] = A + (i0 + r) * K;
  for (std::size_t k = 0; k < K; ++k) {
    const T* b = B + k * N + j0;
    vec bv[V];
    for (std::size_t v = 0; v < V; ++v) bv[v] = S::load(b + v * S::lanes);
    for (std::size_t r = 0; r < R; ++r) {
      const vec a = vec{} + arow[r][k];
      for (std::size_t v = 0; v < V; ++v) acc[r][v] += a * bv[v];
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t v = 0; v < V; ++v)
      S::add_store(C + (i0 + r) * N + j0 + v * S::lanes, acc[r][v] * alpha);
}

template <class T, std::size_t R>
void row_block(std::size_t N, std::size_t K, T alpha, const T* A, const T* B, T* C,
               std::size_t i0) {
  constexpr std::size_t L = Simd<T>::lanes;
  std::size_t j0 = 0;
  for (; j0 + 2 * L <= N; j0 += 2 * L) micro_kernel<T, R, 2>(N, K, alpha, A, B, C, i0, j0);
  for (; j0 + L <= N; j0 += L) micro_kernel<T, R, 1>(N, K, alpha, A, B, C, i0, j0);
  for (std::size_t r = 0; r < R; ++r) {
    for (std::size_t j = j0; j < N; ++j) {
      T acc = 0;
      for (std::size_t k = 0; k < K; ++k) acc += A[(i0 + r) * K + k] * B[k * N + j];
      C[(i0 + r) * N + j] += alpha * acc;
    }
  }
}

// C += alpha * A[M,K] * B[K,N] with A, B, C dense row-major.
template <class T>
void gemm_nn_accumulate(std::size_t M, std::size_t N, std::size_t K, T alpha, const T* A,
                        const T* B, T* C) {
  constexpr std::size_t MR = 6;
  const std::ptrdiff_t row_blocks = static_cast<std::ptrdiff_t>((M + MR - 1) / MR);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t rb = 0; rb < row_blocks; ++rb) {
    const std::size_t i0 = static_cast<std::size_t>(rb) * MR;
    switch (std::min(MR, M - i0)) {
      case 6: row_block<T, 6>(N, K, alpha, A, B, C, i0); break;
      case 5: row_block<T, 5>(N, K, alpha, A, B, C, i0); break;
      case 4: row_block<T, 4>(N, K, alpha, A, B, C, i0); break;
      case 3: row_block<T, 3>(N, K, alpha, A, B, C, i0); break;
      case 2: row_block<T, 2>(N, K, alpha, A, B, C, i0); break;
      default: row_block<T, 1>(N, K, alpha, A, B, C, i0); break;
    }
  }
}

template <class T>
void scale_output(std::size_t count, T beta, T* C) {
  if (beta == T(0)) {
    std::fill(C, C + count, T(0));
  } else if (beta != T(1)) {
    for (std::size_t i = 0; i < count; ++i) C[i] *= beta;
  }
}

template <class T>
void im2col(const ConvShape& s, const T* image, T* col) {
  const std::size_t H = s.height, W = s.width, ks = s.ksize;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(s.pad());
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    const T* plane = image + c * H * W;
    for (std::size_t ky = 0; ky < ks; ++ky) {
      for (std::size_t kx = 0; kx < ks; ++kx) {
        T* row = col + ((c * ks + ky) * ks + kx) * H * W;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          T* out = row + y * W;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) {
            std::fill(out, out + W, T(0));
            continue;
          }
          const T* in = plane + static_cast<std::size_t>(sy) * W;
          for (std::size_t x = 0; x < W; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) + dx;
            out[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(W)) ? T(0)
                                                                       : in[static_cast<std::size_t>(sx)];
          }
        }
      }
    }
  }
}

template <class T>
void col2im_accumulate(const ConvShape& s, const T* col, T* image) {
  const std::size_t H = s.height, W = s.width, ks = s.ksize;
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(s.pad());
  for (std::size_t c = 0; c < s.in_channels; ++c) {
    T* plane = image + c * H * W;
    for (std::size_t ky = 0; ky < ks; ++ky) {
      for (std::size_t kx = 0; kx < ks; ++kx) {
        const T* row = col + ((c * ks + ky) * ks + kx) * H * W;
        const std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        const std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::size_t y = 0; y < H; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(H)) continue;
          T* out = plane + static_cast<std::size_t>(sy) * W;
          const T* in = row + y * W;
          for (std::size_t x = 0; x < W; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x) + dx;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(W)) out[static_cast<std::size_t>(sx)] += in[x];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, T alpha, const T* A,
          const T* B, T beta, T* C) {
  scale_output(M * N, beta, C);
  if (M == 0 || N == 0 || K == 0) return;
  std::vector<T> packed_a, packed_b;
  if (ta == Trans::yes) {
    packed_a.resize(M * K);
    transpose(K, M, A, packed_a.data());
    A = packed_a.data();
  }
  if (tb == Trans::yes) {
    packed_b.resize(K * N);
    transpose(N, K, B, packed_b.data());
    B = packed_b.data();
  }
  gemm_nn_accumulate(M, N, K, alpha, A, B, C);
}

template <class T>
void conv2d_forward(const ConvShape& s, const T* x, const T* weight, T* y) {
  std::vector<T> col(s.patch() * s.plane());
  for (std::size_t n = 0; n < s.batch; ++n) {
    im2col(s, x + n * s.in_channels * s.plane(), col.data());
    gemm(Trans::no, Trans::no, s.out_channels, s.plane(), s.patch(), T(1), weight, col.data(), T(0),
         y + n * s.out_channels * s.plane());
  }
}

template <class T>
void conv2d_backward(const ConvShape& s, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight) {
  std::vector<T> col(s.patch() * s.plane());
  std::vector<T> weight_t;
  if (dx) {
    weight_t.resize(s.patch() * s.out_channels);
    transpose(s.out_channels, s.patch(), weight, weight_t.data());
  }
  std::vector<T> col_t(dweight ? s.patch() * s.plane() : 0);
  for (std::size_t n = 0; n < s.batch; ++n) {
    const T* dyn = dy + n * s.out_channels * s.plane();
    if (dweight) {
      im2col(s, x + n * s.in_channels * s.plane(), col.data());
      transpose(s.patch(), s.plane(), col.data(), col_t.data());
      gemm_nn_accumulate(s.out_channels, s.patch(), s.plane(), T(1), dyn, col_t.data(), dweight);
    }
    if (dx) {
      std::fill(col.begin(), col.end(), T(0));
      gemm_nn_accumulate(s.patch(), s.plane(), s.out_channels, T(1), weight_t.data(), dyn, col.data());
      col2im_accumulate(s, col.data(), dx + n * s.in_channels * s.plane());
    }
  }
}

namespace reference {

template <class T>
void gemm(Trans ta, Trans tb, std::size_t M, std::size_t N, std::size_t K, T alpha, const T* A,
          const T* B, T beta, T* C) {
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < N; ++j) {
      T acc = 0;
      for (std::size_t k = 0; k < K; ++k) {
        const T a = ta == Trans::no ? A[i * K + k] : A[k * M + i];
        const T b = tb == Trans::no ? B[k * N + j] : B[j * K + k];
        acc += a * b;
      }
      C[i * N + j] = alpha * acc + (beta == T(0) ? T(0) : beta * C[i * N + j]);
    }
  }
}

template <class T>
void conv2d_forward(const ConvShape& s, const T* x, const T* weight, T* y) {
  const auto H = static_cast<std::ptrdiff_t>(s.height), W = static_cast<std::ptrdiff_t>(s.width);
  const auto ks = static_cast<std::ptrdiff_t>(s.ksize), pad = static_cast<std::ptrdiff_t>(s.pad());
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::ptrdiff_t py = 0; py < H; ++py)
        for (std::ptrdiff_t px = 0; px < W; ++px) {
          T acc = 0;
          for (std::size_t c = 0; c < s.in_channels; ++c)
            for (std::ptrdiff_t ky = 0; ky < ks; ++ky)
              for (std::ptrdiff_t kx = 0; kx < ks; ++kx) {
                const std::ptrdiff_t sy = py + ky - pad, sx = px + kx - pad;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                acc += weight[((o * s.in_channels + c) * s.ksize + ky) * s.ksize + kx] *
                       x[((n * s.in_channels + c) * s.height + sy) * s.width + sx];
              }
          y[((n * s.out_channels + o) * s.height + py) * s.width + px] = acc;
        }
}

template <class T>
void conv2d_backward(const ConvShape& s, const T* x, const T* weight, const T* dy, T* dx,
                     T* dweight) {
  const auto H = static_cast<std::ptrdiff_t>(s.height), W = static_cast<std::ptrdiff_t>(s.width);
  const auto ks = static_cast<std::ptrdiff_t>(s.ksize), pad = static_cast<std::ptrdiff_t>(s.pad());
  for (std::size_t n = 0; n < s.batch; ++n)
    for (std::size_t o = 0; o < s.out_channels; ++o)
      for (std::ptrdiff_t py = 0; py < H; ++py)
        for (std::ptrdiff_t px = 0; px < W; ++px) {
          const T g = dy[((n * s.out_channels + o) * s.height + py) * s.width + px];
          for (std::size_t c = 0; c < s.in_channels; ++c)
            for (std::ptrdiff_t ky = 0; ky < ks; ++ky)
              for (std::ptrdiff_t kx = 0; kx < ks; ++kx) {
                const std::ptrdiff_t sy = py + ky - pad, sx = px + kx - pad;
                if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                const std::size_t wi = ((o * s.in_channels + c) * s.ksize + ky) * s.ksize + kx;
                const std::size_t xi = ((n * s.in_channels + c) * s.height + sy) * s.width + sx;
                if (dweight) dweight[wi] += g * x[xi];
                if (dx) dx[xi] += g * weight[wi];
              }
        }
}

}  // namespace reference

#define MAD_INSTANTIATE_KERNELS(T)                                                              \
  template void gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, T, const T*,     \
                        const T*, T, T*);                                                       \
  template void conv2d_forward<T>(const ConvShape&, const T*, const T*, T*);                   \
  template void conv2d_backward<T>(const ConvShape&, const T*, const T*, const T*, T*, T*);    \
  template void reference::gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, T,     \
                                   const T*, const T*, T, T*);                                  \
  template void reference::conv2d_forward<T>(const ConvShape&, const T*, const T*, T*);        \
  template void reference::conv2d_backward<T>(const ConvShape&, const T*, const T*, const T*,  \
                                              T*, T*);

MAD_INSTANTIATE_KERNELS(float)
MAD_INSTANTIATE_KERNELS(double)

}  // namespace mad::kernels
