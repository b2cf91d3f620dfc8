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

#include "mad/numerics/autodiff.hpp"

#include <cmath>
#include <string>

#include "mad/numerics/kernels.hpp"

namespace mad {

namespace {

struct AxisView {
  std::size_t outer, mid, inner;
};

AxisView axis1(const Shape& s, std::string_view op) {
  MAD_REQUIRE(s.size() >= 2, std::string(op) + ": expected rank >= 2, got " + shape_string(s));
  std::size_t inner = 1;
  for (std::size_t i = 2; i < s.size(); ++i) inner *= s[i];
  return {s[0], s[1], inner};
}

void require_same_shape(const Shape& a, const Shape& b, std::string_view op) {
  MAD_REQUIRE(a == b, std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                          shape_string(b));
}

}  // namespace

template <class T>
Var Graph<T>::push(Tensor<T> value, std::string_view op, std::vector<std::size_t> inputs,
                   Backward fn) {
  if (!value.all_finite()) throw NumericFault(std::string(op));
  Node n;
  n.value = std::move(value);
  n.op = op;
  for (std::size_t i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <class T>
Var Graph<T>::constant(Tensor<T> value) {
  return push(std::move(value), "constant", {}, nullptr);
}

template <class T>
Var Graph<T>::leaf(Tensor<T> value) {
  Var v = push(std::move(value), "leaf", {}, nullptr);
  nodes_.back().requires_grad = true;
  return v;
}

template <class T>
Tensor<T>& Graph<T>::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() != n.value.size()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <class T>
void Graph<T>::backward(Var root) {
  MAD_REQUIRE(root.id < nodes_.size(), "backward: unknown root");
  MAD_REQUIRE(nodes_[root.id].value.size() == 1,
              "backward: root must be scalar, got shape " +
                  shape_string(nodes_[root.id].value.shape()));
  for (auto& n : nodes_) n.grad = Tensor<T>();
  grad_of(root.id)[0] = T(1);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (!n.grad.all_finite()) throw NumericFault(std::string(n.op) + " (backward)");
    if (n.backward) n.backward(*this, i);
  }
}

// ---- elementwise ---------------------------------------------------------

template <class T>
Var Graph<T>::add(Var a, Var b) {
  require_same_shape(value(a).shape(), value(b).shape(), "add");
  Tensor<T> out(value(a).shape());
  const auto& x = value(a);
  const auto& y = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return push(std::move(out), "add", {a.id, b.id}, [](Graph& g, std::size_t self) {
    const auto in = g.nodes_[self].inputs;
    for (std::size_t id : in) {
      if (!g.wants_grad(id)) continue;
      auto& gi = g.grad_of(id);
      const auto& go = g.nodes_[self].grad;
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i];
    }
  });
}

template <class T>
Var Graph<T>::sub(Var a, Var b) {
  require_same_shape(value(a).shape(), value(b).shape(), "sub");
  Tensor<T> out(value(a).shape());
  const auto& x = value(a);
  const auto& y = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return push(std::move(out), "sub", {a.id, b.id}, [](Graph& g, std::size_t self) {
    const auto in = g.nodes_[self].inputs;
    for (int k = 0; k < 2; ++k) {
      if (!g.wants_grad(in[k])) continue;
      auto& gi = g.grad_of(in[k]);
      const auto& go = g.nodes_[self].grad;
      const T sign = k == 0 ? T(1) : T(-1);
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += sign * go[i];
    }
  });
}

template <class T>
Var Graph<T>::mul(Var a, Var b) {
  require_same_shape(value(a).shape(), value(b).shape(), "mul");
  Tensor<T> out(value(a).shape());
  const auto& x = value(a);
  const auto& y = value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return push(std::move(out), "mul", {a.id, b.id}, [](Graph& g, std::size_t self) {
    const auto in = g.nodes_[self].inputs;
    for (int k = 0; k < 2; ++k) {
      if (!g.wants_grad(in[k])) continue;
      auto& gi = g.grad_of(in[k]);
      const auto& go = g.nodes_[self].grad;
      const auto& other = g.nodes_[in[1 - k]].value;
      for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go[i] * other[i];
    }
  });
}

template <class T>
template <class Fwd, class Deriv>
Var Graph<T>::unary(Var a, std::string_view op, Fwd fwd, Deriv deriv) {
  const auto& x = value(a);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  return push(std::move(out), op, {a.id}, [deriv](Graph& g, std::size_t self) {
    const std::size_t in = g.nodes_[self].inputs[0];
    auto& gi = g.grad_of(in);
    const auto& n = g.nodes_[self];
    const auto& x = g.nodes_[in].value;
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += n.grad[i] * deriv(x[i], n.value[i]);
  });
}

template <class T>
Var Graph<T>::scale(Var a, T factor) {
  return unary(
      a, "scale", [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <class T>
Var Graph<T>::add_scalar(Var a, T offset) {
  return unary(
      a, "add_scalar", [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <class T>
Var Graph<T>::square(Var a) {
  return unary(
      a, "square", [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <class T>
Var Graph<T>::exp(Var a) {
  return unary(
      a, "exp", [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Var Graph<T>::log(Var a) {
  return unary(
      a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <class T>
Var Graph<T>::tanh(Var a) {
  return unary(
      a, "tanh", [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var Graph<T>::relu(Var a) {
  return unary(
      a, "relu", [](T x) { return x > T(0) ? x : T(0); },
      [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <class T>
Var Graph<T>::clamp(Var a, T lo, T hi) {
  MAD_REQUIRE(lo <= hi, "clamp: lo > hi");
  return unary(
      a, "clamp", [lo, hi](T x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](T x, T) { return (x < lo || x > hi) ? T(0) : T(1); });
}

// ---- reductions ----------------------------------------------------------

template <class T>
Var Graph<T>::sum(Var a) {
  T acc = 0;
  for (T v : value(a).vec()) acc += v;
  return push(Tensor<T>::scalar(acc), "sum", {a.id}, [](Graph& g, std::size_t self) {
    const std::size_t in = g.nodes_[self].inputs[0];
    auto& gi = g.grad_of(in);
    const T go = g.nodes_[self].grad[0];
    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go;
  });
}

template <class T>
Var Graph<T>::mean(Var a) {
  const std::size_t n = value(a).size();
  MAD_REQUIRE(n > 0, "mean of empty tensor");
  T acc = 0;
  for (T v : value(a).vec()) acc += v;
  return push(Tensor<T>::scalar(acc / static_cast<T>(n)), "mean", {a.id},
              [](Graph& g, std::size_t self) {
                const std::size_t in = g.nodes_[self].inputs[0];
                auto& gi = g.grad_of(in);
                const T go = g.nodes_[self].grad[0] / static_cast<T>(gi.size());
                for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += go;
              });
}

template <class T>
Var Graph<T>::row_sum(Var a) {
  const auto& x = value(a);
  MAD_REQUIRE(x.rank() >= 1, "row_sum: rank 0");
  const std::size_t rows = x.dim(0);
  const std::size_t cols = rows ? x.size() / rows : 0;
  Tensor<T> out(Shape{rows});
  for (std::size_t r = 0; r < rows; ++r) {
    T acc = 0;
    for (std::size_t c = 0; c < cols; ++c) acc += x[r * cols + c];
    out[r] = acc;
  }
  return push(std::move(out), "row_sum", {a.id}, [cols](Graph& g, std::size_t self) {
    const std::size_t in = g.nodes_[self].inputs[0];
    auto& gi = g.grad_of(in);
    const auto& go = g.nodes_[self].grad;
    for (std::size_t r = 0; r < go.size(); ++r)
      for (std::size_t c = 0; c < cols; ++c) gi[r * cols + c] += go[r];
  });
}

// ---- broadcast -----------------------------------------------------------

template <class T>
Var Graph<T>::add_bias(Var x, Var bias) {
  const auto v = axis1(value(x).shape(), "add_bias");
  MAD_REQUIRE(value(bias).size() == v.mid, "add_bias: bias length must match axis 1");
  const auto& xs = value(x);
  const auto& b = value(bias);
  Tensor<T> out(xs.shape());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t m = 0; m < v.mid; ++m) {
      const std::size_t base = (o * v.mid + m) * v.inner;
      for (std::size_t i = 0; i < v.inner; ++i) out[base + i] = xs[base + i] + b[m];
    }
  return push(std::move(out), "add_bias", {x.id, bias.id}, [v](Graph& g, std::size_t self) {
    const auto in = g.nodes_[self].inputs;
    const auto& go = g.nodes_[self].grad;
    if (g.wants_grad(in[0])) {
      auto& gx = g.grad_of(in[0]);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
    }
    if (g.wants_grad(in[1])) {
      auto& gb = g.grad_of(in[1]);
      for (std::size_t o = 0; o < v.outer; ++o)
        for (std::size_t m = 0; m < v.mid; ++m) {
          const std::size_t base = (o * v.mid + m) * v.inner;
          T acc = 0;
          for (std::size_t i = 0; i < v.inner; ++i) acc += go[base + i];
          gb[m] += acc;
        }
    }
  });
}

template <class T>
Var Graph<T>::add_channel(Var x, Var e) {
  const auto v = axis1(value(x).shape(), "add_channel");
  const auto& es = value(e);
  MAD_REQUIRE(es.rank() == 2 && es.dim(0) == v.outer && es.dim(1) == v.mid,
              "add_channel: embedding must be [n, c], got " + shape_string(es.shape()));
  const auto& xs = value(x);
  Tensor<T> out(xs.shape());
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t m = 0; m < v.mid; ++m) {
      const std::size_t base = (o * v.mid + m) * v.inner;
      const T add = es[o * v.mid + m];
      for (std::size_t i = 0; i < v.inner; ++i) out[base + i] = xs[base + i] + add;
    }
  return push(std::move(out), "add_channel", {x.id, e.id}, [v](Graph& g, std::size_t self) {
    const auto in = g.nodes_[self].inputs;
    const auto& go = g.nodes_[self].grad;
    if (g.wants_grad(in[0])) {
      auto& gx = g.grad_of(in[0]);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
    }
    if (g.wants_grad(in[1])) {
      auto& ge = g.grad_of(in[1]);
      for (std::size_t om = 0; om < v.outer * v.mid; ++om) {
        T acc = 0;
        for (std::size_t i = 0; i < v.inner; ++i) acc += go[om * v.inner + i];
        ge[om] += acc;
      }
    }
  });
}

template <class T>
Var Graph<T>::mul_channel(Var x, Var s) {
  const auto v = axis1(value(x).shape(), "mul_channel");
  const auto& ss = value(s);
  MAD_REQUIRE(ss.rank() == 2 && ss.dim(0) == v.outer && ss.dim(1) == v.mid,
              "mul_channel: scale must be [n, c], got " + shape_string(ss.shape()));
  const auto& xs = value(x);
  Tensor<T> out(xs.shape());
  for (std::size_t om = 0; om < v.outer * v.mid; ++om) {
    const T k = ss[om];
    for (std::size_t i = 0; i < v.inner; ++i) out[om * v.inner + i] = xs[om * v.inner + i] * k;
  }
  return push(std::move(out), "mul_channel", {x.id, s.id}, [v](Graph& g, std::size_t self) {
    const auto in = g.nodes_[self].inputs;
    const auto& go = g.nodes_[self].grad;
    const auto& xv = g.nodes_[in[0]].value;
    const auto& sv = g.nodes_[in[1]].value;
    if (g.wants_grad(in[0])) {
      auto& gx = g.grad_of(in[0]);
      for (std::size_t om = 0; om < v.outer * v.mid; ++om)
        for (std::size_t i = 0; i < v.inner; ++i) gx[om * v.inner + i] += go[om * v.inner + i] * sv[om];
    }
    if (g.wants_grad(in[1])) {
      auto& gs = g.grad_of(in[1]);
      for (std::size_t om = 0; om < v.outer * v.mid; ++om) {
        T acc = 0;
        for (std::size_t i = 0; i < v.inner; ++i) acc += go[om * v.inner + i] * xv[om * v.inner + i];
        gs[om] += acc;
      }
    }
  });
}

// ---- structure -----------------------------------------------------------

template <class T>
Var Graph<T>::matmul(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  MAD_REQUIRE(A.rank() == 2 && B.rank() == 2 && A.dim(1) == B.dim(0),
              "matmul: incompatible shapes " + shape_string(A.shape()) + " x " +
                  shape_string(B.shape()));
  const std::size_t n = A.dim(0), k = A.dim(1), m = B.dim(1);
  Tensor<T> out(Shape{n, m});
  kernels::gemm(kernels::Trans::no, kernels::Trans::no, n, m, k, T(1), A.data(), B.data(), T(0),
                out.data());
  return push(std::move(out), "matmul", {a.id, b.id}, [n, k, m](Graph& g, std::size_t self) {
    const auto in = g.nodes_[self].inputs;
    const T* go = g.nodes_[self].grad.data();
    if (g.wants_grad(in[0])) {
      auto& ga = g.grad_of(in[0]);
      kernels::gemm(kernels::Trans::no, kernels::Trans::yes, n, k, m, T(1), go,
                    g.nodes_[in[1]].value.data(), T(1), ga.data());
    }
    if (g.wants_grad(in[1])) {
      auto& gb = g.grad_of(in[1]);
      kernels::gemm(kernels::Trans::yes, kernels::Trans::no, k, m, n, T(1),
                    g.nodes_[in[0]].value.data(), go, T(1), gb.data());
    }
  });
}

template <class T>
Var Graph<T>::slice(Var x, std::size_t begin, std::size_t end) {
  const auto v = axis1(value(x).shape(), "slice");
  MAD_REQUIRE(begin < end && end <= v.mid, "slice: range out of bounds");
  Shape shape = value(x).shape();
  shape[1] = end - begin;
  Tensor<T> out(shape);
  const auto& xs = value(x);
  const std::size_t width = (end - begin) * v.inner;
  for (std::size_t o = 0; o < v.outer; ++o)
    std::copy_n(xs.data() + (o * v.mid + begin) * v.inner, width, out.data() + o * width);
  return push(std::move(out), "slice", {x.id}, [v, begin, width](Graph& g, std::size_t self) {
    const std::size_t in = g.nodes_[self].inputs[0];
    auto& gx = g.grad_of(in);
    const auto& go = g.nodes_[self].grad;
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < width; ++i)
        gx[(o * v.mid + begin) * v.inner + i] += go[o * width + i];
  });
}

template <class T>
Var Graph<T>::concat(Var a, Var b) {
  const auto va = axis1(value(a).shape(), "concat");
  const auto vb = axis1(value(b).shape(), "concat");
  MAD_REQUIRE(va.outer == vb.outer && va.inner == vb.inner,
              "concat: shapes differ outside axis 1");
  Shape shape = value(a).shape();
  shape[1] = va.mid + vb.mid;
  Tensor<T> out(shape);
  const std::size_t wa = va.mid * va.inner, wb = vb.mid * vb.inner;
  for (std::size_t o = 0; o < va.outer; ++o) {
    std::copy_n(value(a).data() + o * wa, wa, out.data() + o * (wa + wb));
    std::copy_n(value(b).data() + o * wb, wb, out.data() + o * (wa + wb) + wa);
  }
  return push(std::move(out), "concat", {a.id, b.id},
              [outer = va.outer, wa, wb](Graph& g, std::size_t self) {
                const auto in = g.nodes_[self].inputs;
                const auto& go = g.nodes_[self].grad;
                if (g.wants_grad(in[0])) {
                  auto& ga = g.grad_of(in[0]);
                  for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < wa; ++i) ga[o * wa + i] += go[o * (wa + wb) + i];
                }
                if (g.wants_grad(in[1])) {
                  auto& gb = g.grad_of(in[1]);
                  for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < wb; ++i)
                      gb[o * wb + i] += go[o * (wa + wb) + wa + i];
                }
              });
}

template <class T>
Var Graph<T>::reshape(Var x, Shape shape) {
  Tensor<T> out = value(x).reshaped(std::move(shape));
  return push(std::move(out), "reshape", {x.id}, [](Graph& g, std::size_t self) {
    const std::size_t in = g.nodes_[self].inputs[0];
    auto& gx = g.grad_of(in);
    const auto& go = g.nodes_[self].grad;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go[i];
  });
}

// ---- imaging -------------------------------------------------------------

template <class T>
Var Graph<T>::conv2d(Var x, Var weight) {
  const auto& xs = value(x);
  const auto& ws = value(weight);
  MAD_REQUIRE(xs.rank() == 4 && ws.rank() == 4 && ws.dim(1) == xs.dim(1) &&
                  ws.dim(2) == ws.dim(3) && ws.dim(2) % 2 == 1,
              "conv2d: bad shapes " + shape_string(xs.shape()) + " * " + shape_string(ws.shape()));
  const kernels::ConvShape cs{xs.dim(0), xs.dim(1), xs.dim(2), xs.dim(3), ws.dim(0), ws.dim(2)};
  Tensor<T> out(Shape{cs.batch, cs.out_channels, cs.height, cs.width});
  kernels::conv2d_forward(cs, xs.data(), ws.data(), out.data());
  return push(std::move(out), "conv2d", {x.id, weight.id}, [cs](Graph& g, std::size_t self) {
    const auto in = g.nodes_[self].inputs;
    T* dx = g.wants_grad(in[0]) ? g.grad_of(in[0]).data() : nullptr;
    T* dw = g.wants_grad(in[1]) ? g.grad_of(in[1]).data() : nullptr;
    kernels::conv2d_backward(cs, g.nodes_[in[0]].value.data(), g.nodes_[in[1]].value.data(),
                             g.nodes_[self].grad.data(), dx, dw);
  });
}

template <class T>
Var Graph<T>::avg_pool2(Var x) {
  const auto& xs = value(x);
  MAD_REQUIRE(xs.rank() == 4 && xs.dim(2) % 2 == 0 && xs.dim(3) % 2 == 0,
              "avg_pool2: expected NCHW with even spatial size");
  const std::size_t planes = xs.dim(0) * xs.dim(1), H = xs.dim(2), W = xs.dim(3);
  Tensor<T> out(Shape{xs.dim(0), xs.dim(1), H / 2, W / 2});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < H / 2; ++y)
      for (std::size_t x2 = 0; x2 < W / 2; ++x2) {
        const T* src = xs.data() + p * H * W + 2 * y * W + 2 * x2;
        out[(p * (H / 2) + y) * (W / 2) + x2] = T(0.25) * (src[0] + src[1] + src[W] + src[W + 1]);
      }
  return push(std::move(out), "avg_pool2", {x.id}, [planes, H, W](Graph& g, std::size_t self) {
    const std::size_t in = g.nodes_[self].inputs[0];
    auto& gx = g.grad_of(in);
    const auto& go = g.nodes_[self].grad;
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x2 = 0; x2 < W; ++x2)
          gx[(p * H + y) * W + x2] += T(0.25) * go[(p * (H / 2) + y / 2) * (W / 2) + x2 / 2];
  });
}

template <class T>
Var Graph<T>::upsample2(Var x) {
  const auto& xs = value(x);
  MAD_REQUIRE(xs.rank() == 4, "upsample2: expected NCHW");
  const std::size_t planes = xs.dim(0) * xs.dim(1), H = xs.dim(2), W = xs.dim(3);
  Tensor<T> out(Shape{xs.dim(0), xs.dim(1), 2 * H, 2 * W});
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < 2 * H; ++y)
      for (std::size_t x2 = 0; x2 < 2 * W; ++x2)
        out[(p * 2 * H + y) * 2 * W + x2] = xs[(p * H + y / 2) * W + x2 / 2];
  return push(std::move(out), "upsample2", {x.id}, [planes, H, W](Graph& g, std::size_t self) {
    const std::size_t in = g.nodes_[self].inputs[0];
    auto& gx = g.grad_of(in);
    const auto& go = g.nodes_[self].grad;
    for (std::size_t p = 0; p < planes; ++p)
      for (std::size_t y = 0; y < 2 * H; ++y)
        for (std::size_t x2 = 0; x2 < 2 * W; ++x2)
          gx[(p * H + y / 2) * W + x2 / 2] += go[(p * 2 * H + y) * 2 * W + x2];
  });
}

template class Graph<float>;
template class Graph<double>;

}  // namespace mad
