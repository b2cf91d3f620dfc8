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
#include <string_view>
#include <vector>

#include "mad/numerics/tensor.hpp"

namespace mad {

/// Handle to a node of a Graph. Only meaningful for the graph that issued it.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
};

/// Tape-based reverse-mode differentiation over dense tensors.
///
/// Nodes are appended in evaluation order, so reverse creation order is a
/// valid topological order for backward(). Every primitive checks its output
/// for non-finite values and throws NumericFault naming itself.
///
/// Axis conventions: "axis 1" ops (add_bias, slice, concat, row_sum) view a
/// tensor of shape [d0, d1, rest...] as [outer=d0, mid=d1, inner=prod(rest)],
/// which covers both [batch, features] matrices and NCHW image batches.
template <class T>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  /// Input that does not receive a gradient.
  Var constant(Tensor<T> value);
  /// Leaf that receives a gradient in backward().
  Var leaf(Tensor<T> value);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  /// Gradient accumulated by the last backward(); empty if none flowed here.
  const Tensor<T>& grad(Var v) const { return nodes_.at(v.id).grad; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::string_view op_name(Var v) const { return nodes_.at(v.id).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// d(root)/d(node) for every node upstream of a scalar root. Values are
  /// left untouched; calling again recomputes gradients from scratch.
  void backward(Var root);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, T factor);
  Var add_scalar(Var a, T offset);
  Var square(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  /// Gradient is zero where the input lies outside [lo, hi].
  Var clamp(Var a, T lo, T hi);

  Var sum(Var a);
  Var mean(Var a);
  /// [d0, ...] -> [d0]: sum of everything but the leading axis.
  Var row_sum(Var a);

  /// x[d0, d1, ...] + bias[d1] broadcast over the other axes.
  Var add_bias(Var x, Var bias);
  /// x[n, c, ...] + e[n, c] broadcast over the trailing axes.
  Var add_channel(Var x, Var e);
  /// x[n, c, ...] * s[n, c] broadcast over the trailing axes.
  Var mul_channel(Var x, Var s);

  /// [n, k] x [k, m] -> [n, m].
  Var matmul(Var a, Var b);
  Var slice(Var x, std::size_t begin, std::size_t end);
  Var concat(Var a, Var b);
  Var reshape(Var x, Shape shape);

  /// Stride-1 "same" convolution; x is NCHW, weight is [cout, cin, k, k].
  Var conv2d(Var x, Var weight);
  Var avg_pool2(Var x);
  Var upsample2(Var x);

 private:
  using Backward = std::function<void(Graph&, std::size_t)>;

  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    Backward backward;
    std::vector<std::size_t> inputs;
    bool requires_grad = false;
    std::string_view op;
  };

  Var push(Tensor<T> value, std::string_view op, std::vector<std::size_t> inputs, Backward fn);
  Node& node(Var v) { return nodes_.at(v.id); }
  Tensor<T>& grad_of(std::size_t id);
  bool wants_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  template <class Fwd, class Deriv>
  Var unary(Var a, std::string_view op, Fwd fwd, Deriv deriv);

  std::vector<Node> nodes_;
};

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mad
