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
#include <string>
#include <vector>

#include "mad/core/rng.hpp"
#include "mad/numerics/autodiff.hpp"

namespace mad {

/// Named, ordered parameter tensors owned by one model.
template <class T>
class ParamStore {
 public:
  std::size_t add(std::string name, Tensor<T> init) {
    names_.push_back(std::move(name));
    values_.push_back(std::move(init));
    return values_.size() - 1;
  }

  std::size_t size() const noexcept { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  Tensor<T>& value(std::size_t i) { return values_.at(i); }
  const Tensor<T>& value(std::size_t i) const { return values_.at(i); }
  std::vector<Tensor<T>>& values() noexcept { return values_; }
  const std::vector<Tensor<T>>& values() const noexcept { return values_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : values_) n += t.size();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
};

/// Places a ParamStore's tensors on a graph on first use. Trainable bindings
/// create gradient leaves; frozen ones create constants.
template <class T>
class ParamBinding {
 public:
  ParamBinding(Graph<T>& graph, const ParamStore<T>& store, bool trainable)
      : graph_(graph), store_(store), trainable_(trainable), vars_(store.size()), bound_(store.size()) {}

  Graph<T>& graph() noexcept { return graph_; }

  Var operator()(std::size_t index) {
    if (!bound_.at(index)) {
      vars_[index] = trainable_ ? graph_.leaf(store_.value(index)) : graph_.constant(store_.value(index));
      bound_[index] = true;
    }
    return vars_[index];
  }

  /// Uses an existing graph node for slot `index`.
  void bind(std::size_t index, Var v) {
    vars_.at(index) = v;
    bound_[index] = true;
  }

  /// Gradients aligned with the store; zero for parameters never used.
  std::vector<Tensor<T>> gradients() const {
    std::vector<Tensor<T>> out;
    out.reserve(store_.size());
    for (std::size_t i = 0; i < store_.size(); ++i) {
      if (bound_[i] && !graph_.grad(vars_[i]).empty())
        out.push_back(graph_.grad(vars_[i]));
      else
        out.emplace_back(store_.value(i).shape());
    }
    return out;
  }

 private:
  Graph<T>& graph_;
  const ParamStore<T>& store_;
  bool trainable_;
  std::vector<Var> vars_;
  std::vector<bool> bound_;
};

enum class Activation { none, tanh, relu };

template <class T>
Var activate(Graph<T>& g, Var x, Activation act) {
  switch (act) {
    case Activation::tanh: return g.tanh(x);
    case Activation::relu: return g.relu(x);
    case Activation::none: break;
  }
  return x;
}

/// Fully connected layer y = x W + b with W stored [in, out].
struct Linear {
  std::size_t weight = 0, bias = 0;
  std::size_t in = 0, out = 0;

  template <class T>
  static Linear create(ParamStore<T>& store, const std::string& name, std::size_t in,
                       std::size_t out, Rng& rng, double gain = 1.0) {
    Tensor<T> w(Shape{in, out});
    const double std_dev = gain / std::sqrt(static_cast<double>(in));
    for (auto& v : w.vec()) v = static_cast<T>(std_dev * rng.normal());
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = store.add(name + ".weight", std::move(w));
    l.bias = store.add(name + ".bias", Tensor<T>(Shape{out}));
    return l;
  }

  template <class T>
  Var operator()(ParamBinding<T>& p, Var x) const {
    auto& g = p.graph();
    return g.add_bias(g.matmul(x, p(weight)), p(bias));
  }
};

/// Stride-1 same-padded convolution with per-channel bias.
struct Conv2d {
  std::size_t weight = 0, bias = 0;

  template <class T>
  static Conv2d create(ParamStore<T>& store, const std::string& name, std::size_t in,
                       std::size_t out, std::size_t ksize, Rng& rng, double gain = 1.0) {
    Tensor<T> w(Shape{out, in, ksize, ksize});
    const double std_dev = gain / std::sqrt(static_cast<double>(in * ksize * ksize));
    for (auto& v : w.vec()) v = static_cast<T>(std_dev * rng.normal());
    Conv2d c;
    c.weight = store.add(name + ".weight", std::move(w));
    c.bias = store.add(name + ".bias", Tensor<T>(Shape{out}));
    return c;
  }

  template <class T>
  Var operator()(ParamBinding<T>& p, Var x) const {
    auto& g = p.graph();
    return g.add_bias(g.conv2d(x, p(weight)), p(bias));
  }
};

/// Stack of Linear layers with a shared hidden activation and no activation
/// on the output layer.
struct Mlp {
  std::vector<Linear> layers;
  Activation hidden = Activation::tanh;

  template <class T>
  static Mlp create(ParamStore<T>& store, const std::string& name,
                    const std::vector<std::size_t>& widths, Activation hidden, Rng& rng) {
    Mlp m;
    m.hidden = hidden;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      m.layers.push_back(Linear::create(store, name + "." + std::to_string(i), widths[i],
                                        widths[i + 1], rng));
    return m;
  }

  template <class T>
  Var operator()(ParamBinding<T>& p, Var x) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      x = layers[i](p, x);
      if (i + 1 < layers.size()) x = activate(p.graph(), x, hidden);
    }
    return x;
  }
};

}  // namespace mad
