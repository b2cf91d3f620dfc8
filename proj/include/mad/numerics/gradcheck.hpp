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

#include <functional>
#include <vector>

#include "mad/numerics/autodiff.hpp"

namespace mad {

/// Builds a scalar loss on `graph` from the given parameter nodes.
using ScalarBuilder = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

/// Max over coordinates of |autodiff - central difference| /
/// max(|central difference|, floor).
double finite_diff_check(const ScalarBuilder& f, const std::vector<Tensor<double>>& params,
                         double h = 1e-5, double floor = 1e-8);

}  // namespace mad
