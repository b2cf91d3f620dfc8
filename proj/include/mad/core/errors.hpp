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
#include <optional>
#include <stdexcept>
#include <string>

namespace mad {

/// Precondition or shape contract broken by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A primitive produced a non-finite value.
class NumericFault : public std::runtime_error {
 public:
  explicit NumericFault(std::string op, std::optional<std::size_t> step = std::nullopt)
      : std::runtime_error(format(op, step)), op_(std::move(op)), step_(step) {}

  const std::string& op() const noexcept { return op_; }
  std::optional<std::size_t> step() const noexcept { return step_; }

 private:
  static std::string format(const std::string& op, std::optional<std::size_t> step) {
    std::string msg = "non-finite value produced by '" + op + "'";
    if (step) msg += " at step " + std::to_string(*step);
    return msg;
  }

  std::string op_;
  std::optional<std::size_t> step_;
};

class TrainingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A feature has zero variance after trimming.
class DegenerateFeature : public std::runtime_error {
 public:
  explicit DegenerateFeature(std::string feature)
      : std::runtime_error("feature '" + feature + "' has zero variance"),
        feature_(std::move(feature)) {}
  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

class UndefinedR2 : public std::domain_error {
 public:
  UndefinedR2() : std::domain_error("R^2 undefined: targets have zero variance") {}
};

/// Bad user configuration (CLI flags, JSON config, missing files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MAD_REQUIRE(cond, msg)                                        \
  do {                                                                \
    if (!(cond)) throw ::mad::ContractViolation(std::string(msg));    \
  } while (0)

}  // namespace mad
