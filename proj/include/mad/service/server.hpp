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

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "json.hpp"
#include "mad/service/config.hpp"
#include "mad/service/pipeline.hpp"

namespace httplib {
class Server;
}

namespace mad::service {

struct Response {
  int status = 200;
  nlohmann::ordered_json body;
};

/// Request handlers behind the HTTP API. Models are immutable once loaded;
/// each request owns its optimization state, so handlers may run concurrently.
class Service {
 public:
  explicit Service(RunConfig config);
  ~Service();

  /// Loads the dataset, normalizer, VAE and (if present) diffusion checkpoint.
  void load();
  bool ready() const noexcept { return ready_.load(); }

  Response health() const;
  Response features() const;
  Response sample(const std::string& id) const;
  Response edit(const std::string& body) const;

 private:
  struct Models;
  RunConfig config_;
  std::unique_ptr<Models> models_;
  std::atomic<bool> ready_{false};
  std::atomic<bool> failed_{false};
  mutable std::mutex error_mutex_;
  std::string load_error_;
};

/// Routes /api/* onto `service`. Returns a configured, not yet listening server.
std::unique_ptr<httplib::Server> make_http_server(Service& service);

/// Listens on host:port, loading checkpoints in the background (503 until ready).
void serve(const RunConfig& config, const std::string& host, int port);

}  // namespace mad::service
