// Copyright 2026 The Prefloop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PREFLOOP_HTTP_SERVER_H_
#define PREFLOOP_HTTP_SERVER_H_

#include <memory>
#include <string>

#include "prefloop/session.h"

namespace prefloop {

// Serves the session API over HTTP with JSON bodies.
class ApiServer {
 public:
  explicit ApiServer(SessionManager& manager);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds and returns the port; port 0 picks a free one. Throws kConfigError
  // when binding fails.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prefloop

#endif  // PREFLOOP_HTTP_SERVER_H_
