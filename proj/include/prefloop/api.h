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

#ifndef PREFLOOP_API_H_
#define PREFLOOP_API_H_

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "prefloop/error.h"
#include "prefloop/session.h"

namespace prefloop {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// One row of the API/CLI parity table.
struct ApiRoute {
  std::string_view method;
  std::string_view path;         // "{id}" marks the session id segment
  std::string_view cli_command;  // e.g. "session feedback"
};

const std::vector<ApiRoute>& api_routes();

// HTTP status used for a domain error.
int http_status_for(ErrorCode code);
nlohmann::json error_body(const Error& error);

// Routes one request. Never throws; failures become JSON error bodies of the
// form {"error": {"code", "message", "subject"}}.
ApiResponse handle_api_request(SessionManager& manager, std::string_view method,
                               std::string_view path, std::string_view body);

}  // namespace prefloop

#endif  // PREFLOOP_API_H_
