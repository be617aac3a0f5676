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

#include "prefloop/api.h"

#include <optional>

namespace prefloop {

using json = nlohmann::json;

const std::vector<ApiRoute>& api_routes() {
  static const std::vector<ApiRoute> routes = {
      {"POST", "/sessions", "session new"},
      {"GET", "/sessions/{id}", "session show"},
      {"POST", "/sessions/{id}/feedback", "session feedback"},
      {"POST", "/sessions/{id}/next", "session next"},
      {"POST", "/sessions/{id}/regenerate", "session regenerate"},
      {"GET", "/sessions/{id}/preferences", "session prefs"},
      {"DELETE", "/sessions/{id}", "session close"},
  };
  return routes;
}

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kWrongPhase:
    case ErrorCode::kRoundLimitReached:
      return 409;
    case ErrorCode::kBackendUnreachable:
    case ErrorCode::kBackendProtocolError:
    case ErrorCode::kExtractionFormatError:
    case ErrorCode::kIllegalValueError:
    case ErrorCode::kAssemblyFormatError:
    case ErrorCode::kHardConstraintViolation:
    case ErrorCode::kNotMockImage:
      return 502;
    case ErrorCode::kStoreError:
    case ErrorCode::kSchemaVersionMismatch:
      return 500;
    default:
      return 400;
  }
}

json error_body(const Error& error) {
  return json{{"error",
               {{"code", error_code_name(error.code())},
                {"message", error.what()},
                {"subject", error.subject()}}}};
}

namespace {

json candidates_payload(const SessionRecord& s) {
  return json{{"session_id", s.session_id},
              {"phase", phase_name(s.phase)},
              {"round_index", s.rounds.size()},
              {"candidates", candidates_view(s)}};
}

json parse_body(std::string_view body) {
  if (body.find_first_not_of(" \t\r\n") == std::string_view::npos) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) throw Error(ErrorCode::kParseError, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParseError, std::string("request body: ") + e.what());
  }
}

std::map<std::string, Annotation> parse_annotations(const json& body) {
  auto it = body.find("annotations");
  if (it == body.end() || !it->is_object()) {
    throw Error(ErrorCode::kParseError, "feedback body needs an 'annotations' object");
  }
  std::map<std::string, Annotation> out;
  for (const auto& [image_id, label] : it->items()) {
    if (!label.is_string()) {
      throw Error(ErrorCode::kParseError, "annotation for '" + image_id + "' must be a string",
                  image_id);
    }
    auto a = parse_annotation(label.get<std::string>());
    if (!a) {
      throw Error(ErrorCode::kParseError,
                  "annotation must be liked, disliked or unlabeled, got '" +
                      label.get<std::string>() + "'",
                  image_id);
    }
    out[image_id] = *a;
  }
  return out;
}

std::vector<std::string_view> split_path(std::string_view path) {
  if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    const auto slash = path.find('/');
    if (slash != 0) parts.push_back(path.substr(0, slash));
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  return parts;
}

ApiResponse route(SessionManager& manager, std::string_view method, std::string_view path,
                  std::string_view raw_body) {
  const auto parts = split_path(path);
  if (parts.empty() || parts[0] != "sessions" || parts.size() > 3) {
    return {404, {{"error", {{"code", "NotFound"}, {"message", "no such route"}, {"subject", path}}}}};
  }
  if (parts.size() == 1) {
    if (method != "POST") return {405, {{"error", {{"code", "MethodNotAllowed"}, {"message", "use POST"}, {"subject", path}}}}};
    json body = parse_body(raw_body);
    const json& cfg_json = body.contains("config") ? body.at("config") : body;
    SessionRecord s = manager.create(session_config_from_json(cfg_json));
    return {201, candidates_payload(s)};
  }

  const std::string id(parts[1]);
  const std::string_view action = parts.size() == 3 ? parts[2] : std::string_view();
  if (action.empty()) {
    if (method == "GET") return {200, session_view(manager.get(id))};
    if (method == "DELETE") {
      SessionRecord s = manager.close(id);
      return {200, {{"ok", true}, {"session_id", s.session_id}, {"phase", phase_name(s.phase)}}};
    }
  } else if (action == "preferences" && method == "GET") {
    return {200, manager.preferences(id).to_json()};
  } else if (method == "POST") {
    if (action == "feedback") {
      SessionRecord s = manager.submit_feedback(id, parse_annotations(parse_body(raw_body)));
      return {200,
              {{"ok", true},
               {"session_id", s.session_id},
               {"phase", phase_name(s.phase)},
               {"round_index", s.rounds.size()},
               {"rounds_ingested", s.state.rounds_ingested()}}};
    }
    if (action == "next") return {200, candidates_payload(manager.advance(id))};
    if (action == "regenerate") return {200, candidates_payload(manager.regenerate(id))};
  }
  return {404, {{"error", {{"code", "NotFound"}, {"message", "no such route"}, {"subject", path}}}}};
}

}  // namespace

ApiResponse handle_api_request(SessionManager& manager, std::string_view method,
                               std::string_view path, std::string_view body) {
  try {
    return route(manager, method, path, body);
  } catch (const Error& e) {
    return {http_status_for(e.code()), error_body(e)};
  } catch (const json::exception& e) {
    return {400, error_body(Error(ErrorCode::kParseError, e.what()))};
  } catch (const std::exception& e) {
    return {500, {{"error", {{"code", "Internal"}, {"message", e.what()}, {"subject", ""}}}}};
  }
}

}  // namespace prefloop
