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

#include "prefloop/http_backends.h"

#include <cstdlib>
#include <future>

#include "httplib.h"
#include "prefloop/error.h"
#include "prefloop/rng.h"

namespace prefloop {

using json = nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw Error(ErrorCode::kConfigError, "backend url needs a scheme: '" + url + "'");
  }
  const auto path = url.find('/', scheme + 3);
  Endpoint e{url.substr(0, path), path == std::string::npos ? "" : url.substr(path)};
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

class JsonClient {
 public:
  JsonClient(const std::string& base_url, const BackendConfig& cfg)
      : endpoint_(split_url(base_url)), cfg_(cfg) {
    if (!cfg.auth_token_env.empty()) {
      if (const char* token = std::getenv(cfg.auth_token_env.c_str())) token_ = token;
    }
  }

  // Returns the response body of a 2xx reply.
  std::string post(const std::string& route, const json& payload) const {
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      httplib::Client client(endpoint_.origin);
      const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      httplib::Headers headers;
      if (!token_.empty()) headers.emplace(cfg_.auth_header, token_);
      auto res = client.Post(endpoint_.prefix + route, headers, payload.dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::kBackendProtocolError,
                    endpoint_.origin + endpoint_.prefix + route + " returned status " +
                        std::to_string(res->status));
      }
      return res->body;
    }
    throw Error(ErrorCode::kBackendUnreachable,
                endpoint_.origin + endpoint_.prefix + route + ": " + last_error);
  }

 private:
  Endpoint endpoint_;
  BackendConfig cfg_;
  std::string token_;
};

// Runs fn(i) for every index concurrently and returns results in order. The
// first failure (by index) is rethrown after all tasks finish.
template <typename T, typename Fn>
std::vector<T> fan_out(std::size_t n, Fn fn) {
  std::vector<std::future<T>> futures;
  futures.reserve(n);
  for (std::size_t i = 0; i < n; ++i) futures.push_back(std::async(std::launch::async, fn, i));
  std::vector<T> out;
  std::exception_ptr failure;
  for (auto& f : futures) {
    try {
      out.push_back(f.get());
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

class HttpGenerationBackend : public GenerationBackend {
 public:
  explicit HttpGenerationBackend(const BackendConfig& cfg) : client_(cfg.generation_url, cfg) {}

  std::vector<ImageRef> generate(std::span<const PromptSpec> prompts, uint64_t seed) override {
    return fan_out<ImageRef>(prompts.size(), [&](std::size_t i) {
      const PromptSpec& p = prompts[i];
      const json payload{{"positive_prompt", p.positive_prompt},
                         {"negative_prompt", p.negative_prompt},
                         {"seed", derive_seed(seed, {i})}};
      const std::string body = client_.post("/generate", payload);
      try {
        const json reply = json::parse(body);
        return ImageRef{reply.at("image_id").get<std::string>(), reply.at("uri").get<std::string>(),
                        p.id, std::nullopt};
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kBackendProtocolError,
                    std::string("generation reply: ") + e.what());
      }
    });
  }

 private:
  JsonClient client_;
};

class HttpExtractionBackend : public ExtractionBackend {
 public:
  HttpExtractionBackend(const BackendConfig& cfg, std::shared_ptr<const FeatureRepository> repo)
      : client_(cfg.extraction_url, cfg),
        repo_(std::move(repo)),
        instructions_(build_extraction_prompt(*repo_)) {}

  std::vector<ImageFeatureProfile> extract(std::span<const ImageRef> images) override {
    return fan_out<ImageFeatureProfile>(images.size(), [&](std::size_t i) {
      const std::string raw =
          client_.post("/extract", json{{"uri", images[i].uri}, {"instructions", instructions_}});
      return parse_extraction_response(raw, *repo_, images[i].id);
    });
  }

 private:
  JsonClient client_;
  std::shared_ptr<const FeatureRepository> repo_;
  std::string instructions_;
};

class HttpCompletionClient : public TextCompletionClient {
 public:
  explicit HttpCompletionClient(const BackendConfig& cfg) : client_(cfg.completion_url, cfg) {}

  std::string complete(const std::string& instructions) override {
    return client_.post("/complete", json{{"instructions", instructions}});
  }

 private:
  JsonClient client_;
};

}  // namespace

Backends make_http_backends(const BackendConfig& cfg,
                            std::shared_ptr<const FeatureRepository> repo) {
  validate_backend_config(cfg);
  Backends out;
  out.generation = std::make_shared<HttpGenerationBackend>(cfg);
  out.extraction = std::make_shared<HttpExtractionBackend>(cfg, repo);
  if (!cfg.completion_url.empty()) {
    out.completion = std::make_shared<HttpCompletionClient>(cfg);
  } else {
    out.completion = std::make_shared<EchoCompletionClient>();
  }
  return out;
}

BackendFactory default_backend_factory(std::shared_ptr<const FeatureRepository> repo) {
  return [repo](const BackendConfig& cfg) {
    if (cfg.kind == BackendKind::kHttp) return make_http_backends(cfg, repo);
    return make_mock_backends(repo, cfg.p_noise);
  };
}

}  // namespace prefloop
