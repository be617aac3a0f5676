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

#ifndef PREFLOOP_HTTP_BACKENDS_H_
#define PREFLOOP_HTTP_BACKENDS_H_

#include <memory>
#include <string>

#include "prefloop/model_adapters.h"
#include "prefloop/session.h"

namespace prefloop {

// JSON-over-HTTP clients for external model services. Requests within a
// batch run concurrently and results keep request order. A failed transport
// or 5xx reply is retried `retries` times; the final failure raises
// kBackendUnreachable, malformed replies raise kBackendProtocolError.
//
//   POST {generation_url}/generate {positive_prompt, negative_prompt, seed}
//        -> {image_id, uri}
//   POST {extraction_url}/extract {uri, instructions} -> raw model text
//   POST {completion_url}/complete {instructions} -> raw model text
Backends make_http_backends(const BackendConfig& cfg,
                            std::shared_ptr<const FeatureRepository> repo);

// Handles both backend kinds.
BackendFactory default_backend_factory(std::shared_ptr<const FeatureRepository> repo);

}  // namespace prefloop

#endif  // PREFLOOP_HTTP_BACKENDS_H_
