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

#ifndef PREFLOOP_ERROR_H_
#define PREFLOOP_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace prefloop {

enum class ErrorCode {
  kParseError,
  kValidationError,
  kUnknownFeature,
  kUnknownValue,
  kKindMismatch,
  kDomainError,
  kExtractionFormatError,
  kIllegalValueError,
  kNotMockImage,
  kEmptyGroup,
  kInsufficientData,
  kEmptyDomain,
  kAssemblyFormatError,
  kHardConstraintViolation,
  kBackendUnreachable,
  kBackendProtocolError,
  kConfigError,
  kWrongPhase,
  kUnknownImage,
  kRoundLimitReached,
  kStoreError,
  kNotFound,
  kSchemaVersionMismatch,
};

// Stable name used in JSON error payloads and CLI output, e.g. "WrongPhase".
std::string_view error_code_name(ErrorCode code);

// Every domain failure in the library is raised as an Error. `subject` names
// the offending entity (feature id, image id, session id) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string subject = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

}  // namespace prefloop

#endif  // PREFLOOP_ERROR_H_
