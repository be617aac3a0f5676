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

#include "prefloop/error.h"

namespace prefloop {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kUnknownFeature: return "UnknownFeature";
    case ErrorCode::kUnknownValue: return "UnknownValue";
    case ErrorCode::kKindMismatch: return "KindMismatch";
    case ErrorCode::kDomainError: return "DomainError";
    case ErrorCode::kExtractionFormatError: return "ExtractionFormatError";
    case ErrorCode::kIllegalValueError: return "IllegalValueError";
    case ErrorCode::kNotMockImage: return "NotMockImage";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kInsufficientData: return "InsufficientData";
    case ErrorCode::kEmptyDomain: return "EmptyDomain";
    case ErrorCode::kAssemblyFormatError: return "AssemblyFormatError";
    case ErrorCode::kHardConstraintViolation: return "HardConstraintViolation";
    case ErrorCode::kBackendUnreachable: return "BackendUnreachable";
    case ErrorCode::kBackendProtocolError: return "BackendProtocolError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kWrongPhase: return "WrongPhase";
    case ErrorCode::kUnknownImage: return "UnknownImage";
    case ErrorCode::kRoundLimitReached: return "RoundLimitReached";
    case ErrorCode::kStoreError: return "StoreError";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kSchemaVersionMismatch: return "SchemaVersionMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string subject)
    : std::runtime_error(message), code_(code), subject_(std::move(subject)) {}

}  // namespace prefloop
