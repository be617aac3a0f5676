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

#ifndef PREFLOOP_CLI_H_
#define PREFLOOP_CLI_H_

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace prefloop {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kEnvPrefix = "PREFLOOP_";

// Looks up an environment variable; injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

// Defaults for every configuration key: the session config keys plus
// store_dir, host and port.
nlohmann::json default_cli_config();

// Environment variable for a dotted key: "backend.timeout_ms" ->
// "PREFLOOP_BACKEND_TIMEOUT_MS".
std::string env_var_for(const std::string& dotted_key);

// Every leaf key of default_cli_config() in dotted form.
std::vector<std::string> cli_config_keys();

// Merges defaults < file < environment. Environment values are parsed as
// JSON when possible and taken as strings otherwise. Throws kConfigError.
nlohmann::json merge_cli_config(const std::optional<std::string>& config_path,
                                const EnvLookup& env);

// Full subcommand paths ("session new", "sim run", ...).
std::vector<std::string> cli_commands();

struct CliStreams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

// Parses and runs one command line (args excludes the program name).
int run_cli(const std::vector<std::string>& args, CliStreams io, const EnvLookup& env);

}  // namespace prefloop

#endif  // PREFLOOP_CLI_H_
