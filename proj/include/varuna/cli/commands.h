// Copyright 2026 The Varuna-Sim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VARUNA_CLI_COMMANDS_H_
#define VARUNA_CLI_COMMANDS_H_

#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "varuna/cli/config.h"

namespace varuna::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitInvariantViolation = 3;

struct CommandOutput {
  nlohmann::json report;
  std::string timeseries_csv;
  std::string trace_ndjson;  // filled when requested
  std::vector<std::string> invariant_violations;
};

// Runs `command` ("microbench", "txbench" or "compare") for seeds
// config.seed, config.seed + 1, ..., config.seed + seeds - 1. The trace of
// the first seed (per policy) is captured when `want_trace` is set.
// InvalidArgument means the config does not fit the command.
absl::StatusOr<CommandOutput> RunCommand(const std::string& command,
                                         const ExperimentConfig& config,
                                         uint32_t seeds, bool want_trace);

// Entry point of the varuna-sim binary; returns the process exit code.
int Main(int argc, char** argv);

}  // namespace varuna::cli

#endif  // VARUNA_CLI_COMMANDS_H_
