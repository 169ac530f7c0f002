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

#ifndef VARUNA_CLI_CONFIG_H_
#define VARUNA_CLI_CONFIG_H_

#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "json.hpp"
#include "varuna/workloads/harness.h"
#include "varuna/workloads/microbench.h"
#include "varuna/workloads/tx_workload.h"

namespace varuna::cli {

using failover::PolicyKind;

enum class WorkloadKind { kMicrobench, kTx };

struct ExperimentConfig {
  // Links, policy, engine knobs, failures and seed.
  workloads::RunSetup setup;
  WorkloadKind workload = WorkloadKind::kMicrobench;
  workloads::MicrobenchSpec microbench;
  workloads::TxWorkloadSpec tx;
  // Policies run by `compare`.
  std::vector<PolicyKind> compare_policies;
  std::optional<std::string> metrics_path;
  std::optional<std::string> trace_path;
  std::optional<std::string> timeseries_path;
};

// Parses and validates a config document. Errors are InvalidArgument with
// the offending field path first, e.g. "fabric.links[1].mtu: must be > 0".
absl::StatusOr<ExperimentConfig> ParseConfig(const nlohmann::json& doc);
absl::StatusOr<ExperimentConfig> LoadConfig(const std::string& path);

}  // namespace varuna::cli

#endif  // VARUNA_CLI_CONFIG_H_
