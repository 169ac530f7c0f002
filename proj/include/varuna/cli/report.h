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

#ifndef VARUNA_CLI_REPORT_H_
#define VARUNA_CLI_REPORT_H_

#include <string>
#include <vector>

#include "json.hpp"
#include "varuna/sim/fabric.h"
#include "varuna/sim/execution_trace.h"
#include "varuna/workloads/microbench.h"
#include "varuna/workloads/tx_workload.h"

namespace varuna::cli {

inline constexpr int kReportSchemaVersion = 1;

// One run as {"seed", "scalars": {...}, "latency": {...}, "timeseries"}.
// Missing measurements are null.
nlohmann::json RunToJson(uint64_t seed, const workloads::MicrobenchResult& r);
nlohmann::json RunToJson(uint64_t seed, const workloads::TxReport& r);

// For every scalar in `runs`: {"n", "mean", "p50", "p99"} over the runs
// where it is not null.
nlohmann::json Aggregate(const std::vector<nlohmann::json>& runs);

// Summary of one key: {"n", "mean", "p50", "p99"}.
nlohmann::json Summarize(std::vector<double> values);

// "time_bin_ns,bytes_committed,policy" rows.
std::string TimeseriesCsv(const std::vector<std::pair<std::string, workloads::RunMetrics>>& series);

// One JSON object per fabric dispatch ({time, kind, link, packet_id,
// result}) plus one per commit (kind "commit"), ordered by time.
std::string TraceNdjson(const sim::Fabric& fabric, const sim::ExecutionTrace& trace,
                        const std::string& policy, uint64_t seed);

}  // namespace varuna::cli

#endif  // VARUNA_CLI_REPORT_H_
