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

#ifndef VARUNA_WORKLOADS_TX_WORKLOAD_H_
#define VARUNA_WORKLOADS_TX_WORKLOAD_H_

#include <cstdint>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "varuna/workloads/harness.h"

namespace varuna::workloads {

enum class KeySkew { kUniform, kZipf };

std::string_view KeySkewName(KeySkew skew);
absl::StatusOr<KeySkew> ParseKeySkew(std::string_view name);

// Lock-based read-modify-write transactions. Each row is a lock word and a
// counter. A transaction locks a row with CAS(0 -> token), reads the
// counter, writes counter + 1, and unlocks with CAS(token -> 0). A failed
// lock attempt aborts and retries after a backoff.
struct TxWorkloadSpec {
  uint32_t table_size = 64;
  uint32_t clients = 8;
  KeySkew skew = KeySkew::kUniform;
  double zipf_s = 0.99;
  // Clients stop starting transactions after this time.
  Nanos duration = 5 * sim::kMillisecond;
  Nanos backoff = 2 * sim::kMicrosecond;
  Nanos bin_ns = 100 * sim::kMicrosecond;
};

absl::Status ValidateTx(const TxWorkloadSpec& spec);

struct TxReport {
  uint64_t committed = 0;
  uint64_t aborted = 0;
  // Unlock that found a different token, or a lock left held at the end.
  uint64_t lock_token_corruption = 0;
  // Committed increments missing from the final counters.
  uint64_t lost_updates = 0;
  // Increments beyond the committed count, plus duplicate commits the
  // oracle found.
  uint64_t double_applied = 0;
  uint64_t inconsistencies = 0;
  // Clients that stopped on an error completion.
  uint64_t failed_clients = 0;
  // Committed transactions per bin_ns bin.
  std::vector<uint64_t> tx_timeseries;
  // Longest wait between consecutive committed transactions ending after
  // the first failure; 0 without failures.
  Nanos longest_gap_ns = 0;
  RunMetrics metrics;
};

absl::StatusOr<TxReport> RunTxWorkload(const TxWorkloadSpec& spec,
                                       const RunSetup& setup,
                                       const RunHook& hook = {});

}  // namespace varuna::workloads

#endif  // VARUNA_WORKLOADS_TX_WORKLOAD_H_
