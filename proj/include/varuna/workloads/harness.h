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

#ifndef VARUNA_WORKLOADS_HARNESS_H_
#define VARUNA_WORKLOADS_HARNESS_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

#include "absl/status/statusor.h"
#include "varuna/failover/engine.h"
#include "varuna/failover/world.h"
#include "varuna/workloads/oracle.h"

namespace varuna::workloads {

using failover::PolicyKind;
using sim::LinkId;

struct RandomFailures {
  uint32_t count = 0;
  Nanos window_start = 0;
  Nanos window_end = 0;
  std::vector<LinkId> links;  // drawn uniformly; empty means link 0
  // Flap for this long instead of staying down.
  std::optional<Nanos> flap_recover_after;
};

struct FailurePlan {
  std::vector<sim::FailureEvent> fixed;
  std::optional<RandomFailures> random;
};

// Fixed events plus the seeded random ones, sorted by time.
std::vector<sim::FailureEvent> ExpandFailures(const FailurePlan& plan,
                                              uint64_t seed);

struct RunSetup {
  std::vector<sim::LinkConfig> links;
  transport::TransportConfig transport;
  PolicyKind policy = PolicyKind::kVaruna;
  failover::EngineConfig engine;
  FailurePlan failures;
  uint64_t seed = 1;
  // Keep per-packet fabric records for the NDJSON trace.
  bool record_fabric_trace = false;
};

// Two 25 Gbps links with 1 us propagation.
RunSetup DefaultSetup();

// One simulated run: the world, the engine under test, the injected
// failures, and the application's record of every operation.
class Harness {
 public:
  using ClientHandler = std::function<void(const failover::AppCompletion&)>;

  static absl::StatusOr<std::unique_ptr<Harness>> Create(
      const RunSetup& setup, uint32_t connections, uint64_t data_bytes);

  failover::World& world() { return *world_; }
  failover::Engine& engine() { return *engine_; }
  const std::vector<sim::FailureEvent>& failures() const { return failures_; }
  const std::vector<OpRecord>& ops() const { return ops_; }
  const RunSetup& setup() const { return setup_; }

  // Completions for `vqp` are forwarded to `h` after being recorded.
  void set_client(uint32_t vqp, ClientHandler h) { clients_[vqp] = std::move(h); }

  // Posts `batch` on `vqp`, assigning op_uids and recording each request.
  absl::Status Post(uint32_t vqp, std::vector<transport::WorkRequest> batch);

  const OpRecord& op(uint64_t op_uid) const { return ops_[index_.at(op_uid)]; }

 private:
  Harness() = default;
  void OnCompletion(const failover::AppCompletion& c);

  RunSetup setup_;
  std::unique_ptr<failover::World> world_;
  std::unique_ptr<failover::Engine> engine_;
  std::vector<sim::FailureEvent> failures_;
  std::vector<OpRecord> ops_;
  std::unordered_map<uint64_t, size_t> index_;
  std::map<uint32_t, ClientHandler> clients_;
  uint64_t next_uid_ = 1;
};

struct LatencySummary {
  uint64_t count = 0;
  double mean_ns = 0;
  Nanos p50_ns = 0;
  Nanos p99_ns = 0;
  Nanos max_ns = 0;
  // Counts per power-of-two bucket: bucket i holds [2^i, 2^(i+1)) ns.
  std::vector<uint64_t> log2_histogram;
};

LatencySummary SummarizeLatencies(std::vector<Nanos> samples);

struct RunMetrics {
  uint64_t ops_posted = 0;
  uint64_t ops_succeeded = 0;
  uint64_t ops_failed = 0;
  uint64_t unrecoverable = 0;
  uint64_t committed_app_bytes = 0;
  Nanos makespan_ns = 0;
  double throughput_gbps = 0;
  LatencySummary latency;
  uint64_t inline_log_packets = 0;
  uint64_t inline_log_bytes = 0;
  uint64_t non_idempotent_ops = 0;
  uint64_t read_ops = 0;

  uint64_t bytes_retransmitted = 0;
  uint64_t ops_retransmitted = 0;
  uint64_t qp_memory_bytes = 0;
  uint64_t log_memory_bytes = 0;

  // First injected failure, if any.
  std::optional<Nanos> failure_time;
  std::optional<Nanos> detection_time;
  std::optional<Nanos> recovery_duration_ns;
  std::optional<Nanos> first_resume_time_ns;
  uint64_t in_flight_at_failure = 0;
  uint64_t post_failure_ops = 0;
  std::optional<double> post_failure_ratio;
  uint64_t in_flight_bytes = 0;
  uint64_t oracle_pre_failure_bytes = 0;
  uint64_t corner_case_write_bytes = 0;

  // Recovery-time classification against the oracle (Varuna only).
  uint64_t classified_ops = 0;
  uint64_t classification_matches = 0;
  uint64_t classification_exceptions = 0;
  uint64_t classification_mismatches = 0;

  uint64_t duplicate_commits = 0;
  uint64_t return_mismatches = 0;
  uint64_t missing_commits = 0;
  bool replay_matches = true;

  // Committed application bytes per bin.
  Nanos bin_ns = 0;
  std::vector<uint64_t> timeseries;

  uint64_t violations() const {
    return duplicate_commits + return_mismatches + missing_commits +
           (replay_matches ? 0 : 1);
  }
};

RunMetrics CollectMetrics(Harness& h, Nanos bin_ns);

// Called with the finished run, before it is torn down.
using RunHook = std::function<void(Harness&)>;

}  // namespace varuna::workloads

#endif  // VARUNA_WORKLOADS_HARNESS_H_
