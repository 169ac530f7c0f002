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

#ifndef VARUNA_FAILOVER_ENGINE_H_
#define VARUNA_FAILOVER_ENGINE_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "varuna/failover/world.h"

namespace varuna::failover {

using transport::Completion;
using transport::Opcode;

enum class PolicyKind { kNoBackup, kResend, kResendCache, kVaruna };

std::string_view PolicyName(PolicyKind kind);
absl::StatusOr<PolicyKind> ParsePolicy(std::string_view name);

struct DetectionConfig {
  // Port-state / completion-error path.
  bool port_event = true;
  Nanos port_event_delay = 20 * sim::kMicrosecond;
  // Control-channel heartbeat fallback.
  bool heartbeat = false;
  Nanos heartbeat_interval = sim::kMillisecond;
  uint32_t heartbeat_misses = 3;
};

struct DcqpPolicy {
  enum class Kind { kFixed, kRatio };
  Kind kind = Kind::kFixed;
  // Fixed: pool size per NIC. Ratio: one DCQP per `n` RC QPs.
  uint32_t n = 1;
};

// Pool size for `rc_count` RC QPs: Fixed(n) -> n; Ratio(1:k) ->
// max(1, ceil(rc_count / k)).
uint32_t DcqpPoolSize(const DcqpPolicy& policy, uint64_t rc_count);

struct EngineConfig {
  // Primary link first; failover walks this order.
  std::vector<LinkId> link_order;
  // Optional per-vqp primary link (vqp i uses home_links[i % size]);
  // defaults to link_order[0].
  std::vector<LinkId> home_links;
  DetectionConfig detection;
  Nanos remap_cost = sim::kMicrosecond;
  uint32_t log_capacity = 128;
  // When the request log is full: queue the post (true) or fail it.
  bool block_when_full = true;
  DcqpPolicy dcqp;
  bool extension_enabled = true;
  Nanos confirm_worker_period = 100 * sim::kMicrosecond;
  uint32_t faa_retry_limit = 16;
  uint64_t seed = 1;
};

enum class AppStatus {
  kSuccess,
  kError,                     // failed with no recovery possible
  kUnrecoverableReturnValue,  // executed, but its result cannot be recovered
};

struct AppCompletion {
  uint64_t wr_id = 0;
  uint32_t vqp = 0;
  uint64_t op_uid = 0;
  Opcode opcode = Opcode::kWrite;
  AppStatus status = AppStatus::kSuccess;
  std::optional<uint64_t> return_value;
  transport::Bytes data;
};

enum class Classification { kPreFailure, kPostFailure };

enum class CasOutcome { kSuccess, kFailed, kNotExecuted };

struct ClassifiedOp {
  uint64_t op_uid = 0;
  Opcode opcode = Opcode::kWrite;
  Classification classification = Classification::kPreFailure;
  std::optional<CasOutcome> cas_outcome;
  std::optional<uint64_t> recovered_value;
  uint32_t bytes = 0;
};

struct RecoveryReport {
  uint32_t vqp = 0;
  LinkId failed_link = 0;
  LinkId new_link = 0;
  Nanos started_at = 0;
  Nanos finished_at = 0;
  std::vector<uint64_t> retransmitted;
  std::vector<uint64_t> value_recovered;
  std::vector<ClassifiedOp> classified;
  // A second failure interrupted this recovery and it was retried.
  bool interrupted = false;
};

struct EngineMetrics {
  uint64_t bytes_retransmitted = 0;
  uint64_t ops_retransmitted = 0;
  uint64_t reads_reissued = 0;
  uint64_t unrecoverable = 0;
  uint64_t cas_confirms_posted = 0;
  uint64_t uid_translations = 0;
  uint64_t faa_retries = 0;
  uint64_t swap_backs = 0;
  std::vector<Nanos> detection_times;
  std::vector<RecoveryReport> recoveries;
};

// Common machinery for every recovery policy: virtual connection ids,
// failure detection, completion delivery, and accounting. Each policy
// decides what happens to in-flight requests when a link fails.
class Engine {
 public:
  using CompletionHandler = std::function<void(const AppCompletion&)>;

  Engine(World* world, EngineConfig config);
  virtual ~Engine() = default;
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  virtual PolicyKind kind() const = 0;

  // Creates `count` virtual connections whose primary RC QP sits on
  // link_order[0]. Connection setup is not timed.
  virtual absl::Status Setup(uint32_t count) = 0;

  // Posts a batch for `vqp`. May queue internally; failures surface as
  // completions, except a connection that is already dead.
  virtual absl::Status PostSend(uint32_t vqp,
                                std::vector<WorkRequest> wr_list) = 0;

  // Drains delivered completions for `vqp`, optionally only those whose
  // wr_id matches.
  std::vector<AppCompletion> PollCq(uint32_t vqp,
                                    std::optional<uint64_t> wr_id = {});

  // Called for every completion as it is delivered.
  void set_completion_handler(CompletionHandler h) { handler_ = std::move(h); }

  // The value the application observed for an operation, as if written to
  // its local result buffer (signaled or not).
  std::optional<uint64_t> ReturnValue(uint64_t op_uid) const;
  const std::map<uint64_t, uint64_t>& return_values() const {
    return return_values_;
  }

  // Bytes of requester-side logging state.
  virtual uint64_t LogMemoryBytes() const { return 0; }
  uint64_t QpMemoryBytes() const;

  // No queued, in-flight, or recovering work.
  virtual bool Idle() const = 0;

  // Link currently used by `vqp` (its active QP).
  virtual std::optional<LinkId> CurrentLink(uint32_t vqp) const = 0;

  const EngineMetrics& metrics() const { return metrics_; }
  const EngineConfig& config() const { return config_; }
  World* world() const { return world_; }
  uint32_t connection_count() const { return connections_; }

  bool LinkUsable(LinkId link) const { return !detected_down_.contains(link); }

  // Declares `link` failed now (idempotent). Fails its QPs and lets the
  // policy react.
  void DetectFailure(LinkId link);
  // Clears a detected failure if the link is up now.
  void DetectRecovery(LinkId link);

 protected:
  virtual void OnLinkDown(LinkId link) = 0;
  virtual void OnLinkUp(LinkId /*link*/) {}
  virtual void OnCompletion(const Completion& c) = 0;

  // Delivers completions pushed to `cq` from a fresh event, never inline.
  void WatchCq(uint32_t cq);
  void Deliver(AppCompletion c);
  void RecordReturnValue(uint64_t op_uid, uint64_t value) {
    return_values_[op_uid] = value;
  }

  // First usable link after `from` in the configured order, wrapping.
  std::optional<LinkId> NextLink(LinkId from) const;
  // Position of `link` in link_order (order.size() if absent).
  size_t LinkRank(LinkId link) const;
  LinkId HomeLink(uint32_t vqp) const;

  // rkey for `addr` on the NIC that owns `link`.
  uint32_t RkeyFor(uint64_t addr, LinkId link) const;
  // Rewrites every request's rkey for the NIC it is about to leave through.
  void RetargetRkeys(std::vector<WorkRequest>& wrs, LinkId link) const;

  static uint32_t RequestBytes(const WorkRequest& wr);

  World* world_;
  transport::Transport& transport_;
  sim::EventLoop& loop_;
  EngineConfig config_;
  EngineMetrics metrics_;
  std::mt19937_64 rng_;
  uint32_t connections_ = 0;

 private:
  void ScheduleDetection(LinkId link, sim::LinkState state);
  void DrainCq(uint32_t cq);

  CompletionHandler handler_;
  std::map<uint32_t, std::deque<AppCompletion>> delivered_;
  std::map<uint64_t, uint64_t> return_values_;
  std::set<LinkId> detected_down_;
  std::set<uint32_t> drain_scheduled_;
};

}  // namespace varuna::failover

#endif  // VARUNA_FAILOVER_ENGINE_H_
