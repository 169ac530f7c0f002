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

#ifndef VARUNA_TRANSPORT_TRANSPORT_H_
#define VARUNA_TRANSPORT_TRANSPORT_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "varuna/sim/event_loop.h"
#include "varuna/sim/execution_trace.h"
#include "varuna/sim/fabric.h"
#include "varuna/sim/memory.h"
#include "varuna/transport/work_request.h"

namespace varuna::transport {

using sim::LinkId;
using sim::Nanos;

struct TransportConfig {
  Nanos handshake_delay = 2 * sim::kMillisecond;
  Nanos ah_create_delay = 100 * sim::kMicrosecond;
  // Per-QP host memory; 4096 RC QPs come to roughly 1.5 GB.
  uint64_t rc_qp_memory_bytes = 366 * 1024;
  uint64_t dc_qp_memory_bytes = 366 * 1024;
  uint32_t psn_window = 128;
  uint32_t inline_threshold = kDefaultInlineThreshold;
  // Receive buffers consumed FIFO by two-sided sends.
  uint64_t recv_base = 0;
  uint32_t recv_slot_bytes = 0;
  uint32_t recv_slots = 0;
};

enum class QpKind : uint8_t { kReliableConnected, kDynamicallyConnected };
enum class QpState : uint8_t { kReset, kConnecting, kReady, kError };

struct PhysicalQP {
  QpId id = 0;
  QpKind kind = QpKind::kReliableConnected;
  QpState state = QpState::kReset;
  LinkId link = 0;
  uint32_t next_psn = 0;
  uint32_t cq = 0;
  uint64_t memory_cost = 0;
};

struct MemoryRegion {
  uint32_t region_id = 0;
  uint64_t base_addr = 0;
  uint64_t length = 0;
  std::map<NicId, uint32_t> rkeys;  // one per registered NIC
};

struct AddressHandle {
  NicId nic = 0;
  uint32_t endpoint = 0;
  uint64_t handle = 0;
};

class CompletionQueue {
 public:
  using Notify = std::function<void()>;

  void Push(Completion c);
  // Removes up to `max` completions in arrival order.
  std::vector<Completion> Poll(size_t max = SIZE_MAX);
  // Removes completions matching `pred`, leaving the rest in order.
  std::vector<Completion> PollIf(
      const std::function<bool(const Completion&)>& pred);
  size_t size() const { return entries_.size(); }
  void set_notify(Notify n) { notify_ = std::move(n); }

 private:
  std::deque<Completion> entries_;
  Notify notify_;
};

struct TransportStats {
  uint64_t doorbells = 0;
  uint64_t segments_sent = 0;
  uint64_t bytes_sent = 0;             // request payload bytes put on links
  uint64_t inline_log_packets = 0;     // kCompletionLog writes posted
  uint64_t inline_log_bytes = 0;
  uint64_t duplicate_psns = 0;         // suppressed re-executions
  uint64_t acks_resent = 0;
  uint64_t commits = 0;
};

// Simulated verbs layer: requester QPs and the single responder's per-QP
// receive context, joined by the fabric.
class Transport {
 public:
  using ConnectCallback = std::function<void(QpId, absl::Status)>;
  using CommitListener = std::function<void(const sim::CommitRecord&)>;

  Transport(sim::EventLoop* loop, sim::Fabric* fabric,
            sim::ResponderMemory* memory, sim::ExecutionTrace* trace,
            TransportConfig config);
  Transport(const Transport&) = delete;
  Transport& operator=(const Transport&) = delete;

  const TransportConfig& config() const { return config_; }

  uint32_t CreateCq();
  CompletionQueue& cq(uint32_t id) { return cqs_.at(id); }

  // Creates a QP already in `state` (used for startup provisioning).
  absl::StatusOr<QpId> CreateQp(QpKind kind, LinkId link, uint32_t cq,
                                QpState state = QpState::kReady);
  void DestroyQp(QpId id);
  const PhysicalQP& qp(QpId id) const { return qps_.at(id); }
  bool HasQp(QpId id) const { return qps_.contains(id); }

  // Starts an RC handshake on `link`. The QP is Connecting until
  // handshake_delay elapses, then Ready. If the link goes down during the
  // handshake the QP enters Error and `done` gets ConnectFailed
  // (Unavailable).
  absl::StatusOr<QpId> RcConnect(LinkId link, uint32_t cq,
                                 ConnectCallback done);

  // Returns the address handle and the delay its creation costs now (zero on
  // a cache hit).
  std::pair<AddressHandle, Nanos> DcResolveAh(NicId nic, uint32_t endpoint);
  size_t ah_cache_size() const { return ah_cache_.size(); }

  absl::StatusOr<MemoryRegion> RegisterRegion(uint64_t base, uint64_t length,
                                              std::span<const NicId> nics);
  const std::vector<MemoryRegion>& regions() const { return regions_; }
  // rkey for the region containing `addr` as registered on `nic`.
  absl::StatusOr<uint32_t> RkeyFor(uint64_t addr, NicId nic) const;

  // Segments each request and hands the packets to the fabric in list order
  // as one doorbell. FailedPrecondition when the QP is not Ready.
  absl::Status RawPostSend(QpId qp, std::span<const WorkRequest> wr_list);

  // Responder-side handling of a delivered request segment.
  void ResponderReceive(const sim::Packet& segment, LinkId link);

  // Moves every QP on `link` to Error and flushes its outstanding requests
  // as error completions.
  void FailQpsOnLink(LinkId link);
  void FailQp(QpId id);

  // Sum of per-QP memory over live QPs.
  uint64_t QpMemoryFootprint() const;
  size_t live_qp_count() const { return qps_.size(); }
  size_t outstanding(QpId id) const;

  void AddCommitListener(CommitListener l) {
    commit_listeners_.push_back(std::move(l));
  }

  const TransportStats& stats() const { return stats_; }
  sim::EventLoop* loop() const { return loop_; }
  sim::Fabric* fabric() const { return fabric_; }
  sim::ResponderMemory* memory() const { return memory_; }

 private:
  struct WireOp {
    WorkRequest wr;
    QpId qp = 0;
    LinkId link = 0;
    uint32_t first_psn = 0;
    uint32_t last_psn = 0;
    uint32_t segments = 1;
  };
  struct CachedAck {
    uint32_t psn = 0;
    sim::Packet ack;
  };
  struct ResponderQp {
    uint32_t expected_psn = 0;
    std::deque<CachedAck> window;
    std::map<uint32_t, sim::Packet> out_of_order;
  };
  struct Outstanding {
    uint64_t token = 0;
    uint32_t last_psn = 0;
    bool acked = false;
    bool nak = false;
    std::optional<uint64_t> value;
  };

  void ProcessInOrder(const sim::Packet& segment, LinkId link,
                      ResponderQp& ctx);
  void Commit(uint64_t token, LinkId link, ResponderQp& ctx);
  void SendAck(const sim::Packet& ack, LinkId link);
  void RequesterReceiveAck(const sim::Packet& ack);
  uint32_t NextRecvSlot();
  bool RkeyValid(const WorkRequest& wr, NicId nic) const;

  sim::EventLoop* loop_;
  sim::Fabric* fabric_;
  sim::ResponderMemory* memory_;
  sim::ExecutionTrace* trace_;
  TransportConfig config_;

  std::map<QpId, PhysicalQP> qps_;
  std::map<QpId, std::deque<Outstanding>> outstanding_;
  std::map<QpId, ResponderQp> responder_;
  std::map<uint32_t, CompletionQueue> cqs_;
  std::unordered_map<uint64_t, WireOp> ops_;
  std::map<std::pair<NicId, uint32_t>, AddressHandle> ah_cache_;
  std::vector<MemoryRegion> regions_;
  std::vector<CommitListener> commit_listeners_;
  TransportStats stats_;
  uint64_t next_token_ = 1;
  QpId next_qp_id_ = 1;
  uint32_t next_cq_id_ = 1;
  uint32_t recv_count_ = 0;
  uint64_t next_ah_ = 1;
};

}  // namespace varuna::transport

#endif  // VARUNA_TRANSPORT_TRANSPORT_H_
