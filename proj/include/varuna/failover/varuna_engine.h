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

#ifndef VARUNA_FAILOVER_VARUNA_ENGINE_H_
#define VARUNA_FAILOVER_VARUNA_ENGINE_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "varuna/failover/confirm_worker.h"
#include "varuna/failover/engine.h"
#include "varuna/failover/log_entry.h"

namespace varuna::failover {

// What a request on the wire does for the engine once it completes.
enum class WireRole : uint8_t {
  kPassthrough,  // unlogged application request (Read or hinted op)
  kLoggedOp,     // logged application request; completion moved to its log write
  kLogWrite,     // 8-byte completion-log write
  kValueOp,      // logged atomic whose own completion carries the result
  kCasSlot,      // CAS-buffer slot write (Occupy)
  kCas,          // extended CAS carrying a Uid
  kFaaRead,      // read half of a rewritten FAA
};

struct WireRequest {
  WorkRequest wr;
  WireRole role = WireRole::kPassthrough;
  std::optional<uint64_t> log_pos;
  // Overrides the role's default completion handling.
  std::function<void(const Completion&)> on_done;
};

// Outcome of checking a CAS's slot and target after a failure.
struct CasVerdict {
  CasOutcome outcome = CasOutcome::kNotExecuted;
  // Success: value the CAS returned. Failed: the re-read target.
  uint64_t value = 0;
};

// Decides a extended CAS's fate from the slot bytes and the target value
// read after the failure. `entry` is the unfinished log entry of the attempt.
CasVerdict ClassifyExtendedCas(uint64_t entry, uint64_t uid,
                               std::span<const uint8_t> slot,
                               uint64_t target_value);

class VarunaEngine : public Engine {
 public:
  VarunaEngine(World* world, EngineConfig config);

  PolicyKind kind() const override { return PolicyKind::kVaruna; }
  absl::Status Setup(uint32_t count) override;
  absl::Status PostSend(uint32_t vqp, std::vector<WorkRequest> wr_list) override;
  uint64_t LogMemoryBytes() const override;
  bool Idle() const override;
  std::optional<LinkId> CurrentLink(uint32_t vqp) const override;

  // Request rewriting, exposed so each step can be checked on its own.
  // WrLogging allocates request-log entries; LogFull (ResourceExhausted) if
  // the batch does not fit.
  absl::StatusOr<std::vector<WireRequest>> WrLogging(
      uint32_t vqp, std::span<const WorkRequest> wr_list);
  std::vector<WireRequest> WrExtension(uint32_t vqp, QpId qp,
                                       std::vector<WireRequest> wires);

  // Introspection.
  QpId CurrentQp(uint32_t vqp) const { return vqps_.at(vqp).current; }
  bool OnDcqp(uint32_t vqp) const;
  bool Recovering(uint32_t vqp) const { return vqps_.at(vqp).recovering; }
  bool Dead(uint32_t vqp) const { return vqps_.at(vqp).dead; }
  size_t LiveLogEntries(uint32_t vqp) const {
    return vqps_.at(vqp).entries.size();
  }
  size_t SideTableSize(uint32_t vqp) const;
  const std::vector<QpId>& DcqpPool(LinkId link) const;
  // Every vqp remapped by the most recent switch, with the DCQP it got.
  const std::map<uint32_t, QpId>& last_switch() const { return last_switch_; }
  uint64_t switch_events() const { return switch_events_; }
  ConfirmWorker& confirm_worker() { return *worker_; }

 protected:
  void OnLinkDown(LinkId link) override;
  void OnLinkUp(LinkId link) override;
  void OnCompletion(const Completion& c) override;

 private:
  enum class EntryKind : uint8_t { kWrite, kSend, kPlainAtomic, kExtCas, kFaa };

  struct Entry {
    uint64_t pos = 0;
    uint64_t handle = 0;
    uint16_t timestamp = 0;
    EntryKind kind = EntryKind::kWrite;
    WorkRequest app;  // copied request metadata
    QpId qp = 0;      // QP of the latest action
    uint64_t last_seq = 0;
    uint64_t first_seq = 0;
    uint32_t attempt = 0;
    bool finished = false;
    bool slot_busy = false;  // a Uid may still sit at the target
    QpId confirm_qp = 0;
    // Extended CAS state (kExtCas, and kFaa once past its read).
    bool in_cas = false;
    uint64_t expect = 0;
    uint64_t swap = 0;
    uint64_t uid = 0;
    uint32_t retries = 0;

    uint64_t raw() const;
  };

  struct Passthrough {
    WorkRequest app;
    QpId qp = 0;
    uint64_t first_seq = 0;
  };

  struct Vqp {
    uint32_t id = 0;
    LinkId home = 0;
    QpId rc = 0;          // Ready RC QP, 0 when none
    QpId pending_rc = 0;  // RC QP being connected
    QpId current = 0;
    bool recovering = false;
    bool dead = false;
    LinkId failed_link = 0;
    bool interrupted = false;  // a failure cut the previous recovery short
    uint64_t epoch = 0;
    std::map<uint64_t, Entry> entries;  // keyed by ring position
    uint64_t log_start = 0;
    uint64_t log_end = 0;
    uint64_t next_handle = 1;
    uint16_t next_timestamp = 1;
    std::map<uint64_t, Passthrough> passthrough;  // keyed by sequence
    std::deque<std::vector<WorkRequest>> queued;
    RecoveryReport report;
  };

  using WireCallback = std::function<void(const Completion&)>;
  struct PendingWire {
    uint32_t vqp = 0;
    WireCallback callback;
  };

  // Posting.
  absl::Status Submit(Vqp& v, std::vector<WorkRequest> wr_list);
  void PostWires(Vqp& v, QpId qp, std::vector<WireRequest> wires);
  std::vector<WireRequest> CasAttemptWires(Vqp& v, Entry& e, QpId qp);
  WireRequest FaaReadWire(Vqp& v, Entry& e);
  std::vector<WireRequest> ConfirmWires(Vqp& v, const Entry& e);
  void PostCasAttempt(Vqp& v, Entry& e);
  void PostFaaRead(Vqp& v, Entry& e);
  void PostConfirm(Vqp& v, Entry& e);
  WireCallback CallbackFor(Vqp& v, const WireRequest& w);
  void DrainQueue(Vqp& v);

  // Completion handling.
  void OnLogWriteDone(uint32_t vqp, uint64_t pos, uint32_t attempt,
                      const Completion& c);
  void OnValueOpDone(uint32_t vqp, uint64_t pos, uint32_t attempt,
                     const Completion& c);
  void OnCasDone(uint32_t vqp, uint64_t pos, uint32_t attempt,
                 const Completion& c);
  void OnFaaReadDone(uint32_t vqp, uint64_t pos, uint32_t attempt,
                     const Completion& c);
  // Handles the value observed at the target of entry `e`'s CAS. With
  // `known_failed`, the attempt is known not to have swapped.
  void OnCasObserved(Vqp& v, Entry& e, uint64_t observed, bool known_failed);
  void CasSucceeded(Vqp& v, Entry& e);
  void CasFailed(Vqp& v, Entry& e, uint64_t logical);
  void RetryCas(Vqp& v, Entry& e);
  void FinishEntry(Vqp& v, Entry& e, AppStatus status,
                   std::optional<uint64_t> value, bool deliver);
  void FinishUpTo(Vqp& v, QpId qp, uint64_t seq);
  void Reclaim(Vqp& v);
  void DeliverFor(const Vqp& v, const WorkRequest& app, AppStatus status,
                  std::optional<uint64_t> value, transport::Bytes data = {});
  void KillVqp(Vqp& v);

  // Failover.
  bool QpUsable(QpId qp) const;
  void EnsurePool(LinkId link);
  void ManagePool(LinkId link);
  std::optional<LinkId> BestUsableLink() const;
  void SwitchVqps(const std::vector<uint32_t>& ids);
  void ConnectRc(Vqp& v, LinkId link);
  void AdoptRc(Vqp& v);
  void RetireQp(QpId qp);
  void SweepRetiring();
  void StartRecovery(Vqp& v);
  void CompleteRecovery(uint32_t vqp, uint64_t epoch,
                        const std::vector<uint64_t>& target_pos,
                        const std::vector<transport::Bytes>& reads);
  void EndRecovery(Vqp& v, std::vector<std::function<void()>> deferred);

  std::unique_ptr<ConfirmWorker> worker_;
  std::map<uint32_t, Vqp> vqps_;
  std::map<LinkId, std::vector<QpId>> pools_;
  std::map<uint64_t, PendingWire> wires_;
  std::set<QpId> retiring_;
  std::map<uint32_t, QpId> last_switch_;
  uint64_t switch_events_ = 0;
  LinkId last_failed_link_ = 0;
  uint64_t next_seq_ = 1;
  uint64_t next_uid_ = uint64_t{1} << 62;
  uint32_t cq_ = 0;
};

}  // namespace varuna::failover

#endif  // VARUNA_FAILOVER_VARUNA_ENGINE_H_
