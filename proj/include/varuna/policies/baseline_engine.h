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

#ifndef VARUNA_POLICIES_BASELINE_ENGINE_H_
#define VARUNA_POLICIES_BASELINE_ENGINE_H_

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "varuna/failover/engine.h"

namespace varuna::policies {

using failover::EngineConfig;
using failover::LinkId;
using failover::PolicyKind;
using failover::QpId;
using failover::World;
using transport::WorkRequest;

// The comparison policies. All of them post application requests straight
// to an RC QP and keep no remote log.
//
//   kNoBackup:    a link failure errors every in-flight request and kills
//                 the connection.
//   kResend:      a link failure blocks the connection until a new RC QP is
//                 connected on a surviving link, then reposts everything
//                 that was in flight.
//   kResendCache: as kResend, but a ready backup RC QP on another link is
//                 kept per connection, so only remap_cost is paid.
class BaselineEngine : public failover::Engine {
 public:
  BaselineEngine(World* world, EngineConfig config, PolicyKind kind);

  PolicyKind kind() const override { return kind_; }
  absl::Status Setup(uint32_t count) override;
  absl::Status PostSend(uint32_t vqp, std::vector<WorkRequest> wr_list) override;
  uint64_t LogMemoryBytes() const override;
  bool Idle() const override;
  std::optional<LinkId> CurrentLink(uint32_t vqp) const override;

  QpId CurrentQp(uint32_t vqp) const { return vqps_.at(vqp).current; }
  QpId BackupQp(uint32_t vqp) const { return vqps_.at(vqp).backup; }
  bool Dead(uint32_t vqp) const { return vqps_.at(vqp).dead; }
  bool Blocked(uint32_t vqp) const { return vqps_.at(vqp).blocked; }
  size_t InFlight(uint32_t vqp) const { return vqps_.at(vqp).inflight.size(); }

 protected:
  void OnLinkDown(LinkId link) override;
  void OnLinkUp(LinkId link) override;
  void OnCompletion(const failover::Completion& c) override;

 private:
  struct Vqp {
    uint32_t id = 0;
    LinkId home = 0;
    QpId current = 0;
    QpId backup = 0;          // kResendCache only
    QpId pending_backup = 0;  // backup being connected
    QpId pending = 0;         // replacement for `current` being connected
    bool blocked = false;
    bool dead = false;
    uint64_t epoch = 0;
    std::map<uint64_t, WorkRequest> inflight;  // keyed by sequence
    std::deque<std::vector<WorkRequest>> queued;
    failover::RecoveryReport report;
  };

  bool QpUsable(QpId qp) const;
  std::optional<LinkId> BestUsableLink(std::optional<LinkId> avoid = {}) const;
  void Post(Vqp& v, std::vector<WorkRequest> wrs);
  void DrainQueue(Vqp& v);
  void Fail(Vqp& v, LinkId link);
  void Reconnect(Vqp& v);
  void Resume(Vqp& v, QpId qp);
  void RebuildBackup(Vqp& v);
  void Kill(Vqp& v);
  void Deliver(const Vqp& v, const WorkRequest& app, failover::AppStatus status,
               std::optional<uint64_t> value, transport::Bytes data = {});
  void RetireQp(QpId qp);
  void SweepRetiring();

  PolicyKind kind_;
  std::map<uint32_t, Vqp> vqps_;
  std::set<QpId> retiring_;
  uint64_t next_seq_ = 1;
  uint64_t next_uid_ = uint64_t{1} << 62;
  uint32_t cq_ = 0;
};

// Builds the engine for `kind`.
std::unique_ptr<failover::Engine> MakeEngine(PolicyKind kind, World* world,
                                             EngineConfig config);

}  // namespace varuna::policies

#endif  // VARUNA_POLICIES_BASELINE_ENGINE_H_
