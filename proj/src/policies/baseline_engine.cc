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

#include "varuna/policies/baseline_engine.h"

#include <utility>

#include "absl/strings/str_cat.h"
#include "varuna/failover/varuna_engine.h"
#include "varuna/util/check.h"

namespace varuna::policies {

using failover::AppCompletion;
using failover::AppStatus;
using failover::Completion;
using transport::CompletionStatus;
using transport::QpKind;
using transport::QpState;

BaselineEngine::BaselineEngine(World* world, EngineConfig config,
                               PolicyKind kind)
    : Engine(world, std::move(config)), kind_(kind) {
  VARUNA_CHECK(kind != PolicyKind::kVaruna);
}

absl::Status BaselineEngine::Setup(uint32_t count) {
  if (count == 0) return absl::InvalidArgumentError("need at least one vqp");
  cq_ = transport_.CreateCq();
  WatchCq(cq_);
  connections_ = count;
  for (uint32_t i = 0; i < count; ++i) {
    Vqp v;
    v.id = i;
    v.home = HomeLink(i);
    auto qp = transport_.CreateQp(QpKind::kReliableConnected, v.home, cq_);
    if (!qp.ok()) return qp.status();
    v.current = *qp;
    if (kind_ == PolicyKind::kResendCache) {
      if (auto link = BestUsableLink(v.home)) {
        auto backup = transport_.CreateQp(QpKind::kReliableConnected, *link, cq_);
        if (!backup.ok()) return backup.status();
        v.backup = *backup;
      }
    }
    vqps_.emplace(i, std::move(v));
  }
  return absl::OkStatus();
}

absl::Status BaselineEngine::PostSend(uint32_t vqp,
                                      std::vector<WorkRequest> wr_list) {
  auto it = vqps_.find(vqp);
  if (it == vqps_.end()) return absl::NotFoundError("unknown vqp");
  Vqp& v = it->second;
  if (v.dead) return absl::FailedPreconditionError("Unrecoverable: vqp is dead");
  if (wr_list.empty()) return absl::InvalidArgumentError("empty wr_list");
  for (const auto& wr : wr_list) {
    if (auto s = transport::Validate(wr, transport_.config().inline_threshold);
        !s.ok()) {
      return s;
    }
  }
  if (kind_ != PolicyKind::kNoBackup && wr_list.size() > config_.log_capacity) {
    return absl::InvalidArgumentError("batch larger than the request log");
  }
  for (auto& wr : wr_list) {
    if (wr.op_uid == 0) wr.op_uid = next_uid_++;
  }
  v.queued.push_back(std::move(wr_list));
  DrainQueue(v);
  return absl::OkStatus();
}

uint64_t BaselineEngine::LogMemoryBytes() const {
  if (kind_ == PolicyKind::kNoBackup) return 0;
  return uint64_t{connections_} * config_.log_capacity * 8;
}

bool BaselineEngine::Idle() const {
  for (const auto& [_, v] : vqps_) {
    if (v.dead) continue;
    if (v.blocked || !v.inflight.empty() || !v.queued.empty()) return false;
  }
  return true;
}

std::optional<LinkId> BaselineEngine::CurrentLink(uint32_t vqp) const {
  const Vqp& v = vqps_.at(vqp);
  if (v.dead || !transport_.HasQp(v.current)) return std::nullopt;
  return transport_.qp(v.current).link;
}

bool BaselineEngine::QpUsable(QpId qp) const {
  return qp != 0 && transport_.HasQp(qp) &&
         transport_.qp(qp).state == QpState::kReady &&
         LinkUsable(transport_.qp(qp).link);
}

std::optional<LinkId> BaselineEngine::BestUsableLink(
    std::optional<LinkId> avoid) const {
  for (LinkId link : config_.link_order) {
    if (avoid && link == *avoid) continue;
    if (LinkUsable(link)) return link;
  }
  return std::nullopt;
}

void BaselineEngine::Post(Vqp& v, std::vector<WorkRequest> wrs) {
  LinkId link = transport_.qp(v.current).link;
  std::vector<WorkRequest> wire;
  wire.reserve(wrs.size());
  for (auto& app : wrs) {
    uint64_t seq = next_seq_++;
    WorkRequest w = app;
    w.cookie = seq;
    w.owner = v.id;
    // Results land in the local buffer whether or not the application asked
    // for a completion, so every request is tracked to its ACK.
    w.signaled = true;
    if (w.opcode != transport::Opcode::kSend) {
      w.rkey = RkeyFor(w.remote_addr, link);
    }
    wire.push_back(std::move(w));
    v.inflight.emplace(seq, std::move(app));
  }
  if (auto s = transport_.RawPostSend(v.current, wire); !s.ok()) {
    if (world_->fabric().StateNow(link) == sim::LinkState::kDown) {
      DetectFailure(link);
    } else {
      Fail(v, link);
    }
  }
}

void BaselineEngine::DrainQueue(Vqp& v) {
  while (!v.queued.empty() && !v.blocked && !v.dead) {
    if (kind_ != PolicyKind::kNoBackup &&
        v.inflight.size() + v.queued.front().size() > config_.log_capacity) {
      return;
    }
    std::vector<WorkRequest> batch = std::move(v.queued.front());
    v.queued.pop_front();
    Post(v, std::move(batch));
  }
}

void BaselineEngine::OnCompletion(const Completion& c) {
  auto vit = vqps_.find(c.owner);
  if (vit != vqps_.end() && !vit->second.dead) {
    Vqp& v = vit->second;
    auto it = v.inflight.find(c.cookie);
    // Flushed requests stay in flight; the failover path reposts them.
    if (it != v.inflight.end() && c.status != CompletionStatus::kFlushError) {
      WorkRequest app = std::move(it->second);
      v.inflight.erase(it);
      if (c.ok()) {
        if (c.return_value) RecordReturnValue(app.op_uid, *c.return_value);
        if (app.signaled) {
          Deliver(v, app, AppStatus::kSuccess, c.return_value, c.data);
        }
      } else {
        Deliver(v, app, AppStatus::kError, std::nullopt);
      }
      DrainQueue(v);
    }
  }
  SweepRetiring();
}

void BaselineEngine::OnLinkDown(LinkId link) {
  auto on_link = [&](QpId qp) {
    return qp != 0 && (!transport_.HasQp(qp) || transport_.qp(qp).link == link);
  };
  for (auto& [_, v] : vqps_) {
    if (v.dead) continue;
    if (on_link(v.backup)) {
      RetireQp(v.backup);
      v.backup = 0;
    }
    if (on_link(v.pending_backup)) {
      RetireQp(v.pending_backup);
      v.pending_backup = 0;
    }
    if (on_link(v.current) || on_link(v.pending)) Fail(v, link);
  }
}

void BaselineEngine::OnLinkUp(LinkId /*link*/) {
  if (kind_ != PolicyKind::kResendCache) return;
  for (auto& [_, v] : vqps_) {
    if (!v.blocked) RebuildBackup(v);
  }
}

void BaselineEngine::Fail(Vqp& v, LinkId link) {
  if (v.dead) return;
  if (kind_ == PolicyKind::kNoBackup) {
    Kill(v);
    return;
  }
  ++v.epoch;
  if (!v.blocked) {
    v.blocked = true;
    v.report = {};
    v.report.vqp = v.id;
    v.report.started_at = loop_.now();
  } else {
    v.report.interrupted = true;
  }
  v.report.failed_link = link;
  if (v.pending != 0) {
    RetireQp(v.pending);
    v.pending = 0;
  }
  if (kind_ == PolicyKind::kResendCache && QpUsable(v.backup)) {
    QpId qp = v.backup;
    v.backup = 0;
    v.pending = qp;
    uint64_t epoch = v.epoch;
    uint32_t id = v.id;
    loop_.ScheduleAfter(config_.remap_cost, [this, id, epoch, qp] {
      Vqp& v = vqps_.at(id);
      if (v.dead || v.epoch != epoch) return;
      v.pending = 0;
      Resume(v, qp);
    });
    return;
  }
  Reconnect(v);
}

void BaselineEngine::Reconnect(Vqp& v) {
  std::optional<LinkId> link = BestUsableLink();
  if (!link) {
    Kill(v);
    return;
  }
  uint64_t epoch = v.epoch;
  uint32_t id = v.id;
  auto qp = transport_.RcConnect(
      *link, cq_, [this, id, epoch](QpId qp, absl::Status status) {
        Vqp& v = vqps_.at(id);
        if (v.dead || v.epoch != epoch || v.pending != qp) {
          RetireQp(qp);
          return;
        }
        v.pending = 0;
        if (!status.ok()) {
          RetireQp(qp);
          Reconnect(v);
          return;
        }
        Resume(v, qp);
      });
  if (!qp.ok()) {
    Kill(v);
    return;
  }
  v.pending = *qp;
}

void BaselineEngine::Resume(Vqp& v, QpId qp) {
  if (!QpUsable(qp)) {
    RetireQp(qp);
    Reconnect(v);
    return;
  }
  if (v.current != qp) RetireQp(v.current);
  v.current = qp;
  std::map<uint64_t, WorkRequest> inflight = std::move(v.inflight);
  v.inflight.clear();
  std::vector<WorkRequest> again;
  again.reserve(inflight.size());
  for (auto& [_, app] : inflight) {
    metrics_.bytes_retransmitted += RequestBytes(app);
    ++metrics_.ops_retransmitted;
    if (app.opcode == transport::Opcode::kRead) ++metrics_.reads_reissued;
    v.report.retransmitted.push_back(app.op_uid);
    again.push_back(std::move(app));
  }
  v.report.new_link = transport_.qp(qp).link;
  v.report.finished_at = loop_.now();
  metrics_.recoveries.push_back(v.report);
  v.blocked = false;
  if (!again.empty()) Post(v, std::move(again));
  if (v.dead || v.blocked) return;
  RebuildBackup(v);
  DrainQueue(v);
}

void BaselineEngine::RebuildBackup(Vqp& v) {
  if (kind_ != PolicyKind::kResendCache || v.dead || v.backup != 0 ||
      v.pending_backup != 0 || !transport_.HasQp(v.current)) {
    return;
  }
  std::optional<LinkId> link = BestUsableLink(transport_.qp(v.current).link);
  if (!link) return;
  uint32_t id = v.id;
  auto qp = transport_.RcConnect(*link, cq_, [this, id](QpId qp,
                                                        absl::Status status) {
    Vqp& v = vqps_.at(id);
    if (v.dead || v.pending_backup != qp) {
      RetireQp(qp);
      return;
    }
    v.pending_backup = 0;
    if (status.ok() && QpUsable(qp)) {
      v.backup = qp;
    } else {
      RetireQp(qp);
    }
  });
  if (qp.ok()) v.pending_backup = *qp;
}

void BaselineEngine::Kill(Vqp& v) {
  if (v.dead) return;
  v.dead = true;
  v.blocked = false;
  ++v.epoch;
  for (auto& [_, app] : v.inflight) {
    Deliver(v, app, AppStatus::kError, std::nullopt);
  }
  for (auto& batch : v.queued) {
    for (auto& wr : batch) Deliver(v, wr, AppStatus::kError, std::nullopt);
  }
  v.inflight.clear();
  v.queued.clear();
  for (QpId* qp : {&v.current, &v.backup, &v.pending, &v.pending_backup}) {
    RetireQp(*qp);
    *qp = 0;
  }
}

void BaselineEngine::Deliver(const Vqp& v, const WorkRequest& app,
                             AppStatus status, std::optional<uint64_t> value,
                             transport::Bytes data) {
  AppCompletion c;
  c.wr_id = app.wr_id;
  c.vqp = v.id;
  c.op_uid = app.op_uid;
  c.opcode = app.opcode;
  c.status = status;
  c.return_value = value;
  c.data = std::move(data);
  Engine::Deliver(std::move(c));
}

void BaselineEngine::RetireQp(QpId qp) {
  if (qp == 0 || !transport_.HasQp(qp)) return;
  if (transport_.outstanding(qp) == 0) {
    transport_.DestroyQp(qp);
  } else {
    retiring_.insert(qp);
  }
}

void BaselineEngine::SweepRetiring() {
  for (auto it = retiring_.begin(); it != retiring_.end();) {
    if (!transport_.HasQp(*it) || transport_.outstanding(*it) == 0) {
      if (transport_.HasQp(*it)) transport_.DestroyQp(*it);
      it = retiring_.erase(it);
    } else {
      ++it;
    }
  }
}

std::unique_ptr<failover::Engine> MakeEngine(PolicyKind kind, World* world,
                                             EngineConfig config) {
  if (kind == PolicyKind::kVaruna) {
    return std::make_unique<failover::VarunaEngine>(world, std::move(config));
  }
  return std::make_unique<BaselineEngine>(world, std::move(config), kind);
}

}  // namespace varuna::policies
