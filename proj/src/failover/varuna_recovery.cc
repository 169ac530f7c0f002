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

#include <algorithm>
#include <cstring>
#include <memory>

#include "varuna/failover/varuna_engine.h"
#include "varuna/util/check.h"

namespace varuna::failover {

using transport::OpPurpose;
using transport::QpKind;
using transport::QpState;

namespace {

uint64_t LoadU64(const std::vector<uint8_t>& bytes, size_t offset) {
  uint64_t v = 0;
  if (offset + 8 <= bytes.size()) std::memcpy(&v, bytes.data() + offset, 8);
  return v;
}

}  // namespace

bool VarunaEngine::QpUsable(QpId qp) const {
  return qp != 0 && transport_.HasQp(qp) &&
         transport_.qp(qp).state == QpState::kReady;
}

void VarunaEngine::EnsurePool(LinkId link) {
  if (!LinkUsable(link)) return;
  auto& pool = pools_[link];
  std::vector<QpId> keep;
  for (QpId qp : pool) {
    if (QpUsable(qp)) {
      keep.push_back(qp);
    } else {
      RetireQp(qp);
    }
  }
  pool = std::move(keep);
  ManagePool(link);
}

void VarunaEngine::ManagePool(LinkId link) {
  if (!LinkUsable(link)) return;
  uint64_t rc_count = 0;
  for (const auto& [_, v] : vqps_) {
    for (QpId qp : {v.rc, v.pending_rc}) {
      if (qp != 0 && transport_.HasQp(qp) && transport_.qp(qp).link == link) {
        ++rc_count;
      }
    }
  }
  auto& pool = pools_[link];
  uint32_t want = DcqpPoolSize(config_.dcqp, rc_count);
  while (pool.size() < want) {
    auto qp = transport_.CreateQp(QpKind::kDynamicallyConnected, link, cq_);
    VARUNA_CHECK_OK(qp.status());
    pool.push_back(*qp);
  }
}

std::optional<LinkId> VarunaEngine::BestUsableLink() const {
  for (LinkId link : config_.link_order) {
    if (LinkUsable(link) &&
        world_->fabric().StateNow(link) == sim::LinkState::kUp) {
      return link;
    }
  }
  return std::nullopt;
}

void VarunaEngine::RetireQp(QpId qp) {
  if (qp == 0 || !transport_.HasQp(qp)) return;
  if (transport_.outstanding(qp) == 0) {
    transport_.DestroyQp(qp);
  } else {
    retiring_.insert(qp);
  }
}

void VarunaEngine::SweepRetiring() {
  for (auto it = retiring_.begin(); it != retiring_.end();) {
    if (!transport_.HasQp(*it) || transport_.outstanding(*it) == 0) {
      if (transport_.HasQp(*it)) transport_.DestroyQp(*it);
      it = retiring_.erase(it);
    } else {
      ++it;
    }
  }
}

void VarunaEngine::OnLinkDown(LinkId link) {
  std::vector<uint32_t> affected;
  last_failed_link_ = link;
  auto on_link = [&](QpId qp) {
    return qp != 0 && (!transport_.HasQp(qp) || transport_.qp(qp).link == link);
  };
  for (auto& [id, v] : vqps_) {
    if (v.dead) continue;
    bool hit = on_link(v.current);
    if (v.pending_rc != 0 && on_link(v.pending_rc)) {
      RetireQp(v.pending_rc);
      v.pending_rc = 0;
    }
    if (v.rc != 0 && on_link(v.rc)) {
      RetireQp(v.rc);
      v.rc = 0;
    }
    for (const auto& [_, e] : v.entries) {
      if ((!e.finished && !QpUsable(e.qp)) ||
          (e.slot_busy && !QpUsable(e.confirm_qp))) {
        hit = true;
      }
    }
    for (const auto& [_, p] : v.passthrough) hit |= !QpUsable(p.qp);
    if (hit) affected.push_back(id);
  }
  if (!affected.empty()) SwitchVqps(affected);
}

void VarunaEngine::SwitchVqps(const std::vector<uint32_t>& ids) {
  ++switch_events_;
  last_switch_.clear();
  std::optional<LinkId> target = BestUsableLink();
  if (target) EnsurePool(*target);
  if (!target || pools_[*target].empty()) {
    // No backup link left.
    for (uint32_t id : ids) KillVqp(vqps_.at(id));
    return;
  }
  const std::vector<QpId>& pool = pools_[*target];
  Nanos ah_delay = transport_.DcResolveAh(*target, 0).second;
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  // Every remap happens inside this one event, so no observer sees a
  // partially switched table.
  for (uint32_t id : ids) {
    Vqp& v = vqps_.at(id);
    if (v.dead) continue;
    if (!QpUsable(v.current)) {
      v.current = pool[pick(rng_)];
      last_switch_[id] = v.current;
    }
    v.failed_link = last_failed_link_;
    if (v.rc == 0 && v.pending_rc == 0) ConnectRc(v, *target);
    if (v.recovering) v.interrupted = true;
    v.recovering = true;
    uint64_t epoch = ++v.epoch;
    loop_.ScheduleAfter(config_.remap_cost + ah_delay, [this, id, epoch] {
      Vqp& v = vqps_.at(id);
      if (v.dead || v.epoch != epoch) return;
      StartRecovery(v);
    });
  }
}

void VarunaEngine::ConnectRc(Vqp& v, LinkId link) {
  uint32_t id = v.id;
  auto qp = transport_.RcConnect(link, cq_, [this, id](QpId qp,
                                                       absl::Status s) {
    Vqp& v = vqps_.at(id);
    if (v.pending_rc != qp || v.dead) {
      RetireQp(qp);
      return;
    }
    v.pending_rc = 0;
    if (!s.ok()) {
      RetireQp(qp);
      return;
    }
    LinkId link = transport_.qp(qp).link;
    QpId old_rc = v.rc;
    v.rc = qp;
    if (old_rc != 0 && old_rc != v.current) RetireQp(old_rc);
    ManagePool(link);
    if (!v.recovering) AdoptRc(v);
  });
  if (qp.ok()) {
    v.pending_rc = *qp;
    ManagePool(link);
  }
}

void VarunaEngine::AdoptRc(Vqp& v) {
  if (v.rc == 0 || v.current == v.rc || !QpUsable(v.rc)) return;
  QpId old = v.current;
  v.current = v.rc;
  ++metrics_.swap_backs;
  // Requests already on the old QP finish there; a replaced RC QP retires
  // once drained. DCQPs stay in their pool.
  if (transport_.HasQp(old) &&
      transport_.qp(old).kind == QpKind::kReliableConnected) {
    RetireQp(old);
  }
}

void VarunaEngine::OnLinkUp(LinkId link) {
  EnsurePool(link);
  std::optional<LinkId> best = BestUsableLink();
  if (!best) return;
  for (auto& [_, v] : vqps_) {
    if (v.dead) continue;
    bool home_ok = LinkUsable(v.home) &&
                   world_->fabric().StateNow(v.home) == sim::LinkState::kUp;
    LinkId want = home_ok ? v.home : *best;
    auto link_of = [&](QpId qp) { return transport_.qp(qp).link; };
    if (QpUsable(v.rc) && v.current == v.rc && link_of(v.rc) == want) continue;
    if (v.pending_rc != 0) {
      if (link_of(v.pending_rc) == want) continue;
      RetireQp(v.pending_rc);
      v.pending_rc = 0;
    }
    ConnectRc(v, want);
  }
}

void VarunaEngine::StartRecovery(Vqp& v) {
  v.report = RecoveryReport{};
  v.report.vqp = v.id;
  v.report.started_at = loop_.now();
  v.report.new_link = transport_.qp(v.current).link;
  v.report.failed_link = v.failed_link;
  v.report.interrupted = v.interrupted;
  v.interrupted = false;
  std::vector<uint64_t> target_pos;
  bool any = false;
  for (const auto& [pos, e] : v.entries) {
    if (e.slot_busy && !QpUsable(e.confirm_qp)) any = true;
    if (e.finished || QpUsable(e.qp)) continue;
    any = true;
    if (e.kind == EntryKind::kPlainAtomic ||
        ((e.kind == EntryKind::kExtCas || e.kind == EntryKind::kFaa) &&
         e.in_cas)) {
      target_pos.push_back(pos);
    }
  }
  for (const auto& [_, p] : v.passthrough) any |= !QpUsable(p.qp);
  if (!any) {
    EndRecovery(v, {});
    return;
  }

  // One doorbell: the whole completion log, the whole CAS buffer, and the
  // current value of every CAS target in question.
  const MemoryLayout& layout = world_->layout();
  uint32_t cap = config_.log_capacity;
  std::vector<std::pair<uint64_t, uint32_t>> reads = {
      {layout.LogAddr(v.id, 0), cap * 8},
      {layout.SlotAddr(v.id, 0), cap * kCasSlotBytes}};
  for (uint64_t pos : target_pos) {
    reads.push_back({v.entries.at(pos).app.remote_addr, transport::kAtomicBytes});
  }
  struct Gather {
    std::vector<transport::Bytes> data;
    size_t remaining = 0;
  };
  auto gather = std::make_shared<Gather>();
  gather->data.resize(reads.size());
  gather->remaining = reads.size();
  uint32_t id = v.id;
  uint64_t epoch = v.epoch;
  std::vector<WireRequest> wires;
  for (size_t i = 0; i < reads.size(); ++i) {
    WorkRequest wr = transport::MakeRead(0, reads[i].first, 0, reads[i].second);
    wr.purpose = OpPurpose::kRecovery;
    WireRequest w{std::move(wr), WireRole::kPassthrough, std::nullopt, {}};
    w.on_done = [this, id, epoch, i, gather, target_pos](const Completion& c) {
      if (!c.ok()) return;
      gather->data[i] = c.data;
      if (--gather->remaining == 0) {
        CompleteRecovery(id, epoch, target_pos, gather->data);
      }
    };
    wires.push_back(std::move(w));
  }
  PostWires(v, v.current, std::move(wires));
}

void VarunaEngine::CompleteRecovery(uint32_t vqp, uint64_t epoch,
                                    const std::vector<uint64_t>& target_pos,
                                    const std::vector<transport::Bytes>& reads) {
  Vqp& v = vqps_.at(vqp);
  if (v.dead || !v.recovering || v.epoch != epoch) return;
  const std::vector<uint8_t>& remote_log = *reads[0];
  const std::vector<uint8_t>& cas_buffer = *reads[1];
  std::map<uint64_t, uint64_t> target_value;
  for (size_t i = 0; i < target_pos.size(); ++i) {
    target_value[target_pos[i]] = LoadU64(*reads[2 + i], 0);
  }
  uint32_t cap = config_.log_capacity;

  // Items to handle, in original post order.
  struct Item {
    uint64_t first_seq;
    bool is_entry;
    uint64_t key;
  };
  std::vector<Item> items;
  std::vector<uint64_t> confirms;
  for (const auto& [pos, e] : v.entries) {
    if (e.slot_busy && !QpUsable(e.confirm_qp)) confirms.push_back(pos);
    if (!e.finished && !QpUsable(e.qp)) {
      items.push_back({e.first_seq, true, pos});
    }
  }
  for (const auto& [seq, p] : v.passthrough) {
    if (!QpUsable(p.qp)) items.push_back({p.first_seq, false, seq});
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.first_seq < b.first_seq; });

  std::vector<WireRequest> retransmit;
  std::vector<std::function<void()>> deferred;
  std::vector<uint64_t> to_finish_post;  // post-failure Write/Send/plain ops
  auto retransmitted = [&](const WorkRequest& app, bool count_bytes) {
    ++metrics_.ops_retransmitted;
    if (count_bytes) metrics_.bytes_retransmitted += RequestBytes(app);
    v.report.retransmitted.push_back(app.op_uid);
  };

  for (const Item& item : items) {
    if (!item.is_entry) {
      Passthrough p = v.passthrough.at(item.key);
      v.passthrough.erase(item.key);
      if (p.app.opcode == Opcode::kRead) {
        ++metrics_.reads_reissued;
      } else {
        retransmitted(p.app, true);
      }
      retransmit.push_back({p.app, WireRole::kPassthrough, std::nullopt, {}});
      continue;
    }
    Entry& e = v.entries.at(item.key);
    uint32_t index = static_cast<uint32_t>(e.pos % cap);
    uint64_t remote = LoadU64(remote_log, uint64_t{index} * 8);
    bool match = LogEntry::FromRaw(remote).SameRequest(LogEntry::FromRaw(e.raw()));
    ClassifiedOp op;
    op.op_uid = e.app.op_uid;
    op.opcode = e.app.opcode;
    op.bytes = RequestBytes(e.app);
    auto resend_logged = [&] {
      ++e.attempt;
      e.timestamp = v.next_timestamp;
      v.next_timestamp = (v.next_timestamp + 1) & kTimestampMask;
      e.first_seq = 0;
      WorkRequest op_wr = e.app;
      op_wr.signaled = false;
      WorkRequest log = transport::MakeWrite(
          e.app.wr_id, world_->layout().LogAddr(v.id, index), 0,
          transport::Word(e.raw()));
      log.inline_data = true;
      log.signaled = e.app.signaled;
      log.purpose = OpPurpose::kCompletionLog;
      log.op_uid = e.app.op_uid;
      std::vector<WireRequest> w;
      w.push_back({std::move(op_wr), WireRole::kLoggedOp, e.pos, {}});
      w.push_back({std::move(log), WireRole::kLogWrite, e.pos, {}});
      if (e.kind == EntryKind::kPlainAtomic) {
        w[0].role = WireRole::kValueOp;
        w[0].wr.signaled = true;
        w[1].wr.signaled = false;
      }
      for (auto& x : w) retransmit.push_back(std::move(x));
      retransmitted(e.app, true);
    };

    switch (e.kind) {
      case EntryKind::kWrite:
      case EntryKind::kSend:
        if (match) {
          op.classification = Classification::kPostFailure;
          to_finish_post.push_back(e.pos);
        } else {
          op.classification = Classification::kPreFailure;
          resend_logged();
        }
        break;
      case EntryKind::kPlainAtomic:
        if (match) {
          op.classification = Classification::kPostFailure;
          to_finish_post.push_back(e.pos);
          if (e.app.opcode == Opcode::kCas) {
            uint64_t t = target_value.at(e.pos);
            // Plain CAS relies on unique swap values: seeing ours means it won.
            bool won = t == e.app.swap_value;
            op.cas_outcome = won ? CasOutcome::kSuccess : CasOutcome::kFailed;
            op.recovered_value = won ? e.app.compare_value : t;
          }
        } else {
          op.classification = Classification::kPreFailure;
          resend_logged();
        }
        break;
      case EntryKind::kExtCas:
      case EntryKind::kFaa: {
        if (!e.in_cas) {
          // FAA still in its read: nothing executed yet.
          op.classification = Classification::kPreFailure;
          ++e.attempt;
          retransmit.push_back(FaaReadWire(v, e));
          ++metrics_.reads_reissued;
          break;
        }
        std::span<const uint8_t> slot(cas_buffer.data() + uint64_t{index} * kCasSlotBytes,
                                      kCasSlotBytes);
        uint64_t t = target_value.at(e.pos);
        CasVerdict verdict = ClassifyExtendedCas(e.raw(), e.uid, slot, t);
        op.cas_outcome = verdict.outcome;
        if (verdict.outcome == CasOutcome::kNotExecuted) {
          op.classification = Classification::kPreFailure;
          ++e.attempt;
          e.timestamp = v.next_timestamp;
          v.next_timestamp = (v.next_timestamp + 1) & kTimestampMask;
          e.first_seq = 0;
          for (auto& x : CasAttemptWires(v, e, v.current)) {
            retransmit.push_back(std::move(x));
          }
          retransmitted(e.app, true);
        } else {
          op.classification = Classification::kPostFailure;
          ++e.attempt;  // silences the stale attempt
          uint64_t pos = e.pos;
          if (verdict.outcome == CasOutcome::kSuccess) {
            op.recovered_value = e.expect;
            v.report.value_recovered.push_back(e.app.op_uid);
            deferred.push_back([this, vqp, pos] {
              Vqp& v = vqps_.at(vqp);
              auto it = v.entries.find(pos);
              if (it != v.entries.end() && !it->second.finished) {
                CasSucceeded(v, it->second);
              }
            });
          } else {
            op.recovered_value = t;
            v.report.value_recovered.push_back(e.app.op_uid);
            deferred.push_back([this, vqp, pos, t] {
              Vqp& v = vqps_.at(vqp);
              auto it = v.entries.find(pos);
              if (it != v.entries.end() && !it->second.finished) {
                OnCasObserved(v, it->second, t, true);
              }
            });
          }
        }
        break;
      }
    }
    v.report.classified.push_back(op);
  }

  for (uint64_t pos : confirms) {
    deferred.push_back([this, vqp, pos] {
      Vqp& v = vqps_.at(vqp);
      auto it = v.entries.find(pos);
      if (it != v.entries.end() && it->second.slot_busy) {
        PostConfirm(v, it->second);
      }
    });
  }

  // Post-failure requests need no retransmission; settle them now.
  for (uint64_t pos : to_finish_post) {
    auto it = v.entries.find(pos);
    if (it == v.entries.end()) continue;
    Entry& e = it->second;
    if (e.kind == EntryKind::kSend ||
        (e.kind == EntryKind::kPlainAtomic && e.app.opcode == Opcode::kFaa)) {
      ++metrics_.unrecoverable;
      FinishEntry(v, e, AppStatus::kUnrecoverableReturnValue, std::nullopt, true);
    } else if (e.kind == EntryKind::kPlainAtomic) {
      const ClassifiedOp* op = nullptr;
      for (const auto& c : v.report.classified) {
        if (c.op_uid == e.app.op_uid) op = &c;
      }
      v.report.value_recovered.push_back(e.app.op_uid);
      FinishEntry(v, e, AppStatus::kSuccess, op->recovered_value, true);
    } else {
      FinishEntry(v, e, AppStatus::kSuccess, std::nullopt, true);
    }
  }

  PostWires(v, v.current, std::move(retransmit));
  EndRecovery(v, std::move(deferred));
}

void VarunaEngine::EndRecovery(Vqp& v,
                               std::vector<std::function<void()>> deferred) {
  v.recovering = false;
  v.report.finished_at = loop_.now();
  metrics_.recoveries.push_back(v.report);
  for (auto& f : deferred) f();
  if (v.dead) return;
  AdoptRc(v);
  Reclaim(v);
  DrainQueue(v);
}

}  // namespace varuna::failover
