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

#include "varuna/failover/varuna_engine.h"

#include <algorithm>
#include <cstring>

#include "absl/strings/str_cat.h"
#include "varuna/util/check.h"

namespace varuna::failover {

using transport::Bytes;
using transport::CompletionStatus;
using transport::MakeBytes;
using transport::OpPurpose;

namespace {

uint64_t LoadU64(std::span<const uint8_t> bytes, size_t offset) {
  uint64_t v = 0;
  if (offset + 8 <= bytes.size()) std::memcpy(&v, bytes.data() + offset, 8);
  return v;
}

void StoreU64(std::vector<uint8_t>& bytes, size_t offset, uint64_t v) {
  std::memcpy(bytes.data() + offset, &v, 8);
}

constexpr uint64_t kFinishedBit = uint64_t{1} << 63;

}  // namespace

CasVerdict ClassifyExtendedCas(uint64_t entry, uint64_t uid,
                               std::span<const uint8_t> slot,
                               uint64_t target_value) {
  LogEntry slot_entry = LogEntry::FromRaw(LoadU64(slot, kSlotEntryOffset));
  if (!slot_entry.SameRequest(LogEntry::FromRaw(entry))) {
    return {CasOutcome::kNotExecuted, 0};
  }
  // The slot write travels in the same packet as the CAS, so a matching slot
  // means the CAS executed.
  if (slot_entry.finished() || target_value == uid) {
    return {CasOutcome::kSuccess, 0};
  }
  return {CasOutcome::kFailed, target_value};
}

uint64_t VarunaEngine::Entry::raw() const {
  return *EncodeLogEntry(handle, timestamp, false);
}

VarunaEngine::VarunaEngine(World* world, EngineConfig config)
    : Engine(world, std::move(config)),
      worker_(std::make_unique<ConfirmWorker>(
          world, config_.confirm_worker_period)) {}

absl::Status VarunaEngine::Setup(uint32_t count) {
  if (count == 0) return absl::InvalidArgumentError("need at least one vqp");
  if (count > world_->layout().connections) {
    return absl::InvalidArgumentError(
        absl::StrCat("layout has room for ", world_->layout().connections,
                     " connections, asked for ", count));
  }
  if (config_.log_capacity != world_->layout().log_capacity) {
    return absl::InvalidArgumentError(
        "engine log capacity differs from the responder layout");
  }
  cq_ = transport_.CreateCq();
  WatchCq(cq_);
  connections_ = count;
  for (uint32_t i = 0; i < count; ++i) {
    LinkId home = HomeLink(i);
    auto qp = transport_.CreateQp(transport::QpKind::kReliableConnected, home,
                                  cq_);
    if (!qp.ok()) return qp.status();
    Vqp v;
    v.id = i;
    v.home = home;
    v.rc = *qp;
    v.current = *qp;
    vqps_.emplace(i, std::move(v));
  }
  for (LinkId link : config_.link_order) {
    transport_.DcResolveAh(link, 0);
    EnsurePool(link);
  }
  return absl::OkStatus();
}

uint64_t VarunaEngine::LogMemoryBytes() const {
  return uint64_t{connections_} * config_.log_capacity * 8;
}

bool VarunaEngine::Idle() const {
  for (const auto& [_, v] : vqps_) {
    if (!v.entries.empty() || !v.passthrough.empty() || !v.queued.empty() ||
        v.recovering) {
      return false;
    }
  }
  return true;
}

std::optional<LinkId> VarunaEngine::CurrentLink(uint32_t vqp) const {
  const Vqp& v = vqps_.at(vqp);
  if (v.dead || !transport_.HasQp(v.current)) return std::nullopt;
  return transport_.qp(v.current).link;
}

bool VarunaEngine::OnDcqp(uint32_t vqp) const {
  const Vqp& v = vqps_.at(vqp);
  return transport_.HasQp(v.current) &&
         transport_.qp(v.current).kind ==
             transport::QpKind::kDynamicallyConnected;
}

size_t VarunaEngine::SideTableSize(uint32_t vqp) const {
  size_t n = 0;
  for (const auto& [_, e] : vqps_.at(vqp).entries) n += e.finished ? 0 : 1;
  return n;
}

const std::vector<QpId>& VarunaEngine::DcqpPool(LinkId link) const {
  static const std::vector<QpId> kEmpty;
  auto it = pools_.find(link);
  return it == pools_.end() ? kEmpty : it->second;
}

absl::StatusOr<std::vector<WireRequest>> VarunaEngine::WrLogging(
    uint32_t vqp, std::span<const WorkRequest> wr_list) {
  if (wr_list.empty()) return absl::InvalidArgumentError("empty wr_list");
  Vqp& v = vqps_.at(vqp);
  size_t needed = 0;
  for (const auto& wr : wr_list) needed += wr.IsNonIdempotent() ? 1 : 0;
  if (v.log_end - v.log_start + needed > config_.log_capacity) {
    return absl::ResourceExhaustedError("LogFull");
  }
  const MemoryLayout& layout = world_->layout();
  std::vector<WireRequest> out;
  out.reserve(wr_list.size() * 2);
  for (WorkRequest wr : wr_list) {
    if (wr.op_uid == 0) wr.op_uid = next_uid_++;
    wr.owner = vqp;
    if (!wr.IsNonIdempotent()) {
      out.push_back({wr, WireRole::kPassthrough, std::nullopt, {}});
      continue;
    }
    Entry e;
    e.pos = v.log_end++;
    e.handle = v.next_handle++;
    e.timestamp = v.next_timestamp;
    v.next_timestamp = (v.next_timestamp + 1) & kTimestampMask;
    switch (wr.opcode) {
      case Opcode::kWrite:
        e.kind = EntryKind::kWrite;
        break;
      case Opcode::kSend:
        e.kind = EntryKind::kSend;
        break;
      case Opcode::kCas:
        e.kind = config_.extension_enabled ? EntryKind::kExtCas
                                           : EntryKind::kPlainAtomic;
        break;
      case Opcode::kFaa:
        e.kind = config_.extension_enabled ? EntryKind::kFaa
                                           : EntryKind::kPlainAtomic;
        break;
      case Opcode::kRead:
        break;
    }
    e.app = wr;
    e.expect = wr.compare_value;
    e.swap = wr.swap_value;
    e.attempt = 1;

    WorkRequest op = wr;
    op.signaled = false;
    uint64_t log_addr = layout.LogAddr(vqp, e.pos % config_.log_capacity);
    WorkRequest log = transport::MakeWrite(wr.wr_id, log_addr, 0,
                                           transport::Word(e.raw()));
    log.inline_data = true;
    log.signaled = wr.signaled;
    log.purpose = OpPurpose::kCompletionLog;
    log.op_uid = wr.op_uid;
    log.owner = vqp;
    out.push_back({std::move(op), WireRole::kLoggedOp, e.pos, {}});
    out.push_back({std::move(log), WireRole::kLogWrite, e.pos, {}});
    v.entries.emplace(e.pos, std::move(e));
  }
  return out;
}

std::vector<WireRequest> VarunaEngine::WrExtension(
    uint32_t vqp, QpId qp, std::vector<WireRequest> wires) {
  Vqp& v = vqps_.at(vqp);
  std::vector<WireRequest> out;
  out.reserve(wires.size() + wires.size() / 2);
  for (size_t i = 0; i < wires.size(); ++i) {
    WireRequest& w = wires[i];
    if (w.role != WireRole::kLoggedOp) {
      out.push_back(std::move(w));
      continue;
    }
    Entry& e = v.entries.at(*w.log_pos);
    VARUNA_CHECK(i + 1 < wires.size() &&
                 wires[i + 1].role == WireRole::kLogWrite);
    switch (e.kind) {
      case EntryKind::kWrite:
      case EntryKind::kSend:
        out.push_back(std::move(w));
        break;
      case EntryKind::kPlainAtomic: {
        // The atomic's own completion carries its result.
        w.role = WireRole::kValueOp;
        w.wr.signaled = true;
        WireRequest log = std::move(wires[++i]);
        log.wr.signaled = false;
        out.push_back(std::move(w));
        out.push_back(std::move(log));
        break;
      }
      case EntryKind::kExtCas:
        ++i;
        for (auto& x : CasAttemptWires(v, e, qp)) out.push_back(std::move(x));
        break;
      case EntryKind::kFaa:
        ++i;
        out.push_back(FaaReadWire(v, e));
        break;
    }
  }
  return out;
}

std::vector<WireRequest> VarunaEngine::CasAttemptWires(Vqp& v, Entry& e,
                                                       QpId qp) {
  const MemoryLayout& layout = world_->layout();
  uint32_t index = static_cast<uint32_t>(e.pos % config_.log_capacity);
  uint64_t slot_addr = layout.SlotAddr(v.id, index);
  e.in_cas = true;
  e.uid = *EncodeUid(slot_addr, qp);
  uint64_t raw = e.raw();

  std::vector<uint8_t> slot(kCasSlotBytes, 0);
  StoreU64(slot, kSlotSwapOffset, e.swap);
  StoreU64(slot, kSlotEntryOffset, raw);
  StoreU64(slot, kSlotTargetOffset, e.app.remote_addr);
  StoreU64(slot, kSlotUidOffset, e.uid);
  StoreU64(slot, kSlotStateOffset, kSlotOccupied);

  auto base = [&](WorkRequest wr, OpPurpose purpose) {
    wr.op_uid = e.app.op_uid;
    wr.owner = v.id;
    wr.purpose = purpose;
    return wr;
  };
  WorkRequest slot_write = base(
      transport::MakeWrite(e.app.wr_id, slot_addr, 0, MakeBytes(std::move(slot))),
      OpPurpose::kCasSlot);
  slot_write.inline_data = true;
  slot_write.signaled = false;
  slot_write.bundle_with_next = true;

  WorkRequest cas =
      base(transport::MakeCas(e.app.wr_id, e.app.remote_addr, e.app.rkey,
                              e.expect, e.uid),
           OpPurpose::kApplication);
  cas.signaled = true;
  cas.bundle_with_next = true;

  WorkRequest log = base(
      transport::MakeWrite(e.app.wr_id,
                           layout.LogAddr(v.id, index), 0,
                           transport::Word(raw)),
      OpPurpose::kCompletionLog);
  log.inline_data = true;
  log.signaled = false;

  return {{std::move(slot_write), WireRole::kCasSlot, e.pos, {}},
          {std::move(cas), WireRole::kCas, e.pos, {}},
          {std::move(log), WireRole::kLogWrite, e.pos, {}}};
}

WireRequest VarunaEngine::FaaReadWire(Vqp& v, Entry& e) {
  e.in_cas = false;
  WorkRequest read = transport::MakeRead(e.app.wr_id, e.app.remote_addr,
                                         e.app.rkey, transport::kAtomicBytes);
  read.op_uid = e.app.op_uid;
  read.owner = v.id;
  read.purpose = OpPurpose::kFaaRead;
  return {std::move(read), WireRole::kFaaRead, e.pos, {}};
}

std::vector<WireRequest> VarunaEngine::ConfirmWires(Vqp& v, const Entry& e) {
  uint64_t slot_addr = DecodeUid(e.uid).slot_addr;
  uint64_t raw = e.raw();
  WorkRequest mark = transport::MakeCas(e.app.wr_id, slot_addr + kSlotEntryOffset,
                                        0, raw, raw | kFinishedBit);
  mark.purpose = OpPurpose::kConfirm;
  mark.op_uid = e.app.op_uid;
  mark.owner = v.id;
  mark.signaled = false;
  WorkRequest replace = transport::MakeCas(e.app.wr_id, e.app.remote_addr,
                                           e.app.rkey, e.uid, e.swap);
  replace.purpose = OpPurpose::kConfirm;
  replace.op_uid = e.app.op_uid;
  replace.owner = v.id;
  WireRequest w{std::move(replace), WireRole::kCasSlot, std::nullopt, {}};
  uint32_t vqp = v.id;
  uint64_t pos = e.pos;
  uint64_t uid = e.uid;
  w.on_done = [this, vqp, pos, uid](const Completion& c) {
    if (!c.ok()) return;
    Vqp& v = vqps_.at(vqp);
    auto it = v.entries.find(pos);
    if (it == v.entries.end() || it->second.uid != uid) return;
    it->second.slot_busy = false;
    Reclaim(v);
  };
  std::vector<WireRequest> out;
  out.push_back({std::move(mark), WireRole::kCasSlot, std::nullopt, {}});
  out.push_back(std::move(w));
  return out;
}

void VarunaEngine::PostCasAttempt(Vqp& v, Entry& e) {
  ++e.attempt;
  e.timestamp = v.next_timestamp;
  v.next_timestamp = (v.next_timestamp + 1) & kTimestampMask;
  PostWires(v, v.current, CasAttemptWires(v, e, v.current));
}

void VarunaEngine::PostFaaRead(Vqp& v, Entry& e) {
  ++e.attempt;
  std::vector<WireRequest> wires;
  wires.push_back(FaaReadWire(v, e));
  PostWires(v, v.current, std::move(wires));
}

void VarunaEngine::PostConfirm(Vqp& v, Entry& e) {
  e.slot_busy = true;
  e.confirm_qp = v.current;
  ++metrics_.cas_confirms_posted;
  PostWires(v, v.current, ConfirmWires(v, e));
}

VarunaEngine::WireCallback VarunaEngine::CallbackFor(Vqp& v,
                                                     const WireRequest& w) {
  if (w.on_done) return w.on_done;
  uint32_t vqp = v.id;
  uint64_t pos = w.log_pos.value_or(0);
  uint32_t attempt = w.log_pos ? v.entries.at(pos).attempt : 0;
  switch (w.role) {
    case WireRole::kPassthrough:
      return [this, vqp](const Completion& c) {
        Vqp& v = vqps_.at(vqp);
        auto it = v.passthrough.find(c.cookie);
        if (it == v.passthrough.end() || !c.ok()) return;
        WorkRequest app = it->second.app;
        v.passthrough.erase(it);
        if (c.return_value) RecordReturnValue(app.op_uid, *c.return_value);
        if (app.signaled) {
          DeliverFor(v, app, AppStatus::kSuccess, c.return_value, c.data);
        }
      };
    case WireRole::kLogWrite:
      return [this, vqp, pos, attempt](const Completion& c) {
        OnLogWriteDone(vqp, pos, attempt, c);
      };
    case WireRole::kValueOp:
      return [this, vqp, pos, attempt](const Completion& c) {
        OnValueOpDone(vqp, pos, attempt, c);
      };
    case WireRole::kCas:
      return [this, vqp, pos, attempt](const Completion& c) {
        OnCasDone(vqp, pos, attempt, c);
      };
    case WireRole::kFaaRead:
      return [this, vqp, pos, attempt](const Completion& c) {
        OnFaaReadDone(vqp, pos, attempt, c);
      };
    case WireRole::kLoggedOp:
    case WireRole::kCasSlot:
      return nullptr;
  }
  return nullptr;
}

void VarunaEngine::PostWires(Vqp& v, QpId qp, std::vector<WireRequest> wires) {
  if (wires.empty()) return;
  LinkId link = transport_.HasQp(qp) ? transport_.qp(qp).link : 0;
  std::vector<WorkRequest> batch;
  batch.reserve(wires.size());
  std::vector<uint64_t> registered;
  for (auto& w : wires) {
    uint64_t seq = next_seq_++;
    w.wr.cookie = seq;
    w.wr.owner = v.id;
    if (w.wr.opcode != Opcode::kSend && transport_.HasQp(qp)) {
      w.wr.rkey = RkeyFor(w.wr.remote_addr, link);
    }
    if (w.log_pos) {
      Entry& e = v.entries.at(*w.log_pos);
      e.qp = qp;
      e.last_seq = seq;
      if (e.first_seq == 0) e.first_seq = seq;
    } else if (w.role == WireRole::kPassthrough && !w.on_done &&
               w.wr.purpose == OpPurpose::kApplication) {
      v.passthrough[seq] = Passthrough{w.wr, qp, seq};
    }
    if (w.wr.signaled) {
      if (WireCallback cb = CallbackFor(v, w)) {
        wires_[seq] = PendingWire{v.id, std::move(cb)};
        registered.push_back(seq);
      }
    }
    batch.push_back(w.wr);
  }
  absl::Status s = transport_.RawPostSend(qp, batch);
  if (s.ok()) return;
  // Post error: the QP is gone or in Error. The requests stay logged and
  // are replayed by recovery.
  for (uint64_t seq : registered) wires_.erase(seq);
  if (transport_.HasQp(qp) &&
      world_->fabric().StateNow(transport_.qp(qp).link) ==
          sim::LinkState::kDown) {
    DetectFailure(transport_.qp(qp).link);
  } else if (!v.recovering) {
    SwitchVqps({v.id});
  }
}

absl::Status VarunaEngine::PostSend(uint32_t vqp,
                                    std::vector<WorkRequest> wr_list) {
  auto it = vqps_.find(vqp);
  if (it == vqps_.end()) return absl::NotFoundError("unknown vqp");
  Vqp& v = it->second;
  if (v.dead) return absl::FailedPreconditionError("Unrecoverable: vqp is dead");
  if (wr_list.empty()) return absl::InvalidArgumentError("empty wr_list");
  size_t needed = 0;
  for (const auto& wr : wr_list) {
    if (auto s = transport::Validate(wr, transport_.config().inline_threshold);
        !s.ok()) {
      return s;
    }
    needed += wr.IsNonIdempotent() ? 1 : 0;
  }
  if (needed > config_.log_capacity) {
    return absl::InvalidArgumentError("batch larger than the request log");
  }
  for (auto& wr : wr_list) {
    if (wr.op_uid == 0) wr.op_uid = next_uid_++;
  }
  if (!config_.block_when_full && v.queued.empty() && !v.recovering &&
      v.log_end - v.log_start + needed > config_.log_capacity) {
    return absl::ResourceExhaustedError("LogFull");
  }
  v.queued.push_back(std::move(wr_list));
  DrainQueue(v);
  return absl::OkStatus();
}

absl::Status VarunaEngine::Submit(Vqp& v, std::vector<WorkRequest> wr_list) {
  auto logged = WrLogging(v.id, wr_list);
  if (!logged.ok()) return logged.status();
  for (auto& w : *logged) {
    if (w.log_pos) v.entries.at(*w.log_pos).qp = v.current;
  }
  PostWires(v, v.current, WrExtension(v.id, v.current, std::move(*logged)));
  return absl::OkStatus();
}

void VarunaEngine::DrainQueue(Vqp& v) {
  while (!v.queued.empty() && !v.recovering && !v.dead) {
    const auto& next = v.queued.front();
    size_t needed = 0;
    for (const auto& wr : next) needed += wr.IsNonIdempotent() ? 1 : 0;
    if (v.log_end - v.log_start + needed > config_.log_capacity) return;
    std::vector<WorkRequest> batch = std::move(v.queued.front());
    v.queued.pop_front();
    VARUNA_CHECK_OK(Submit(v, std::move(batch)));
  }
}

void VarunaEngine::OnCompletion(const Completion& c) {
  if (auto it = wires_.find(c.cookie); it != wires_.end()) {
    WireCallback cb = std::move(it->second.callback);
    wires_.erase(it);
    if (cb) cb(c);
  }
  auto vit = vqps_.find(c.owner);
  if (vit != vqps_.end() && !vit->second.dead) {
    Vqp& v = vit->second;
    if (c.ok()) {
      FinishUpTo(v, c.qp_id, c.cookie);
    } else if (c.status == CompletionStatus::kRemoteAccessError) {
      // The responder rejected the request; the connection cannot continue.
      KillVqp(v);
      std::vector<uint32_t> others;
      for (auto& [id, o] : vqps_) {
        if (!o.dead && !o.recovering && !QpUsable(o.current)) {
          others.push_back(id);
        }
      }
      if (!others.empty()) SwitchVqps(others);
    }
  }
  SweepRetiring();
}

void VarunaEngine::OnLogWriteDone(uint32_t vqp, uint64_t pos, uint32_t attempt,
                                  const Completion& c) {
  Vqp& v = vqps_.at(vqp);
  auto it = v.entries.find(pos);
  if (!c.ok() || it == v.entries.end() || it->second.attempt != attempt ||
      it->second.finished) {
    return;
  }
  FinishEntry(v, it->second, AppStatus::kSuccess, std::nullopt, true);
}

void VarunaEngine::OnValueOpDone(uint32_t vqp, uint64_t pos, uint32_t attempt,
                                 const Completion& c) {
  Vqp& v = vqps_.at(vqp);
  auto it = v.entries.find(pos);
  if (!c.ok() || it == v.entries.end() || it->second.attempt != attempt ||
      it->second.finished) {
    return;
  }
  FinishEntry(v, it->second, AppStatus::kSuccess, c.return_value, true);
}

void VarunaEngine::OnCasDone(uint32_t vqp, uint64_t pos, uint32_t attempt,
                             const Completion& c) {
  Vqp& v = vqps_.at(vqp);
  auto it = v.entries.find(pos);
  if (!c.ok() || it == v.entries.end() || it->second.attempt != attempt ||
      it->second.finished || !c.return_value) {
    return;
  }
  OnCasObserved(v, it->second, *c.return_value, false);
}

void VarunaEngine::OnFaaReadDone(uint32_t vqp, uint64_t pos, uint32_t attempt,
                                 const Completion& c) {
  Vqp& v = vqps_.at(vqp);
  auto it = v.entries.find(pos);
  if (!c.ok() || it == v.entries.end() || it->second.attempt != attempt ||
      it->second.finished || !c.return_value) {
    return;
  }
  Entry& e = it->second;
  uint64_t value = *c.return_value;
  const MemoryLayout& layout = world_->layout();
  if (!layout.IsSlotAddr(DecodeUid(value).slot_addr)) {
    e.expect = value;
    e.swap = value + e.app.add_value;
    PostCasAttempt(v, e);
    return;
  }
  // Another CAS holds the target; learn its real value from its slot.
  ++e.attempt;
  uint64_t observed = value;
  uint64_t slot_addr = DecodeUid(value).slot_addr;
  WorkRequest read = transport::MakeRead(e.app.wr_id, slot_addr, 0, kCasSlotBytes);
  read.op_uid = e.app.op_uid;
  read.purpose = OpPurpose::kFaaRead;
  WireRequest w{std::move(read), WireRole::kPassthrough, e.pos, {}};
  uint32_t now_attempt = e.attempt;
  w.on_done = [this, vqp, pos, now_attempt, observed](const Completion& c) {
    Vqp& v = vqps_.at(vqp);
    auto it = v.entries.find(pos);
    if (!c.ok() || it == v.entries.end() ||
        it->second.attempt != now_attempt || !c.data) {
      return;
    }
    Entry& e = it->second;
    ++metrics_.uid_translations;
    std::span<const uint8_t> slot(*c.data);
    if (LoadU64(slot, kSlotUidOffset) == observed &&
        LoadU64(slot, kSlotTargetOffset) == e.app.remote_addr) {
      uint64_t logical = LoadU64(slot, kSlotSwapOffset);
      e.expect = logical;
      e.swap = logical + e.app.add_value;
      PostCasAttempt(v, e);
    } else if (++e.retries > config_.faa_retry_limit) {
      FinishEntry(v, e, AppStatus::kError, std::nullopt, true);
    } else {
      PostFaaRead(v, e);
    }
  };
  std::vector<WireRequest> wires;
  wires.push_back(std::move(w));
  PostWires(v, v.current, std::move(wires));
}

void VarunaEngine::OnCasObserved(Vqp& v, Entry& e, uint64_t observed,
                                 bool known_failed) {
  if (!known_failed && observed == e.expect) {
    CasSucceeded(v, e);
    return;
  }
  const MemoryLayout& layout = world_->layout();
  if (observed != e.uid && layout.IsSlotAddr(DecodeUid(observed).slot_addr)) {
    // The target holds another request's Uid; read its slot to learn the
    // value it stands for.
    ++e.attempt;
    uint64_t slot_addr = DecodeUid(observed).slot_addr;
    WorkRequest read =
        transport::MakeRead(e.app.wr_id, slot_addr, 0, kCasSlotBytes);
    read.op_uid = e.app.op_uid;
    read.purpose = OpPurpose::kRecovery;
    WireRequest w{std::move(read), WireRole::kPassthrough, e.pos, {}};
    uint32_t vqp = v.id;
    uint64_t pos = e.pos;
    uint32_t now_attempt = e.attempt;
    w.on_done = [this, vqp, pos, now_attempt, observed,
                 slot_addr](const Completion& c) {
      Vqp& v = vqps_.at(vqp);
      auto it = v.entries.find(pos);
      if (!c.ok() || it == v.entries.end() ||
          it->second.attempt != now_attempt || !c.data) {
        return;
      }
      Entry& e = it->second;
      ++metrics_.uid_translations;
      std::span<const uint8_t> slot(*c.data);
      if (LoadU64(slot, kSlotUidOffset) != observed ||
          LoadU64(slot, kSlotTargetOffset) != e.app.remote_addr) {
        // The holder has moved on; whatever it installed is resolved now.
        RetryCas(v, e);
        return;
      }
      uint64_t logical = LoadU64(slot, kSlotSwapOffset);
      if (logical != e.expect) {
        CasFailed(v, e, logical);
        return;
      }
      // The Uid stands for our expected value: resolve it on the holder's
      // behalf, marking its slot finished first, then try again.
      uint64_t holder_entry = LoadU64(slot, kSlotEntryOffset) & ~kFinishedBit;
      WorkRequest mark = transport::MakeCas(e.app.wr_id, slot_addr + kSlotEntryOffset,
                                            0, holder_entry,
                                            holder_entry | kFinishedBit);
      WorkRequest replace = transport::MakeCas(e.app.wr_id, e.app.remote_addr,
                                               e.app.rkey, observed, logical);
      for (WorkRequest* wr : {&mark, &replace}) {
        wr->purpose = OpPurpose::kConfirm;
        wr->op_uid = e.app.op_uid;
        wr->signaled = false;
      }
      ++metrics_.cas_confirms_posted;
      std::vector<WireRequest> wires;
      wires.push_back({std::move(mark), WireRole::kCasSlot, std::nullopt, {}});
      wires.push_back({std::move(replace), WireRole::kCasSlot, std::nullopt, {}});
      PostWires(v, v.current, std::move(wires));
      RetryCas(v, e);
    };
    std::vector<WireRequest> wires;
    wires.push_back(std::move(w));
    PostWires(v, v.current, std::move(wires));
    return;
  }
  if (known_failed && observed == e.expect) {
    RetryCas(v, e);
    return;
  }
  CasFailed(v, e, observed);
}

void VarunaEngine::CasSucceeded(Vqp& v, Entry& e) {
  PostConfirm(v, e);
  FinishEntry(v, e, AppStatus::kSuccess, e.expect, true);
}

void VarunaEngine::CasFailed(Vqp& v, Entry& e, uint64_t logical) {
  if (e.kind == EntryKind::kExtCas) {
    FinishEntry(v, e, AppStatus::kSuccess, logical, true);
    return;
  }
  // A rewritten FAA keeps trying until its CAS lands.
  if (++e.retries > config_.faa_retry_limit) {
    FinishEntry(v, e, AppStatus::kError, std::nullopt, true);
    return;
  }
  ++metrics_.faa_retries;
  PostFaaRead(v, e);
}

void VarunaEngine::RetryCas(Vqp& v, Entry& e) {
  if (++e.retries > config_.faa_retry_limit) {
    FinishEntry(v, e, AppStatus::kError, std::nullopt, true);
    return;
  }
  if (e.kind == EntryKind::kFaa) {
    ++metrics_.faa_retries;
    PostFaaRead(v, e);
  } else {
    PostCasAttempt(v, e);
  }
}

void VarunaEngine::FinishEntry(Vqp& v, Entry& e, AppStatus status,
                               std::optional<uint64_t> value, bool deliver) {
  e.finished = true;
  if (value && status == AppStatus::kSuccess) {
    RecordReturnValue(e.app.op_uid, *value);
  }
  if (deliver && (e.app.signaled || status != AppStatus::kSuccess)) {
    DeliverFor(v, e.app, status, value);
  }
  Reclaim(v);
}

void VarunaEngine::FinishUpTo(Vqp& v, QpId qp, uint64_t seq) {
  // Completions on a QP arrive in order, so a success covers every earlier
  // unsignaled request posted on the same QP.
  std::vector<Entry*> done;
  for (auto& [_, e] : v.entries) {
    if (e.finished || e.qp != qp || e.last_seq > seq) continue;
    if (e.kind == EntryKind::kWrite || e.kind == EntryKind::kSend) {
      done.push_back(&e);
    }
  }
  for (auto it = v.passthrough.begin(); it != v.passthrough.end();) {
    if (it->first <= seq && it->second.qp == qp) {
      it = v.passthrough.erase(it);
    } else {
      ++it;
    }
  }
  for (Entry* e : done) {
    e->finished = true;
  }
  if (!done.empty()) Reclaim(v);
}

void VarunaEngine::Reclaim(Vqp& v) {
  while (!v.entries.empty()) {
    const Entry& e = v.entries.begin()->second;
    if (!e.finished || e.slot_busy) break;
    v.entries.erase(v.entries.begin());
  }
  v.log_start = v.entries.empty() ? v.log_end : v.entries.begin()->first;
  if (!v.queued.empty()) DrainQueue(v);
}

void VarunaEngine::DeliverFor(const Vqp& v, const WorkRequest& app,
                              AppStatus status, std::optional<uint64_t> value,
                              Bytes data) {
  AppCompletion c;
  c.wr_id = app.wr_id;
  c.vqp = v.id;
  c.op_uid = app.op_uid;
  c.opcode = app.opcode;
  c.status = status;
  c.return_value = value;
  c.data = std::move(data);
  Deliver(std::move(c));
}

void VarunaEngine::KillVqp(Vqp& v) {
  if (v.dead) return;
  v.dead = true;
  v.recovering = false;
  for (auto& [_, e] : v.entries) {
    if (!e.finished) DeliverFor(v, e.app, AppStatus::kError, std::nullopt);
  }
  for (auto& [_, p] : v.passthrough) {
    DeliverFor(v, p.app, AppStatus::kError, std::nullopt);
  }
  for (auto& batch : v.queued) {
    for (auto& wr : batch) DeliverFor(v, wr, AppStatus::kError, std::nullopt);
  }
  v.entries.clear();
  v.passthrough.clear();
  v.queued.clear();
  v.log_start = v.log_end;
}

}  // namespace varuna::failover
