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

#include "varuna/transport/transport.h"

#include <algorithm>

#include "varuna/util/check.h"
#include "absl/strings/str_cat.h"

namespace varuna::transport {

namespace {

const char* StateName(QpState s) {
  switch (s) {
    case QpState::kReset:
      return "Reset";
    case QpState::kConnecting:
      return "Connecting";
    case QpState::kReady:
      return "Ready";
    case QpState::kError:
      return "Error";
  }
  return "?";
}

// Bytes a request puts on the wire toward the responder.
uint32_t RequestWireBytes(const WorkRequest& wr) {
  switch (wr.opcode) {
    case Opcode::kRead:
      return 0;
    case Opcode::kCas:
    case Opcode::kFaa:
      return kAtomicBytes;
    case Opcode::kWrite:
    case Opcode::kSend:
      return wr.length;
  }
  return 0;
}

}  // namespace

void CompletionQueue::Push(Completion c) {
  entries_.push_back(std::move(c));
  if (notify_) notify_();
}

std::vector<Completion> CompletionQueue::Poll(size_t max) {
  std::vector<Completion> out;
  while (!entries_.empty() && out.size() < max) {
    out.push_back(std::move(entries_.front()));
    entries_.pop_front();
  }
  return out;
}

std::vector<Completion> CompletionQueue::PollIf(
    const std::function<bool(const Completion&)>& pred) {
  std::vector<Completion> out;
  std::deque<Completion> rest;
  for (auto& c : entries_) {
    if (pred(c)) {
      out.push_back(std::move(c));
    } else {
      rest.push_back(std::move(c));
    }
  }
  entries_ = std::move(rest);
  return out;
}

Transport::Transport(sim::EventLoop* loop, sim::Fabric* fabric,
                     sim::ResponderMemory* memory, sim::ExecutionTrace* trace,
                     TransportConfig config)
    : loop_(loop),
      fabric_(fabric),
      memory_(memory),
      trace_(trace),
      config_(config) {}

uint32_t Transport::CreateCq() {
  uint32_t id = next_cq_id_++;
  cqs_[id];
  return id;
}

absl::StatusOr<QpId> Transport::CreateQp(QpKind kind, LinkId link, uint32_t cq,
                                         QpState state) {
  if (!fabric_->GetLink(link).ok()) {
    return absl::NotFoundError(absl::StrCat("unknown link ", link));
  }
  if (!cqs_.contains(cq)) {
    return absl::NotFoundError(absl::StrCat("unknown cq ", cq));
  }
  if (qps_.size() >= 0xFFFF) {
    return absl::ResourceExhaustedError("16-bit QP id space exhausted");
  }
  while (next_qp_id_ == 0 || qps_.contains(next_qp_id_)) ++next_qp_id_;
  QpId id = next_qp_id_++;
  PhysicalQP qp;
  qp.id = id;
  qp.kind = kind;
  qp.state = state;
  qp.link = link;
  qp.cq = cq;
  qp.memory_cost = kind == QpKind::kReliableConnected
                       ? config_.rc_qp_memory_bytes
                       : config_.dc_qp_memory_bytes;
  qps_.emplace(id, qp);
  responder_.erase(id);
  return id;
}

void Transport::DestroyQp(QpId id) {
  auto it = outstanding_.find(id);
  if (it != outstanding_.end()) {
    for (const auto& o : it->second) ops_.erase(o.token);
    outstanding_.erase(it);
  }
  qps_.erase(id);
}

absl::StatusOr<QpId> Transport::RcConnect(LinkId link, uint32_t cq,
                                          ConnectCallback done) {
  auto l = fabric_->GetLink(link);
  if (!l.ok()) return l.status();
  Nanos start = loop_->now();
  if ((*l)->StateAt(start) == sim::LinkState::kDown) {
    return absl::UnavailableError(
        absl::StrCat("ConnectFailed: link ", link, " is down"));
  }
  auto id = CreateQp(QpKind::kReliableConnected, link, cq,
                     QpState::kConnecting);
  if (!id.ok()) return id.status();
  // The first RC connection to an endpoint caches its address handle.
  DcResolveAh(link, 0);
  QpId qp_id = *id;
  loop_->ScheduleAfter(config_.handshake_delay, [this, qp_id, link, start,
                                                 done = std::move(done)] {
    auto it = qps_.find(qp_id);
    if (it == qps_.end()) return;
    const sim::Link* l = *fabric_->GetLink(link);
    if (it->second.state != QpState::kConnecting ||
        !l->UpThroughout(start, loop_->now())) {
      it->second.state = QpState::kError;
      if (done) {
        done(qp_id, absl::UnavailableError(absl::StrCat(
                        "ConnectFailed: link ", link, " down during handshake")));
      }
      return;
    }
    it->second.state = QpState::kReady;
    if (done) done(qp_id, absl::OkStatus());
  });
  return qp_id;
}

std::pair<AddressHandle, Nanos> Transport::DcResolveAh(NicId nic,
                                                       uint32_t endpoint) {
  auto key = std::make_pair(nic, endpoint);
  if (auto it = ah_cache_.find(key); it != ah_cache_.end()) {
    return {it->second, 0};
  }
  AddressHandle ah{nic, endpoint, next_ah_++};
  ah_cache_.emplace(key, ah);
  return {ah, config_.ah_create_delay};
}

absl::StatusOr<MemoryRegion> Transport::RegisterRegion(
    uint64_t base, uint64_t length, std::span<const NicId> nics) {
  if (length == 0) return absl::InvalidArgumentError("empty region");
  if (!memory_->Contains(base, length)) {
    return absl::OutOfRangeError("region outside responder memory");
  }
  MemoryRegion region;
  region.region_id = static_cast<uint32_t>(regions_.size() + 1);
  region.base_addr = base;
  region.length = length;
  for (NicId nic : nics) {
    // Distinct per (region, nic); the constant only scrambles the bits.
    region.rkeys[nic] =
        ((region.region_id * 0x9E3779B1u) ^ (nic * 0x85EBCA77u)) | 1u;
  }
  regions_.push_back(region);
  return region;
}

absl::StatusOr<uint32_t> Transport::RkeyFor(uint64_t addr, NicId nic) const {
  for (const auto& r : regions_) {
    if (addr >= r.base_addr && addr < r.base_addr + r.length) {
      auto it = r.rkeys.find(nic);
      if (it == r.rkeys.end()) {
        return absl::NotFoundError(
            absl::StrCat("region ", r.region_id, " not registered on nic ", nic));
      }
      return it->second;
    }
  }
  return absl::NotFoundError(absl::StrCat("no region contains ", addr));
}

bool Transport::RkeyValid(const WorkRequest& wr, NicId nic) const {
  if (wr.opcode == Opcode::kSend) return true;
  uint64_t len = std::max<uint64_t>(wr.length, 1);
  for (const auto& r : regions_) {
    if (wr.remote_addr >= r.base_addr &&
        wr.remote_addr + len <= r.base_addr + r.length) {
      auto it = r.rkeys.find(nic);
      return it != r.rkeys.end() && it->second == wr.rkey;
    }
  }
  return false;
}

absl::Status Transport::RawPostSend(QpId qp_id,
                                    std::span<const WorkRequest> wr_list) {
  auto it = qps_.find(qp_id);
  if (it == qps_.end()) {
    return absl::NotFoundError(absl::StrCat("unknown qp ", qp_id));
  }
  PhysicalQP& qp = it->second;
  if (qp.state != QpState::kReady) {
    return absl::FailedPreconditionError(
        absl::StrCat("post on qp ", qp_id, " in state ", StateName(qp.state)));
  }
  for (const auto& wr : wr_list) {
    if (auto s = Validate(wr, config_.inline_threshold); !s.ok()) return s;
  }
  const sim::Link* link = *fabric_->GetLink(qp.link);
  const uint32_t mtu = link->config().mtu;
  ++stats_.doorbells;
  auto& outstanding = outstanding_[qp_id];

  auto transmit = [&](sim::Packet packet) {
    ++stats_.segments_sent;
    stats_.bytes_sent += packet.payload_bytes;
    LinkId l = qp.link;
    fabric_->Transmit(l, sim::Direction::kToResponder, std::move(packet),
                      loop_->now(), [this, l](const sim::Packet& p) {
                        ResponderReceive(p, l);
                      });
  };
  auto register_op = [&](const WorkRequest& wr, uint32_t segments) {
    uint64_t token = next_token_++;
    WireOp op{wr, qp_id, qp.link, qp.next_psn, qp.next_psn + segments - 1,
              segments};
    qp.next_psn += segments;
    Outstanding entry;
    entry.token = token;
    entry.last_psn = op.last_psn;
    outstanding.push_back(entry);
    ops_.emplace(token, std::move(op));
    if (wr.purpose == OpPurpose::kCompletionLog) {
      ++stats_.inline_log_packets;
      stats_.inline_log_bytes += wr.length;
    }
    return token;
  };

  size_t i = 0;
  while (i < wr_list.size()) {
    size_t j = i;
    while (j + 1 < wr_list.size() && wr_list[j].bundle_with_next) ++j;
    if (j > i) {
      // Bundled requests share one packet.
      sim::Packet packet;
      packet.packet_id = fabric_->NextPacketId();
      packet.src_qp = qp_id;
      packet.dst_qp = qp_id;
      packet.psn = qp.next_psn;
      uint32_t bytes = 0;
      for (size_t k = i; k <= j; ++k) {
        uint64_t token = register_op(wr_list[k], 1);
        if (k == i) packet.op_token = token;
        bytes += RequestWireBytes(wr_list[k]);
      }
      VARUNA_CHECK(bytes <= mtu);
      packet.payload_bytes = bytes;
      packet.ops_in_packet = static_cast<uint32_t>(j - i + 1);
      transmit(std::move(packet));
    } else {
      const WorkRequest& wr = wr_list[i];
      uint32_t wire = RequestWireBytes(wr);
      uint32_t segments = std::max<uint32_t>(1, (wire + mtu - 1) / mtu);
      uint32_t first_psn = qp.next_psn;
      uint64_t token = register_op(wr, segments);
      uint32_t remaining = wire;
      for (uint32_t s = 0; s < segments; ++s) {
        sim::Packet packet;
        packet.packet_id = fabric_->NextPacketId();
        packet.src_qp = qp_id;
        packet.dst_qp = qp_id;
        packet.psn = first_psn + s;
        packet.op_token = token;
        packet.segment_index = s;
        packet.segment_count = segments;
        packet.payload_bytes = std::min(remaining, mtu);
        remaining -= packet.payload_bytes;
        transmit(std::move(packet));
      }
    }
    i = j + 1;
  }
  return absl::OkStatus();
}

void Transport::ResponderReceive(const sim::Packet& segment, LinkId link) {
  ResponderQp& ctx = responder_[segment.dst_qp];
  if (segment.psn < ctx.expected_psn) {
    ++stats_.duplicate_psns;
    for (const auto& cached : ctx.window) {
      if (cached.psn == segment.psn + segment.ops_in_packet - 1) {
        ++stats_.acks_resent;
        SendAck(cached.ack, link);
        break;
      }
    }
    return;
  }
  if (segment.psn > ctx.expected_psn) {
    ctx.out_of_order.emplace(segment.psn, segment);
    return;
  }
  ProcessInOrder(segment, link, ctx);
  for (auto it = ctx.out_of_order.begin();
       it != ctx.out_of_order.end() && it->first == ctx.expected_psn;
       it = ctx.out_of_order.begin()) {
    sim::Packet next = it->second;
    ctx.out_of_order.erase(it);
    ProcessInOrder(next, link, ctx);
  }
}

void Transport::ProcessInOrder(const sim::Packet& segment, LinkId link,
                               ResponderQp& ctx) {
  ctx.expected_psn = segment.psn + segment.ops_in_packet;
  if (segment.ops_in_packet > 1) {
    for (uint32_t k = 0; k < segment.ops_in_packet; ++k) {
      Commit(segment.op_token + k, link, ctx);
    }
    return;
  }
  if (segment.segment_index + 1 == segment.segment_count) {
    Commit(segment.op_token, link, ctx);
  }
}

uint32_t Transport::NextRecvSlot() {
  uint32_t slot = config_.recv_slots ? recv_count_ % config_.recv_slots : 0;
  ++recv_count_;
  return slot;
}

void Transport::Commit(uint64_t token, LinkId link, ResponderQp& ctx) {
  auto it = ops_.find(token);
  if (it == ops_.end()) return;  // requester already flushed this op
  const WireOp& op = it->second;
  const WorkRequest& wr = op.wr;

  sim::Packet ack;
  ack.packet_id = fabric_->NextPacketId();
  ack.kind = sim::PacketKind::kAck;
  ack.src_qp = op.qp;
  ack.dst_qp = op.qp;
  ack.psn = op.last_psn;
  ack.op_token = token;

  if (!RkeyValid(wr, link)) {
    ack.nak = true;
    ctx.window.push_back({op.last_psn, ack});
    if (ctx.window.size() > config_.psn_window) ctx.window.pop_front();
    SendAck(ack, link);
    return;
  }

  sim::CommitRecord rec;
  rec.op_uid = wr.op_uid;
  rec.purpose = wr.purpose;
  rec.opcode = wr.opcode;
  rec.target = wr.remote_addr;
  rec.length = wr.length;
  rec.commit_time = loop_->now();
  rec.qp_id = op.qp;
  rec.link = link;

  switch (wr.opcode) {
    case Opcode::kRead: {
      auto data = memory_->Read(wr.remote_addr, wr.length);
      VARUNA_CHECK_OK(data.status());
      uint64_t head = 0;
      std::copy_n(data->begin(), std::min<size_t>(8, data->size()),
                  reinterpret_cast<uint8_t*>(&head));
      rec.return_value = head;
      ack.payload_bytes = wr.length;
      it->second.wr.payload = MakeBytes(std::move(*data));
      break;
    }
    case Opcode::kWrite:
      if (wr.payload) {
        VARUNA_CHECK_OK(memory_->Write(wr.remote_addr, *wr.payload));
        rec.data = wr.payload;
        rec.effective = true;
      }
      break;
    case Opcode::kCas: {
      auto prior = memory_->CompareAndSwap(wr.remote_addr, wr.compare_value,
                                           wr.swap_value);
      VARUNA_CHECK_OK(prior.status());
      rec.return_value = *prior;
      rec.compare = wr.compare_value;
      rec.swap_or_add = wr.swap_value;
      rec.effective = *prior == wr.compare_value;
      ack.payload_bytes = kAtomicBytes;
      break;
    }
    case Opcode::kFaa: {
      auto prior = memory_->FetchAndAdd(wr.remote_addr, wr.add_value);
      VARUNA_CHECK_OK(prior.status());
      rec.return_value = *prior;
      rec.swap_or_add = wr.add_value;
      rec.effective = true;
      ack.payload_bytes = kAtomicBytes;
      break;
    }
    case Opcode::kSend: {
      uint32_t slot = NextRecvSlot();
      if (config_.recv_slots > 0 && wr.payload) {
        uint64_t addr = config_.recv_base +
                        static_cast<uint64_t>(slot) * config_.recv_slot_bytes;
        size_t n = std::min<size_t>(wr.payload->size(), config_.recv_slot_bytes);
        auto bytes = MakeBytes(
            std::vector<uint8_t>(wr.payload->begin(), wr.payload->begin() + n));
        VARUNA_CHECK_OK(memory_->Write(addr, *bytes));
        rec.target = addr;
        rec.data = bytes;
        rec.effective = true;
      }
      break;
    }
  }
  ack.ack_return_value = rec.return_value;
  if (wr.opcode == Opcode::kWrite || wr.opcode == Opcode::kSend) {
    ack.ack_return_value.reset();
  }
  ++stats_.commits;
  trace_->Append(rec);
  for (auto& l : commit_listeners_) l(trace_->records().back());

  ctx.window.push_back({op.last_psn, ack});
  if (ctx.window.size() > config_.psn_window) ctx.window.pop_front();
  SendAck(ack, link);
}

void Transport::SendAck(const sim::Packet& ack, LinkId link) {
  sim::Packet copy = ack;
  copy.packet_id = fabric_->NextPacketId();
  fabric_->Transmit(link, sim::Direction::kToRequester, std::move(copy),
                    loop_->now(),
                    [this](const sim::Packet& p) { RequesterReceiveAck(p); });
}

void Transport::RequesterReceiveAck(const sim::Packet& ack) {
  auto qit = qps_.find(ack.dst_qp);
  if (qit == qps_.end() || qit->second.state == QpState::kError) return;
  auto oit = outstanding_.find(ack.dst_qp);
  if (oit == outstanding_.end()) return;
  auto& queue = oit->second;
  bool nak = false;
  for (auto& o : queue) {
    if (o.last_psn > ack.psn) break;
    o.acked = true;
    if (o.token == ack.op_token) {
      o.value = ack.ack_return_value;
      o.nak = ack.nak;
      nak = ack.nak;
    }
  }
  CompletionQueue& cq = cqs_.at(qit->second.cq);
  while (!queue.empty() && queue.front().acked) {
    Outstanding o = std::move(queue.front());
    queue.pop_front();
    auto op_it = ops_.find(o.token);
    if (op_it == ops_.end()) continue;
    const WorkRequest& wr = op_it->second.wr;
    if (wr.signaled || o.nak) {
      Completion c;
      c.wr_id = wr.wr_id;
      c.status = o.nak ? CompletionStatus::kRemoteAccessError
                       : CompletionStatus::kSuccess;
      if (!o.nak) c.return_value = o.value;
      c.qp_id = ack.dst_qp;
      c.opcode = wr.opcode;
      c.owner = wr.owner;
      c.cookie = wr.cookie;
      c.purpose = wr.purpose;
      if (wr.opcode == Opcode::kRead && !o.nak) c.data = wr.payload;
      cq.Push(std::move(c));
    }
    ops_.erase(op_it);
  }
  if (nak) FailQp(ack.dst_qp);
}

void Transport::FailQp(QpId id) {
  auto it = qps_.find(id);
  if (it == qps_.end()) return;
  it->second.state = QpState::kError;
  auto oit = outstanding_.find(id);
  if (oit == outstanding_.end()) return;
  std::deque<Outstanding> flushed = std::move(oit->second);
  outstanding_.erase(oit);
  CompletionQueue& cq = cqs_.at(it->second.cq);
  for (const auto& o : flushed) {
    auto op_it = ops_.find(o.token);
    if (op_it == ops_.end()) continue;
    const WorkRequest& wr = op_it->second.wr;
    Completion c;
    c.wr_id = wr.wr_id;
    c.status = CompletionStatus::kFlushError;
    c.qp_id = id;
    c.opcode = wr.opcode;
    c.owner = wr.owner;
    c.cookie = wr.cookie;
    c.purpose = wr.purpose;
    ops_.erase(op_it);
    cq.Push(std::move(c));
  }
}

void Transport::FailQpsOnLink(LinkId link) {
  std::vector<QpId> ids;
  for (const auto& [id, qp] : qps_) {
    if (qp.link == link && qp.state != QpState::kError) ids.push_back(id);
  }
  for (QpId id : ids) FailQp(id);
}

uint64_t Transport::QpMemoryFootprint() const {
  uint64_t total = 0;
  for (const auto& [_, qp] : qps_) total += qp.memory_cost;
  return total;
}

size_t Transport::outstanding(QpId id) const {
  auto it = outstanding_.find(id);
  return it == outstanding_.end() ? 0 : it->second.size();
}

}  // namespace varuna::transport
