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

#include "varuna/failover/engine.h"

#include <algorithm>

#include "absl/strings/str_cat.h"
#include "varuna/util/check.h"

namespace varuna::failover {

std::string_view PolicyName(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kNoBackup:
      return "no-backup";
    case PolicyKind::kResend:
      return "resend";
    case PolicyKind::kResendCache:
      return "resend-cache";
    case PolicyKind::kVaruna:
      return "varuna";
  }
  return "?";
}

absl::StatusOr<PolicyKind> ParsePolicy(std::string_view name) {
  for (PolicyKind k : {PolicyKind::kNoBackup, PolicyKind::kResend,
                       PolicyKind::kResendCache, PolicyKind::kVaruna}) {
    if (PolicyName(k) == name) return k;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown policy '", std::string(name), "'"));
}

uint32_t DcqpPoolSize(const DcqpPolicy& policy, uint64_t rc_count) {
  if (policy.kind == DcqpPolicy::Kind::kFixed) return std::max<uint32_t>(policy.n, 1);
  uint64_t k = std::max<uint32_t>(policy.n, 1);
  return static_cast<uint32_t>(std::max<uint64_t>(1, (rc_count + k - 1) / k));
}

Engine::Engine(World* world, EngineConfig config)
    : world_(world),
      transport_(world->transport()),
      loop_(world->loop()),
      config_(std::move(config)),
      rng_(config_.seed) {
  if (config_.link_order.empty()) {
    for (const auto& l : world->config().links) config_.link_order.push_back(l.id);
  }
  world_->fabric().AddLinkListener([this](LinkId link, sim::LinkState state) {
    ScheduleDetection(link, state);
  });
}

void Engine::ScheduleDetection(LinkId link, sim::LinkState state) {
  const DetectionConfig& d = config_.detection;
  Nanos now = loop_.now();
  std::optional<Nanos> delay;
  if (d.port_event) delay = d.port_event_delay;
  if (state == sim::LinkState::kDown && d.heartbeat &&
      d.heartbeat_interval > 0) {
    // First beat at or after the failure misses; detection on the last of
    // `heartbeat_misses` consecutive misses.
    Nanos first = (now + d.heartbeat_interval - 1) / d.heartbeat_interval *
                  d.heartbeat_interval;
    Nanos at = first + static_cast<Nanos>(std::max<uint32_t>(d.heartbeat_misses, 1) - 1) *
                           d.heartbeat_interval;
    if (!delay || at - now < *delay) delay = at - now;
  }
  if (!delay && state == sim::LinkState::kUp && d.heartbeat) {
    delay = d.heartbeat_interval;
  }
  if (!delay) return;
  loop_.ScheduleAfter(*delay, [this, link, state] {
    if (state == sim::LinkState::kDown) {
      // A flap shorter than the detection delay still broke every RC
      // connection that had packets on the wire.
      DetectFailure(link);
    } else {
      DetectRecovery(link);
    }
  });
}

void Engine::DetectFailure(LinkId link) {
  if (!detected_down_.insert(link).second) return;
  metrics_.detection_times.push_back(loop_.now());
  transport_.FailQpsOnLink(link);
  OnLinkDown(link);
  if (world_->fabric().StateNow(link) == sim::LinkState::kUp) {
    loop_.ScheduleAfter(config_.detection.port_event_delay,
                        [this, link] { DetectRecovery(link); });
  }
}

void Engine::DetectRecovery(LinkId link) {
  if (world_->fabric().StateNow(link) != sim::LinkState::kUp) return;
  if (detected_down_.erase(link) > 0) OnLinkUp(link);
}

void Engine::WatchCq(uint32_t cq) {
  transport_.cq(cq).set_notify([this, cq] {
    if (!drain_scheduled_.insert(cq).second) return;
    loop_.ScheduleAfter(0, [this, cq] { DrainCq(cq); });
  });
}

void Engine::DrainCq(uint32_t cq) {
  drain_scheduled_.erase(cq);
  for (const Completion& c : transport_.cq(cq).Poll()) OnCompletion(c);
}

void Engine::Deliver(AppCompletion c) {
  if (c.return_value && c.status == AppStatus::kSuccess) {
    return_values_[c.op_uid] = *c.return_value;
  }
  if (handler_) handler_(c);
  delivered_[c.vqp].push_back(std::move(c));
}

std::vector<AppCompletion> Engine::PollCq(uint32_t vqp,
                                          std::optional<uint64_t> wr_id) {
  std::vector<AppCompletion> out;
  auto it = delivered_.find(vqp);
  if (it == delivered_.end()) return out;
  std::deque<AppCompletion> rest;
  for (auto& c : it->second) {
    if (!wr_id || c.wr_id == *wr_id) {
      out.push_back(std::move(c));
    } else {
      rest.push_back(std::move(c));
    }
  }
  it->second = std::move(rest);
  return out;
}

std::optional<uint64_t> Engine::ReturnValue(uint64_t op_uid) const {
  auto it = return_values_.find(op_uid);
  if (it == return_values_.end()) return std::nullopt;
  return it->second;
}

uint64_t Engine::QpMemoryBytes() const { return transport_.QpMemoryFootprint(); }

size_t Engine::LinkRank(LinkId link) const {
  auto it = std::find(config_.link_order.begin(), config_.link_order.end(), link);
  return static_cast<size_t>(it - config_.link_order.begin());
}

LinkId Engine::HomeLink(uint32_t vqp) const {
  if (config_.home_links.empty()) return config_.link_order.front();
  return config_.home_links[vqp % config_.home_links.size()];
}

std::optional<LinkId> Engine::NextLink(LinkId from) const {
  const auto& order = config_.link_order;
  size_t start = LinkRank(from);
  for (size_t step = 1; step <= order.size(); ++step) {
    LinkId cand = order[(start + step) % order.size()];
    if (cand != from && LinkUsable(cand)) return cand;
  }
  return std::nullopt;
}

uint32_t Engine::RkeyFor(uint64_t addr, LinkId link) const {
  auto rkey = transport_.RkeyFor(addr, link);
  VARUNA_CHECK(rkey.ok());
  return *rkey;
}

void Engine::RetargetRkeys(std::vector<WorkRequest>& wrs, LinkId link) const {
  for (auto& wr : wrs) {
    if (wr.opcode == Opcode::kSend) continue;
    wr.rkey = RkeyFor(wr.remote_addr, link);
  }
}

uint32_t Engine::RequestBytes(const WorkRequest& wr) {
  switch (wr.opcode) {
    case Opcode::kRead:
      return 0;
    case Opcode::kCas:
    case Opcode::kFaa:
      return transport::kAtomicBytes;
    case Opcode::kWrite:
    case Opcode::kSend:
      return wr.length;
  }
  return 0;
}

}  // namespace varuna::failover
