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

#include "varuna/sim/fabric.h"

#include <algorithm>
#include <cmath>

#include "varuna/util/check.h"
#include "absl/strings/str_cat.h"

namespace varuna::sim {

LinkState Link::StateAt(Nanos t) const {
  for (const auto& d : down_) {
    if (d.down <= t && t < d.up) return LinkState::kDown;
  }
  return LinkState::kUp;
}

bool Link::UpThroughout(Nanos from, Nanos to) const {
  return !FirstDownIn(from, to).has_value();
}

std::optional<Nanos> Link::FirstDownIn(Nanos from, Nanos to) const {
  std::optional<Nanos> first;
  for (const auto& d : down_) {
    if (d.down <= to && d.up > from) {
      Nanos cut = std::max(from, d.down);
      if (!first || cut < *first) first = cut;
    }
  }
  return first;
}

Nanos Link::SerializationDelay(uint64_t bytes) const {
  if (bytes == 0) return 0;
  return static_cast<Nanos>(
      std::ceil(static_cast<double>(bytes) / config_.bandwidth_bytes_per_ns));
}

absl::Status Fabric::AddLink(const LinkConfig& config) {
  if (config.mtu == 0) return absl::InvalidArgumentError("mtu must be > 0");
  if (!(config.bandwidth_bytes_per_ns > 0)) {
    return absl::InvalidArgumentError("bandwidth must be > 0");
  }
  if (config.propagation_delay < 0) {
    return absl::InvalidArgumentError("propagation delay must be >= 0");
  }
  if (links_.contains(config.id)) {
    return absl::AlreadyExistsError(absl::StrCat("duplicate link ", config.id));
  }
  links_.emplace(config.id, Link(config));
  return absl::OkStatus();
}

absl::StatusOr<const Link*> Fabric::GetLink(LinkId id) const {
  auto it = links_.find(id);
  if (it == links_.end()) {
    return absl::NotFoundError(absl::StrCat("unknown link ", id));
  }
  return &it->second;
}

Link* Fabric::MutableLink(LinkId id) {
  auto it = links_.find(id);
  VARUNA_CHECK(it != links_.end());
  return &it->second;
}

std::vector<LinkId> Fabric::link_ids() const {
  std::vector<LinkId> ids;
  for (const auto& [id, _] : links_) ids.push_back(id);
  return ids;
}

LinkState Fabric::StateNow(LinkId link) const {
  return links_.at(link).StateAt(loop_->now());
}

uint64_t Fabric::LostAt(LinkId link, Nanos time) const {
  auto it = losses_by_cut_.find({link, time});
  return it == losses_by_cut_.end() ? 0 : it->second;
}

void Fabric::Record(Nanos time, std::string kind, LinkId link,
                    uint64_t packet_id, std::string result) {
  if (!record_trace_) return;
  trace_.push_back(
      {time, std::move(kind), link, packet_id, std::move(result)});
}

void Fabric::RecordLoss(const Packet& packet, LinkId link, Nanos loss_time) {
  ++lost_count_;
  ++losses_by_cut_[{link, loss_time}];
  Nanos at = std::max(loss_time, loop_->now());
  uint64_t id = packet.packet_id;
  const char* what = packet.kind == PacketKind::kAck ? "ack" : "segment";
  loop_->ScheduleAfter(at - loop_->now(), [this, link, id, what] {
    Record(loop_->now(), "lost", link, id, what);
  });
}

TransmitResult Fabric::Transmit(LinkId link_id, Direction dir, Packet packet,
                                Nanos send_time,
                                DeliveryCallback on_delivered) {
  Link* link = MutableLink(link_id);
  if (packet.kind == PacketKind::kRequestSegment) {
    VARUNA_CHECK(packet.payload_bytes <= link->config().mtu);
  }
  send_time = std::max(send_time, loop_->now());
  auto& busy = link->busy_until_[static_cast<int>(dir)];
  Nanos start = std::max(send_time, busy);
  Nanos serialization = link->SerializationDelay(packet.payload_bytes);
  Nanos arrival = start + serialization + link->config().propagation_delay;

  if (auto cut = link->FirstDownIn(send_time, arrival); cut.has_value()) {
    RecordLoss(packet, link_id, *cut);
    return Lost{*cut};
  }
  busy = start + serialization;

  uint64_t id = packet.packet_id;
  auto handle = *loop_->Schedule(
      arrival, [this, id, cb = std::move(on_delivered)] {
        auto it = in_flight_.find(id);
        VARUNA_CHECK(it != in_flight_.end());
        InFlight f = std::move(it->second);
        in_flight_.erase(it);
        ++delivered_count_;
        Record(loop_->now(), "deliver", f.link, id,
               f.packet.kind == PacketKind::kAck ? "ack" : "segment");
        if (cb) cb(f.packet);
      });
  in_flight_.emplace(id, InFlight{link_id, dir, std::move(packet), send_time,
                                  arrival, handle});
  return Delivered{arrival};
}

absl::Status Fabric::InjectFailure(const FailureEvent& event) {
  auto it = links_.find(event.link_id);
  if (it == links_.end()) {
    return absl::NotFoundError(absl::StrCat("unknown link ", event.link_id));
  }
  if (event.time < loop_->now()) {
    return absl::OutOfRangeError("failure scheduled in the past");
  }
  DownInterval interval{event.time, kForever};
  if (const auto* flap = std::get_if<Flap>(&event.kind)) {
    if (flap->recover_after <= 0) {
      return absl::InvalidArgumentError("flap recover_after must be > 0");
    }
    interval.up = event.time + flap->recover_after;
  }
  Link& link = it->second;
  link.down_.push_back(interval);

  // Packets already scheduled for delivery across the new interval.
  std::vector<uint64_t> victims;
  for (const auto& [id, f] : in_flight_) {
    if (f.link == event.link_id && interval.down <= f.arrival_time &&
        interval.up > f.send_time) {
      victims.push_back(id);
    }
  }
  for (uint64_t id : victims) {
    auto node = in_flight_.extract(id);
    loop_->Cancel(node.mapped().delivery);
    RecordLoss(node.mapped().packet, event.link_id,
               std::max(node.mapped().send_time, interval.down));
  }

  LinkId link_id = event.link_id;
  *loop_->Schedule(interval.down, [this, link_id] {
    Record(loop_->now(), "link_down", link_id, 0, "down");
    for (auto& l : listeners_) l(link_id, LinkState::kDown);
  });
  if (interval.up != kForever) {
    *loop_->Schedule(interval.up, [this, link_id] {
      Record(loop_->now(), "link_up", link_id, 0, "up");
      if (links_.at(link_id).StateAt(loop_->now()) == LinkState::kUp) {
        for (auto& l : listeners_) l(link_id, LinkState::kUp);
      }
    });
  }
  return absl::OkStatus();
}

}  // namespace varuna::sim
