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

#ifndef VARUNA_SIM_FABRIC_H_
#define VARUNA_SIM_FABRIC_H_

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "varuna/sim/event_loop.h"

namespace varuna::sim {

using LinkId = uint32_t;

inline constexpr Nanos kForever = std::numeric_limits<Nanos>::max();

// Links are full duplex; both directions fail together.
enum class Direction : uint8_t { kToResponder = 0, kToRequester = 1 };

enum class LinkState : uint8_t { kUp, kDown };

struct LinkConfig {
  LinkId id = 0;
  double bandwidth_bytes_per_ns = 3.125;  // 25 Gbps
  Nanos propagation_delay = kMicrosecond;
  uint32_t mtu = 4096;
};

// A [down, up) interval during which the link carries nothing.
struct DownInterval {
  Nanos down = 0;
  Nanos up = kForever;
};

class Link {
 public:
  explicit Link(LinkConfig config) : config_(config) {}

  const LinkConfig& config() const { return config_; }
  LinkId id() const { return config_.id; }

  // State at time `t` according to the failure schedule known so far.
  LinkState StateAt(Nanos t) const;

  // True when no down interval intersects the closed interval [from, to].
  bool UpThroughout(Nanos from, Nanos to) const;

  // Earliest instant in [from, to] at which the link is down, if any.
  std::optional<Nanos> FirstDownIn(Nanos from, Nanos to) const;

  // ceil(bytes / bandwidth).
  Nanos SerializationDelay(uint64_t bytes) const;

  const std::vector<DownInterval>& down_intervals() const { return down_; }

 private:
  friend class Fabric;

  LinkConfig config_;
  std::vector<DownInterval> down_;
  Nanos busy_until_[2] = {0, 0};
};

enum class PacketKind : uint8_t { kRequestSegment, kAck };

struct Packet {
  uint64_t packet_id = 0;
  uint16_t src_qp = 0;
  uint16_t dst_qp = 0;
  uint32_t psn = 0;
  PacketKind kind = PacketKind::kRequestSegment;
  uint32_t payload_bytes = 0;
  // Opaque reference to the transport-level operation this packet carries.
  uint64_t op_token = 0;
  uint32_t segment_index = 0;
  uint32_t segment_count = 1;
  // Consecutive single-segment operations carried by one packet, starting at
  // `op_token` / `psn`.
  uint32_t ops_in_packet = 1;
  std::optional<uint64_t> ack_return_value;
  // Ack only: the responder refused the operation (e.g. bad rkey).
  bool nak = false;
};

struct HardDown {};
struct Flap {
  Nanos recover_after = 0;
};

struct FailureEvent {
  LinkId link_id = 0;
  Nanos time = 0;
  std::variant<HardDown, Flap> kind = HardDown{};
};

struct Delivered {
  Nanos arrival_time = 0;
};
struct Lost {
  Nanos loss_time = 0;
};
using TransmitResult = std::variant<Delivered, Lost>;

struct FabricTraceRecord {
  Nanos time = 0;
  std::string kind;  // "deliver", "lost", "link_down", "link_up"
  LinkId link = 0;
  uint64_t packet_id = 0;
  std::string result;
};

// Point-to-point links between one requester host and one responder host.
// Each link has per-direction FIFO serialization.
class Fabric {
 public:
  using DeliveryCallback = std::function<void(const Packet&)>;
  using LinkListener = std::function<void(LinkId, LinkState)>;

  explicit Fabric(EventLoop* loop) : loop_(loop) {}
  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  absl::Status AddLink(const LinkConfig& config);
  absl::StatusOr<const Link*> GetLink(LinkId id) const;
  std::vector<LinkId> link_ids() const;

  // Schedules the packet onto `link`. Loss is decided against the failure
  // schedule: a down interval overlapping [send_time, arrival] loses it.
  // Packets later caught by a newly injected failure are also lost.
  // `on_delivered` runs at the arrival time for delivered packets only.
  TransmitResult Transmit(LinkId link, Direction dir, Packet packet,
                          Nanos send_time, DeliveryCallback on_delivered);

  absl::Status InjectFailure(const FailureEvent& event);

  // Called at each link state transition, after the fabric updates.
  void AddLinkListener(LinkListener listener) {
    listeners_.push_back(std::move(listener));
  }

  LinkState StateNow(LinkId link) const;

  void set_record_trace(bool record) { record_trace_ = record; }
  const std::vector<FabricTraceRecord>& trace() const { return trace_; }

  uint64_t delivered_count() const { return delivered_count_; }
  uint64_t lost_count() const { return lost_count_; }
  // Lost packets whose flight was cut by a failure at exactly `time`.
  uint64_t LostAt(LinkId link, Nanos time) const;

  uint64_t NextPacketId() { return next_packet_id_++; }

 private:
  struct InFlight {
    LinkId link;
    Direction dir;
    Packet packet;
    Nanos send_time;
    Nanos arrival_time;
    EventHandle delivery;
  };

  Link* MutableLink(LinkId id);
  void RecordLoss(const Packet& packet, LinkId link, Nanos loss_time);
  void Record(Nanos time, std::string kind, LinkId link, uint64_t packet_id,
              std::string result);

  EventLoop* loop_;
  std::map<LinkId, Link> links_;
  std::map<uint64_t, InFlight> in_flight_;
  std::vector<LinkListener> listeners_;
  std::vector<FabricTraceRecord> trace_;
  std::map<std::pair<LinkId, Nanos>, uint64_t> losses_by_cut_;
  bool record_trace_ = false;
  uint64_t next_packet_id_ = 1;
  uint64_t delivered_count_ = 0;
  uint64_t lost_count_ = 0;
};

}  // namespace varuna::sim

#endif  // VARUNA_SIM_FABRIC_H_
