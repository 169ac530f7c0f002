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

#ifndef VARUNA_FAILOVER_WORLD_H_
#define VARUNA_FAILOVER_WORLD_H_

#include <cstdint>
#include <memory>
#include <vector>

#include "absl/status/statusor.h"
#include "varuna/sim/event_loop.h"
#include "varuna/sim/execution_trace.h"
#include "varuna/sim/fabric.h"
#include "varuna/sim/memory.h"
#include "varuna/transport/transport.h"

namespace varuna::failover {

using sim::LinkId;
using sim::Nanos;
using transport::NicId;
using transport::QpId;
using transport::WorkRequest;

inline constexpr uint32_t kCasSlotBytes = 40;
// Word offsets inside a CAS-buffer slot.
inline constexpr uint32_t kSlotSwapOffset = 0;
inline constexpr uint32_t kSlotEntryOffset = 8;
inline constexpr uint32_t kSlotTargetOffset = 16;
inline constexpr uint32_t kSlotUidOffset = 24;
inline constexpr uint32_t kSlotStateOffset = 32;
enum SlotState : uint64_t {
  kSlotEmpty = 0,
  kSlotOccupied = 1,
  kSlotResolved = 2,
  kSlotFailed = 3,
};

// Responder address map: application data, then per-connection completion
// logs, then per-connection CAS buffers, then receive buffers.
struct MemoryLayout {
  uint64_t data_base = 0;
  uint64_t data_bytes = 0;
  uint64_t log_base = 0;
  uint64_t cas_base = 0;
  uint64_t recv_base = 0;
  uint32_t connections = 0;
  uint32_t log_capacity = 0;
  uint32_t recv_slots = 0;
  uint32_t recv_slot_bytes = 0;

  static MemoryLayout Make(uint64_t data_bytes, uint32_t connections,
                           uint32_t log_capacity, uint32_t recv_slots,
                           uint32_t recv_slot_bytes);

  uint64_t log_bytes_per_connection() const { return uint64_t{log_capacity} * 8; }
  uint64_t cas_bytes_per_connection() const {
    return uint64_t{log_capacity} * kCasSlotBytes;
  }
  uint64_t LogAddr(uint32_t conn, uint32_t index) const {
    return log_base + conn * log_bytes_per_connection() + uint64_t{index} * 8;
  }
  uint64_t SlotAddr(uint32_t conn, uint32_t index) const {
    return cas_base + conn * cas_bytes_per_connection() +
           uint64_t{index} * kCasSlotBytes;
  }
  bool IsSlotAddr(uint64_t addr) const {
    return addr >= cas_base &&
           addr < cas_base + connections * cas_bytes_per_connection() &&
           (addr - cas_base) % kCasSlotBytes == 0;
  }
  uint64_t total_bytes() const {
    return recv_base + uint64_t{recv_slots} * recv_slot_bytes;
  }
};

struct WorldConfig {
  std::vector<sim::LinkConfig> links;
  transport::TransportConfig transport;
  uint64_t data_bytes = 1 << 20;
  uint32_t connections = 1;
  uint32_t log_capacity = 128;
  uint32_t recv_slots = 16;
  uint32_t recv_slot_bytes = 4096;
};

// One requester host and one responder host joined by the configured links.
// Every region is registered on every NIC.
class World {
 public:
  static absl::StatusOr<std::unique_ptr<World>> Create(WorldConfig config);

  sim::EventLoop& loop() { return loop_; }
  sim::Fabric& fabric() { return fabric_; }
  sim::ResponderMemory& memory() { return *memory_; }
  const sim::ResponderMemory& initial_memory() const { return *initial_; }
  sim::ExecutionTrace& trace() { return trace_; }
  transport::Transport& transport() { return *transport_; }
  const MemoryLayout& layout() const { return layout_; }
  const WorldConfig& config() const { return config_; }
  std::vector<NicId> nics() const;

  // Snapshot the memory image used as the replay baseline.
  void CaptureInitialMemory() { *initial_ = *memory_; }

 private:
  explicit World(WorldConfig config);

  WorldConfig config_;
  MemoryLayout layout_;
  sim::EventLoop loop_;
  sim::Fabric fabric_;
  std::unique_ptr<sim::ResponderMemory> memory_;
  std::unique_ptr<sim::ResponderMemory> initial_;
  sim::ExecutionTrace trace_;
  std::unique_ptr<transport::Transport> transport_;
};

}  // namespace varuna::failover

#endif  // VARUNA_FAILOVER_WORLD_H_
