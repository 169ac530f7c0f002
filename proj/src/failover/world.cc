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

#include "varuna/failover/world.h"

#include <algorithm>

namespace varuna::failover {

MemoryLayout MemoryLayout::Make(uint64_t data_bytes, uint32_t connections,
                                uint32_t log_capacity, uint32_t recv_slots,
                                uint32_t recv_slot_bytes) {
  auto align = [](uint64_t v) { return (v + 4095) & ~uint64_t{4095}; };
  MemoryLayout l;
  l.data_base = 0;
  l.data_bytes = align(data_bytes);
  l.connections = connections;
  l.log_capacity = log_capacity;
  l.recv_slots = recv_slots;
  l.recv_slot_bytes = recv_slot_bytes;
  l.log_base = l.data_base + l.data_bytes;
  l.cas_base = align(l.log_base + connections * l.log_bytes_per_connection());
  l.recv_base = align(l.cas_base + connections * l.cas_bytes_per_connection());
  return l;
}

World::World(WorldConfig config)
    : config_(std::move(config)),
      layout_(MemoryLayout::Make(config_.data_bytes, config_.connections,
                                 config_.log_capacity, config_.recv_slots,
                                 config_.recv_slot_bytes)),
      fabric_(&loop_) {}

absl::StatusOr<std::unique_ptr<World>> World::Create(WorldConfig config) {
  if (config.links.empty()) {
    return absl::InvalidArgumentError("world needs at least one link");
  }
  if (config.connections == 0 || config.log_capacity == 0) {
    return absl::InvalidArgumentError("connections and log capacity must be > 0");
  }
  std::unique_ptr<World> w(new World(std::move(config)));
  for (const auto& link : w->config_.links) {
    if (auto s = w->fabric_.AddLink(link); !s.ok()) return s;
  }
  const MemoryLayout& l = w->layout_;
  w->memory_ = std::make_unique<sim::ResponderMemory>(
      std::max<uint64_t>(l.total_bytes(), 8));
  w->initial_ = std::make_unique<sim::ResponderMemory>(*w->memory_);
  transport::TransportConfig tc = w->config_.transport;
  tc.recv_base = l.recv_base;
  tc.recv_slots = l.recv_slots;
  tc.recv_slot_bytes = l.recv_slot_bytes;
  w->transport_ = std::make_unique<transport::Transport>(
      &w->loop_, &w->fabric_, w->memory_.get(), &w->trace_, tc);
  std::vector<NicId> nics = w->nics();
  if (auto r = w->transport_->RegisterRegion(l.data_base, l.data_bytes, nics);
      !r.ok()) {
    return r.status();
  }
  if (auto r = w->transport_->RegisterRegion(
          l.log_base, l.recv_base - l.log_base, nics);
      !r.ok()) {
    return r.status();
  }
  return w;
}

std::vector<NicId> World::nics() const {
  std::vector<NicId> out;
  for (const auto& l : config_.links) out.push_back(l.id);
  return out;
}

}  // namespace varuna::failover
