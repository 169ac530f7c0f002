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

#ifndef VARUNA_FAILOVER_CONFIRM_WORKER_H_
#define VARUNA_FAILOVER_CONFIRM_WORKER_H_

#include <cstdint>
#include <set>

#include "varuna/failover/world.h"

namespace varuna::failover {

// Outcome of one resolution attempt on a CAS-buffer slot.
enum class SlotResolution { kIdle, kReplaced, kResolved, kFailed };

// Resolves one slot with local atomics on the responder: if its Uid still
// sits at the target, mark the slot finished and put the real value back.
// Every memory change is appended to `trace`.
SlotResolution ResolveSlot(sim::ResponderMemory& memory,
                           sim::ExecutionTrace& trace, Nanos now,
                           uint64_t slot_addr);

// Responder background task that settles CAS-buffer slots left occupied,
// for example when the requester's Confirm was lost with its link.
class ConfirmWorker {
 public:
  ConfirmWorker(World* world, Nanos period);
  ConfirmWorker(const ConfirmWorker&) = delete;
  ConfirmWorker& operator=(const ConfirmWorker&) = delete;

  // Scans every slot written since the last scan. Returns how many Uids it
  // replaced.
  uint32_t Step();

  size_t pending() const { return dirty_.size(); }
  uint64_t steps() const { return steps_; }
  uint64_t replaced() const { return replaced_; }

 private:
  void Arm();

  World* world_;
  Nanos period_;
  std::set<uint64_t> dirty_;
  bool armed_ = false;
  uint64_t steps_ = 0;
  uint64_t replaced_ = 0;
};

}  // namespace varuna::failover

#endif  // VARUNA_FAILOVER_CONFIRM_WORKER_H_
