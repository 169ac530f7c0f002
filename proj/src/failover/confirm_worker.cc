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

#include "varuna/failover/confirm_worker.h"

#include "varuna/util/check.h"

namespace varuna::failover {

namespace {

constexpr uint64_t kFinishedBit = uint64_t{1} << 63;

void RecordCas(sim::ExecutionTrace& trace, Nanos now, uint64_t addr,
               uint64_t expect, uint64_t swap, uint64_t prior) {
  sim::CommitRecord rec;
  rec.purpose = sim::OpPurpose::kConfirm;
  rec.opcode = sim::Opcode::kCas;
  rec.target = addr;
  rec.length = 8;
  rec.commit_time = now;
  rec.return_value = prior;
  rec.compare = expect;
  rec.swap_or_add = swap;
  rec.effective = prior == expect;
  trace.Append(std::move(rec));
}

void SetState(sim::ResponderMemory& memory, sim::ExecutionTrace& trace,
              Nanos now, uint64_t slot_addr, uint64_t state) {
  uint64_t addr = slot_addr + kSlotStateOffset;
  VARUNA_CHECK_OK(memory.Store64(addr, state));
  sim::CommitRecord rec;
  rec.purpose = sim::OpPurpose::kConfirm;
  rec.opcode = sim::Opcode::kWrite;
  rec.target = addr;
  rec.length = 8;
  rec.commit_time = now;
  rec.data = transport::Word(state);
  rec.effective = true;
  trace.Append(std::move(rec));
}

}  // namespace

SlotResolution ResolveSlot(sim::ResponderMemory& memory,
                           sim::ExecutionTrace& trace, Nanos now,
                           uint64_t slot_addr) {
  uint64_t state = *memory.Load64(slot_addr + kSlotStateOffset);
  if (state != kSlotOccupied) return SlotResolution::kIdle;
  uint64_t swap = *memory.Load64(slot_addr + kSlotSwapOffset);
  uint64_t entry = *memory.Load64(slot_addr + kSlotEntryOffset);
  uint64_t target = *memory.Load64(slot_addr + kSlotTargetOffset);
  uint64_t uid = *memory.Load64(slot_addr + kSlotUidOffset);
  if (memory.Contains(target, 8) && target % 8 == 0 &&
      *memory.Load64(target) == uid) {
    // Mark finished before replacing, as every resolver does, so a slot that
    // is unfinished with no Uid at its target always means the CAS failed.
    uint64_t entry_addr = slot_addr + kSlotEntryOffset;
    uint64_t unfinished = entry & ~kFinishedBit;
    uint64_t prior = *memory.CompareAndSwap(entry_addr, unfinished,
                                            unfinished | kFinishedBit);
    RecordCas(trace, now, entry_addr, unfinished, unfinished | kFinishedBit,
              prior);
    prior = *memory.CompareAndSwap(target, uid, swap);
    RecordCas(trace, now, target, uid, swap, prior);
    SetState(memory, trace, now, slot_addr, kSlotResolved);
    return SlotResolution::kReplaced;
  }
  bool finished = (entry & kFinishedBit) != 0;
  SetState(memory, trace, now, slot_addr,
           finished ? kSlotResolved : kSlotFailed);
  return finished ? SlotResolution::kResolved : SlotResolution::kFailed;
}

ConfirmWorker::ConfirmWorker(World* world, Nanos period)
    : world_(world), period_(period) {
  world_->transport().AddCommitListener([this](const sim::CommitRecord& r) {
    if (r.purpose != sim::OpPurpose::kCasSlot) return;
    if (!world_->layout().IsSlotAddr(r.target)) return;
    dirty_.insert(r.target);
    Arm();
  });
}

void ConfirmWorker::Arm() {
  if (armed_ || period_ <= 0) return;
  armed_ = true;
  world_->loop().ScheduleAfter(period_, [this] {
    armed_ = false;
    Step();
    if (!dirty_.empty()) Arm();
  });
}

uint32_t ConfirmWorker::Step() {
  ++steps_;
  uint32_t replaced = 0;
  Nanos now = world_->loop().now();
  for (uint64_t slot : dirty_) {
    if (ResolveSlot(world_->memory(), world_->trace(), now, slot) ==
        SlotResolution::kReplaced) {
      ++replaced;
    }
  }
  dirty_.clear();
  replaced_ += replaced;
  return replaced;
}

}  // namespace varuna::failover
