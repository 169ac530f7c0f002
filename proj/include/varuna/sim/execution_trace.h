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

#ifndef VARUNA_SIM_EXECUTION_TRACE_H_
#define VARUNA_SIM_EXECUTION_TRACE_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "varuna/sim/event_loop.h"
#include "varuna/sim/fabric.h"
#include "varuna/sim/memory.h"

namespace varuna::sim {

enum class Opcode : uint8_t { kRead, kWrite, kCas, kFaa, kSend };

std::string_view OpcodeName(Opcode op);

// Why an operation reached the responder. Only kApplication operations are
// subject to exactly-once accounting.
enum class OpPurpose : uint8_t {
  kApplication,
  kCompletionLog,  // trailing 8-byte completion-log write
  kCasSlot,        // extended-CAS slot write
  kConfirm,        // UID -> value resolution (requester or responder worker)
  kRecovery,       // completion-log / slot / target reads during recovery
  kFaaRead,        // read half of a rewritten fetch-and-add
};

// One operation applied atomically at the responder.
struct CommitRecord {
  uint64_t sequence = 0;
  uint64_t op_uid = 0;  // application operation id; 0 for internal traffic
  OpPurpose purpose = OpPurpose::kApplication;
  Opcode opcode = Opcode::kWrite;
  uint64_t target = 0;
  uint32_t length = 0;
  Nanos commit_time = 0;
  std::optional<uint64_t> return_value;
  uint16_t qp_id = 0;
  LinkId link = 0;
  // Replay inputs.
  std::shared_ptr<const std::vector<uint8_t>> data;  // Write / Send bytes
  uint64_t compare = 0;
  uint64_t swap_or_add = 0;
  // Whether the operation changed memory.
  bool effective = false;
};

// Responder-side ground truth: append-only, ordered by commit time.
class ExecutionTrace {
 public:
  void Append(CommitRecord record) {
    record.sequence = records_.size();
    records_.push_back(std::move(record));
  }
  const std::vector<CommitRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }

 private:
  std::vector<CommitRecord> records_;
};

// Serially re-applies every record to `initial`.
ResponderMemory SerialReplay(const ExecutionTrace& trace,
                             const ResponderMemory& initial);

}  // namespace varuna::sim

#endif  // VARUNA_SIM_EXECUTION_TRACE_H_
