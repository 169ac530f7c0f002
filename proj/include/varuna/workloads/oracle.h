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

#ifndef VARUNA_WORKLOADS_ORACLE_H_
#define VARUNA_WORKLOADS_ORACLE_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varuna/failover/engine.h"
#include "varuna/failover/world.h"
#include "varuna/sim/execution_trace.h"

// Ground-truth checks. Everything here reads the responder's execution
// trace and what the application observed; none of it looks at engine
// state.
namespace varuna::workloads {

using failover::AppStatus;
using failover::Classification;
using sim::Nanos;
using sim::Opcode;

// What the application saw for one operation.
struct OpRecord {
  uint64_t op_uid = 0;
  uint32_t vqp = 0;
  Opcode opcode = Opcode::kWrite;
  uint32_t bytes = 0;  // payload for Write/Send, 8 for atomics, 0 for Read
  uint64_t expect = 0;  // Cas only
  Nanos posted_at = 0;
  std::optional<Nanos> completed_at;
  std::optional<AppStatus> status;
  std::optional<uint64_t> observed;  // return value the application got
  bool idempotent_hint = false;

  bool NonIdempotent() const {
    return opcode != Opcode::kRead && !idempotent_hint;
  }
};

// PostFailure iff the operation has an application commit strictly before
// `failure_time`.
std::map<uint64_t, Classification> OracleClassify(
    const sim::ExecutionTrace& trace, Nanos failure_time,
    std::span<const uint64_t> in_flight);

// Whether the completion-log write of `op_uid` committed before
// `failure_time`.
bool LogWriteCommittedBefore(const sim::ExecutionTrace& trace, uint64_t op_uid,
                             Nanos failure_time);

struct Violation {
  enum class Kind { kDuplicate, kMissing, kReturnMismatch };
  uint64_t op_uid = 0;
  Kind kind = Kind::kDuplicate;
  std::string detail;
};

std::string_view ViolationName(Violation::Kind kind);

// Every non-idempotent operation must have executed once: Writes and Sends
// exactly one commit, atomics at most one commit that changed memory (and
// exactly one when the application saw success). Atomic return values are
// checked against the deciding commit with interim Uids translated through
// the CAS-buffer slot writes in the trace.
std::vector<Violation> OracleCheckExactlyOnce(
    const sim::ExecutionTrace& trace, const failover::MemoryLayout& layout,
    std::span<const OpRecord> ops);

// Value an atomic observed at the responder, with an interim Uid replaced by
// the value its holder swapped in. nullopt if the operation never committed.
std::optional<uint64_t> OracleAtomicResult(const sim::ExecutionTrace& trace,
                                           const failover::MemoryLayout& layout,
                                           uint64_t op_uid);

// Replays the trace over `initial`; true if the result matches `actual`
// byte for byte.
bool OracleSerialReplay(const sim::ExecutionTrace& trace,
                        const sim::ResponderMemory& initial,
                        const sim::ResponderMemory& actual);

}  // namespace varuna::workloads

#endif  // VARUNA_WORKLOADS_ORACLE_H_
