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

#include "varuna/workloads/oracle.h"

#include <cstring>
#include <unordered_map>

#include "absl/strings/str_cat.h"
#include "varuna/failover/log_entry.h"

namespace varuna::workloads {
namespace {

using sim::CommitRecord;
using sim::OpPurpose;

bool IsAtomic(Opcode op) { return op == Opcode::kCas || op == Opcode::kFaa; }

uint64_t WordAt(const std::vector<uint8_t>& bytes, size_t offset) {
  uint64_t v = 0;
  if (offset + 8 <= bytes.size()) std::memcpy(&v, bytes.data() + offset, 8);
  return v;
}

// Application commits per operation, in trace order.
std::unordered_map<uint64_t, std::vector<const CommitRecord*>> AppCommitsByOp(
    const sim::ExecutionTrace& trace) {
  std::unordered_map<uint64_t, std::vector<const CommitRecord*>> out;
  for (const auto& r : trace.records()) {
    if (r.purpose == OpPurpose::kApplication && r.op_uid != 0) {
      out[r.op_uid].push_back(&r);
    }
  }
  return out;
}

// Commit that decided an atomic: the one that changed memory, else the last.
const CommitRecord* Deciding(const std::vector<const CommitRecord*>& commits) {
  const CommitRecord* last = nullptr;
  for (const CommitRecord* r : commits) {
    if (!IsAtomic(r->opcode)) continue;
    if (r->effective) return r;
    last = r;
  }
  return last;
}

// Logical value behind `raw` as of trace position `before`.
uint64_t Translate(const sim::ExecutionTrace& trace,
                   const failover::MemoryLayout& layout, uint64_t raw,
                   uint64_t before) {
  failover::Uid uid = failover::DecodeUid(raw);
  if (!layout.IsSlotAddr(uid.slot_addr)) return raw;
  const auto& records = trace.records();
  for (uint64_t i = std::min<uint64_t>(before, records.size()); i-- > 0;) {
    const CommitRecord& r = records[i];
    if (r.purpose != OpPurpose::kCasSlot || r.target != uid.slot_addr ||
        !r.data) {
      continue;
    }
    if (WordAt(*r.data, failover::kSlotUidOffset) != raw) break;
    return WordAt(*r.data, failover::kSlotSwapOffset);
  }
  return raw;
}

std::optional<uint64_t> ResultOf(const sim::ExecutionTrace& trace,
                                 const failover::MemoryLayout& layout,
                                 const CommitRecord* r) {
  if (r == nullptr || !r->return_value) return std::nullopt;
  return Translate(trace, layout, *r->return_value, r->sequence);
}

}  // namespace

std::map<uint64_t, Classification> OracleClassify(
    const sim::ExecutionTrace& trace, Nanos failure_time,
    std::span<const uint64_t> in_flight) {
  std::map<uint64_t, Classification> out;
  for (uint64_t uid : in_flight) out[uid] = Classification::kPreFailure;
  for (const auto& r : trace.records()) {
    if (r.commit_time >= failure_time) break;
    if (r.purpose != OpPurpose::kApplication) continue;
    auto it = out.find(r.op_uid);
    if (it != out.end()) it->second = Classification::kPostFailure;
  }
  return out;
}

bool LogWriteCommittedBefore(const sim::ExecutionTrace& trace, uint64_t op_uid,
                             Nanos failure_time) {
  for (const auto& r : trace.records()) {
    if (r.commit_time >= failure_time) break;
    if (r.purpose == OpPurpose::kCompletionLog && r.op_uid == op_uid) {
      return true;
    }
  }
  return false;
}

std::string_view ViolationName(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::kDuplicate:
      return "duplicate";
    case Violation::Kind::kMissing:
      return "missing";
    case Violation::Kind::kReturnMismatch:
      return "return_mismatch";
  }
  return "?";
}

std::optional<uint64_t> OracleAtomicResult(const sim::ExecutionTrace& trace,
                                           const failover::MemoryLayout& layout,
                                           uint64_t op_uid) {
  std::vector<const CommitRecord*> commits;
  for (const auto& r : trace.records()) {
    if (r.purpose == OpPurpose::kApplication && r.op_uid == op_uid) {
      commits.push_back(&r);
    }
  }
  return ResultOf(trace, layout, Deciding(commits));
}

std::vector<Violation> OracleCheckExactlyOnce(
    const sim::ExecutionTrace& trace, const failover::MemoryLayout& layout,
    std::span<const OpRecord> ops) {
  auto by_op = AppCommitsByOp(trace);
  static const std::vector<const CommitRecord*> kNone;
  std::vector<Violation> out;
  for (const OpRecord& op : ops) {
    if (!op.NonIdempotent()) continue;
    auto it = by_op.find(op.op_uid);
    const auto& commits = it == by_op.end() ? kNone : it->second;
    bool ok = op.status == AppStatus::kSuccess ||
              op.status == AppStatus::kUnrecoverableReturnValue;
    if (!IsAtomic(op.opcode)) {
      if (commits.size() > 1) {
        out.push_back({op.op_uid, Violation::Kind::kDuplicate,
                       absl::StrCat(commits.size(), " commits")});
      } else if (commits.empty() && ok) {
        out.push_back({op.op_uid, Violation::Kind::kMissing, "no commit"});
      }
      continue;
    }
    size_t effective = 0;
    for (const CommitRecord* r : commits) effective += r->effective ? 1 : 0;
    if (effective > 1) {
      out.push_back({op.op_uid, Violation::Kind::kDuplicate,
                     absl::StrCat(effective, " effective commits")});
      continue;
    }
    if (!ok) continue;
    const CommitRecord* deciding = Deciding(commits);
    if (deciding == nullptr) {
      out.push_back({op.op_uid, Violation::Kind::kMissing, "no commit"});
      continue;
    }
    if (op.status == AppStatus::kSuccess && op.observed) {
      std::optional<uint64_t> truth = ResultOf(trace, layout, deciding);
      if (truth != op.observed) {
        out.push_back({op.op_uid, Violation::Kind::kReturnMismatch,
                       absl::StrCat("observed ", *op.observed, ", trace ",
                                    truth.value_or(0))});
      }
    }
  }
  return out;
}

bool OracleSerialReplay(const sim::ExecutionTrace& trace,
                        const sim::ResponderMemory& initial,
                        const sim::ResponderMemory& actual) {
  return sim::SerialReplay(trace, initial).image() == actual.image();
}

}  // namespace varuna::workloads
