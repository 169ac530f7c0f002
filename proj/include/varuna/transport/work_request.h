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

#ifndef VARUNA_TRANSPORT_WORK_REQUEST_H_
#define VARUNA_TRANSPORT_WORK_REQUEST_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "varuna/sim/execution_trace.h"

namespace varuna::transport {

using sim::Opcode;
using sim::OpPurpose;

using QpId = uint16_t;
using NicId = uint32_t;
using Bytes = std::shared_ptr<const std::vector<uint8_t>>;

inline constexpr uint32_t kAtomicBytes = 8;
inline constexpr uint32_t kDefaultInlineThreshold = 64;

// One RDMA operation as handed to a QP. A batch is a contiguous sequence of
// these; list order is posting order.
struct WorkRequest {
  uint64_t wr_id = 0;
  Opcode opcode = Opcode::kWrite;
  // Bytes moved. Write/Send: payload size; Read: bytes fetched;
  // Cas/Faa: always 8.
  uint32_t length = 0;
  Bytes payload;  // Write/Send data; may be null for size-only traffic
  uint64_t remote_addr = 0;
  uint32_t rkey = 0;
  uint64_t compare_value = 0;
  uint64_t swap_value = 0;
  uint64_t add_value = 0;
  bool signaled = true;
  bool inline_data = false;
  bool idempotent_hint = false;

  // Bookkeeping carried alongside the request; not part of the wire format.
  uint64_t op_uid = 0;
  OpPurpose purpose = OpPurpose::kApplication;
  uint32_t owner = 0;   // issuing virtual connection
  uint64_t cookie = 0;  // opaque to the transport
  // Transmit together with the next request in one packet.
  bool bundle_with_next = false;

  bool IsAtomic() const {
    return opcode == Opcode::kCas || opcode == Opcode::kFaa;
  }
  // Write/Cas/Faa/Send without an application idempotence declaration.
  bool IsNonIdempotent() const {
    return opcode != Opcode::kRead && !idempotent_hint;
  }
};

WorkRequest MakeWrite(uint64_t wr_id, uint64_t remote_addr, uint32_t rkey,
                      Bytes payload);
WorkRequest MakeRead(uint64_t wr_id, uint64_t remote_addr, uint32_t rkey,
                     uint32_t length);
WorkRequest MakeCas(uint64_t wr_id, uint64_t remote_addr, uint32_t rkey,
                    uint64_t expect, uint64_t swap);
WorkRequest MakeFaa(uint64_t wr_id, uint64_t remote_addr, uint32_t rkey,
                    uint64_t add);
WorkRequest MakeSend(uint64_t wr_id, Bytes payload);

Bytes MakeBytes(std::vector<uint8_t> bytes);
Bytes Word(uint64_t value);

// Validates the per-request invariants (atomic size, inline threshold).
absl::Status Validate(const WorkRequest& wr,
                      uint32_t inline_threshold = kDefaultInlineThreshold);

enum class CompletionStatus : uint8_t {
  kSuccess,
  kFlushError,         // QP moved to Error with the request outstanding
  kRemoteAccessError,  // responder rejected the rkey or address
};

struct Completion {
  uint64_t wr_id = 0;
  CompletionStatus status = CompletionStatus::kSuccess;
  std::optional<uint64_t> return_value;  // absent on error
  QpId qp_id = 0;
  Opcode opcode = Opcode::kWrite;
  uint32_t owner = 0;
  uint64_t cookie = 0;
  OpPurpose purpose = OpPurpose::kApplication;
  // Read completions: the fetched bytes.
  Bytes data;

  bool ok() const { return status == CompletionStatus::kSuccess; }
};

}  // namespace varuna::transport

#endif  // VARUNA_TRANSPORT_WORK_REQUEST_H_
