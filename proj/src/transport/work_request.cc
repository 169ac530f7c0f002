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

#include "varuna/transport/work_request.h"

#include <cstring>

#include "absl/strings/str_cat.h"

namespace varuna::transport {

WorkRequest MakeWrite(uint64_t wr_id, uint64_t remote_addr, uint32_t rkey,
                      Bytes payload) {
  WorkRequest wr;
  wr.wr_id = wr_id;
  wr.opcode = Opcode::kWrite;
  wr.length = payload ? static_cast<uint32_t>(payload->size()) : 0;
  wr.payload = std::move(payload);
  wr.remote_addr = remote_addr;
  wr.rkey = rkey;
  return wr;
}

WorkRequest MakeRead(uint64_t wr_id, uint64_t remote_addr, uint32_t rkey,
                     uint32_t length) {
  WorkRequest wr;
  wr.wr_id = wr_id;
  wr.opcode = Opcode::kRead;
  wr.length = length;
  wr.remote_addr = remote_addr;
  wr.rkey = rkey;
  return wr;
}

WorkRequest MakeCas(uint64_t wr_id, uint64_t remote_addr, uint32_t rkey,
                    uint64_t expect, uint64_t swap) {
  WorkRequest wr;
  wr.wr_id = wr_id;
  wr.opcode = Opcode::kCas;
  wr.length = kAtomicBytes;
  wr.remote_addr = remote_addr;
  wr.rkey = rkey;
  wr.compare_value = expect;
  wr.swap_value = swap;
  return wr;
}

WorkRequest MakeFaa(uint64_t wr_id, uint64_t remote_addr, uint32_t rkey,
                    uint64_t add) {
  WorkRequest wr;
  wr.wr_id = wr_id;
  wr.opcode = Opcode::kFaa;
  wr.length = kAtomicBytes;
  wr.remote_addr = remote_addr;
  wr.rkey = rkey;
  wr.add_value = add;
  return wr;
}

WorkRequest MakeSend(uint64_t wr_id, Bytes payload) {
  WorkRequest wr;
  wr.wr_id = wr_id;
  wr.opcode = Opcode::kSend;
  wr.length = payload ? static_cast<uint32_t>(payload->size()) : 0;
  wr.payload = std::move(payload);
  return wr;
}

Bytes MakeBytes(std::vector<uint8_t> bytes) {
  return std::make_shared<const std::vector<uint8_t>>(std::move(bytes));
}

Bytes Word(uint64_t value) {
  std::vector<uint8_t> b(8);
  std::memcpy(b.data(), &value, 8);
  return MakeBytes(std::move(b));
}

absl::Status Validate(const WorkRequest& wr, uint32_t inline_threshold) {
  if (wr.IsAtomic() && wr.length != kAtomicBytes) {
    return absl::InvalidArgumentError(
        absl::StrCat("atomic payload must be 8 bytes, got ", wr.length));
  }
  if (wr.inline_data && wr.length > inline_threshold) {
    return absl::InvalidArgumentError(absl::StrCat(
        "inline payload ", wr.length, " exceeds threshold ", inline_threshold));
  }
  if (wr.payload && wr.payload->size() != wr.length) {
    return absl::InvalidArgumentError("payload size does not match length");
  }
  return absl::OkStatus();
}

}  // namespace varuna::transport
