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

#include "varuna/failover/log_entry.h"

#include "absl/strings/str_cat.h"

namespace varuna::failover {

absl::StatusOr<LogEntry> LogEntry::Make(uint64_t handle, uint16_t timestamp,
                                        bool finished) {
  auto raw = EncodeLogEntry(handle, timestamp, finished);
  if (!raw.ok()) return raw.status();
  return LogEntry(*raw);
}

absl::StatusOr<uint64_t> EncodeLogEntry(uint64_t handle, uint16_t timestamp,
                                        bool finished) {
  if (handle > kHandleMask) {
    return absl::OutOfRangeError(
        absl::StrCat("FieldOverflow: handle ", handle, " exceeds 48 bits"));
  }
  if (timestamp > kTimestampMask) {
    return absl::OutOfRangeError(absl::StrCat(
        "FieldOverflow: timestamp ", timestamp, " exceeds 15 bits"));
  }
  return handle | (uint64_t{timestamp} << kHandleBits) |
         (uint64_t{finished} << 63);
}

DecodedLogEntry DecodeLogEntry(uint64_t raw) {
  LogEntry e = LogEntry::FromRaw(raw);
  return {e.handle(), e.timestamp(), e.finished()};
}

absl::StatusOr<uint64_t> EncodeUid(uint64_t slot_addr, uint16_t qp_id) {
  if (slot_addr > kHandleMask) {
    return absl::OutOfRangeError(
        absl::StrCat("FieldOverflow: slot address ", slot_addr));
  }
  return (slot_addr << 16) | qp_id;
}

Uid DecodeUid(uint64_t raw) {
  return {raw >> 16, static_cast<uint16_t>(raw & 0xFFFF)};
}

}  // namespace varuna::failover
