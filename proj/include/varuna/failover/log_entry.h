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

#ifndef VARUNA_FAILOVER_LOG_ENTRY_H_
#define VARUNA_FAILOVER_LOG_ENTRY_H_

#include <cstdint>

#include "absl/status/statusor.h"

namespace varuna::failover {

inline constexpr int kHandleBits = 48;
inline constexpr int kTimestampBits = 15;
inline constexpr uint64_t kHandleMask = (uint64_t{1} << kHandleBits) - 1;
inline constexpr uint16_t kTimestampMask = (1u << kTimestampBits) - 1;

// 8-byte record shared by the request log and the completion log:
//   bits  0..47  request handle
//   bits 48..62  timestamp
//   bit  63      finished
// The all-zero value marks an empty slot.
class LogEntry {
 public:
  constexpr LogEntry() = default;

  // OutOfRange (field overflow) when handle >= 2^48 or timestamp >= 2^15.
  static absl::StatusOr<LogEntry> Make(uint64_t handle, uint16_t timestamp,
                                       bool finished = false);
  static constexpr LogEntry FromRaw(uint64_t raw) { return LogEntry(raw); }

  constexpr uint64_t raw() const { return raw_; }
  constexpr uint64_t handle() const { return raw_ & kHandleMask; }
  constexpr uint16_t timestamp() const {
    return static_cast<uint16_t>((raw_ >> kHandleBits) & kTimestampMask);
  }
  constexpr bool finished() const { return (raw_ >> 63) != 0; }
  constexpr bool empty() const { return raw_ == 0; }

  constexpr LogEntry WithFinished(bool f) const {
    return LogEntry((raw_ & ~(uint64_t{1} << 63)) | (uint64_t{f} << 63));
  }

  // Same request: handle and timestamp agree; the finished bit is ignored.
  constexpr bool SameRequest(LogEntry other) const {
    return (raw_ << 1) == (other.raw_ << 1);
  }

  friend constexpr bool operator==(LogEntry, LogEntry) = default;

 private:
  constexpr explicit LogEntry(uint64_t raw) : raw_(raw) {}
  uint64_t raw_ = 0;
};

// Identifies a request when the application's wr_id is not unique.
struct UnifiedRequestId {
  uint64_t handle = 0;
  uint16_t timestamp = 0;

  static UnifiedRequestId Of(LogEntry e) { return {e.handle(), e.timestamp()}; }
  friend bool operator==(const UnifiedRequestId&,
                         const UnifiedRequestId&) = default;
};

absl::StatusOr<uint64_t> EncodeLogEntry(uint64_t handle, uint16_t timestamp,
                                        bool finished);

struct DecodedLogEntry {
  uint64_t handle = 0;
  uint16_t timestamp = 0;
  bool finished = false;
  friend bool operator==(const DecodedLogEntry&,
                         const DecodedLogEntry&) = default;
};
DecodedLogEntry DecodeLogEntry(uint64_t raw);

// Extended-CAS interim value: 48-bit CAS-buffer slot address in the high
// bits, 16-bit issuing QP id in the low bits.
struct Uid {
  uint64_t slot_addr = 0;
  uint16_t qp_id = 0;

  friend bool operator==(const Uid&, const Uid&) = default;
};

absl::StatusOr<uint64_t> EncodeUid(uint64_t slot_addr, uint16_t qp_id);
Uid DecodeUid(uint64_t raw);

}  // namespace varuna::failover

#endif  // VARUNA_FAILOVER_LOG_ENTRY_H_
