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

#ifndef VARUNA_SIM_MEMORY_H_
#define VARUNA_SIM_MEMORY_H_

#include <cstdint>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace varuna::sim {

// Flat byte-addressed responder memory starting at address 0.
class ResponderMemory {
 public:
  explicit ResponderMemory(uint64_t size) : bytes_(size, 0) {}

  uint64_t size() const { return bytes_.size(); }
  bool Contains(uint64_t addr, uint64_t len) const {
    return addr <= bytes_.size() && len <= bytes_.size() - addr;
  }

  absl::Status Write(uint64_t addr, std::span<const uint8_t> data);
  absl::StatusOr<std::vector<uint8_t>> Read(uint64_t addr, uint64_t len) const;

  // 8-byte little-endian word access; `addr` must be 8-aligned.
  absl::StatusOr<uint64_t> Load64(uint64_t addr) const;
  absl::Status Store64(uint64_t addr, uint64_t value);
  // Returns the prior value; stores `swap` iff prior == `expect`.
  absl::StatusOr<uint64_t> CompareAndSwap(uint64_t addr, uint64_t expect,
                                          uint64_t swap);
  absl::StatusOr<uint64_t> FetchAndAdd(uint64_t addr, uint64_t add);

  const std::vector<uint8_t>& image() const { return bytes_; }

 private:
  absl::Status CheckWord(uint64_t addr) const;

  std::vector<uint8_t> bytes_;
};

}  // namespace varuna::sim

#endif  // VARUNA_SIM_MEMORY_H_
