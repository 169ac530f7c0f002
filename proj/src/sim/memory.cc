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

#include "varuna/sim/memory.h"

#include <cstring>

#include "absl/strings/str_cat.h"

namespace varuna::sim {

absl::Status ResponderMemory::CheckWord(uint64_t addr) const {
  if (addr % 8 != 0) {
    return absl::InvalidArgumentError(absl::StrCat("unaligned word ", addr));
  }
  if (!Contains(addr, 8)) {
    return absl::OutOfRangeError(absl::StrCat("word out of range ", addr));
  }
  return absl::OkStatus();
}

absl::Status ResponderMemory::Write(uint64_t addr,
                                    std::span<const uint8_t> data) {
  if (!Contains(addr, data.size())) {
    return absl::OutOfRangeError(
        absl::StrCat("write [", addr, ", +", data.size(), ") out of range"));
  }
  if (!data.empty()) std::memcpy(bytes_.data() + addr, data.data(), data.size());
  return absl::OkStatus();
}

absl::StatusOr<std::vector<uint8_t>> ResponderMemory::Read(uint64_t addr,
                                                           uint64_t len) const {
  if (!Contains(addr, len)) {
    return absl::OutOfRangeError(
        absl::StrCat("read [", addr, ", +", len, ") out of range"));
  }
  return std::vector<uint8_t>(bytes_.begin() + addr,
                              bytes_.begin() + addr + len);
}

absl::StatusOr<uint64_t> ResponderMemory::Load64(uint64_t addr) const {
  if (auto s = CheckWord(addr); !s.ok()) return s;
  uint64_t v;
  std::memcpy(&v, bytes_.data() + addr, 8);
  return v;
}

absl::Status ResponderMemory::Store64(uint64_t addr, uint64_t value) {
  if (auto s = CheckWord(addr); !s.ok()) return s;
  std::memcpy(bytes_.data() + addr, &value, 8);
  return absl::OkStatus();
}

absl::StatusOr<uint64_t> ResponderMemory::CompareAndSwap(uint64_t addr,
                                                         uint64_t expect,
                                                         uint64_t swap) {
  auto prior = Load64(addr);
  if (!prior.ok()) return prior;
  if (*prior == expect) {
    std::memcpy(bytes_.data() + addr, &swap, 8);
  }
  return prior;
}

absl::StatusOr<uint64_t> ResponderMemory::FetchAndAdd(uint64_t addr,
                                                      uint64_t add) {
  auto prior = Load64(addr);
  if (!prior.ok()) return prior;
  uint64_t next = *prior + add;
  std::memcpy(bytes_.data() + addr, &next, 8);
  return prior;
}

}  // namespace varuna::sim
