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

#include "varuna/sim/execution_trace.h"

#include "varuna/util/check.h"

namespace varuna::sim {

std::string_view OpcodeName(Opcode op) {
  switch (op) {
    case Opcode::kRead:
      return "read";
    case Opcode::kWrite:
      return "write";
    case Opcode::kCas:
      return "cas";
    case Opcode::kFaa:
      return "faa";
    case Opcode::kSend:
      return "send";
  }
  return "?";
}

ResponderMemory SerialReplay(const ExecutionTrace& trace,
                             const ResponderMemory& initial) {
  ResponderMemory memory = initial;
  for (const auto& r : trace.records()) {
    switch (r.opcode) {
      case Opcode::kRead:
        break;
      case Opcode::kWrite:
      case Opcode::kSend:
        if (r.data) VARUNA_CHECK_OK(memory.Write(r.target, *r.data));
        break;
      case Opcode::kCas:
        VARUNA_CHECK_OK(memory.CompareAndSwap(r.target, r.compare, r.swap_or_add)
                     .status());
        break;
      case Opcode::kFaa:
        VARUNA_CHECK_OK(memory.FetchAndAdd(r.target, r.swap_or_add).status());
        break;
    }
  }
  return memory;
}

}  // namespace varuna::sim
