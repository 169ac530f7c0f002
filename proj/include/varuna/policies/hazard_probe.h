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

#ifndef VARUNA_POLICIES_HAZARD_PROBE_H_
#define VARUNA_POLICIES_HAZARD_PROBE_H_

#include <cstdint>

#include "absl/status/statusor.h"
#include "varuna/failover/engine.h"

namespace varuna::policies {

// Two clients on different links update one word. Client 1 writes B over
// the initial A; its link fails after B commits but before the ACK comes
// back. Client 2, whose link survives, then writes C. A policy that reposts
// B on a fresh QP overwrites C with the stale B.
struct HazardSchedule {
  uint64_t a = 0xA;
  uint64_t b = 0xB;
  uint64_t c = 0xC;
  bool inject_failure = true;
  sim::Nanos write_b_at = 0;
  sim::Nanos fail_at = 1500;
  sim::Nanos write_c_at = 6500;
  sim::Nanos propagation_delay = sim::kMicrosecond;
  double bandwidth_bytes_per_ns = 3.125;
};

struct HazardResult {
  uint64_t final_value = 0;
  // 1 when the final value is not C.
  uint32_t inconsistencies = 0;
  // Application commits of the B write.
  uint32_t b_commits = 0;
  // B committed before the failure and its completion was not delivered
  // before it, i.e. the schedule hit the window it aims for.
  bool window_hit = false;
};

absl::StatusOr<HazardResult> RunHazardProbe(failover::PolicyKind kind,
                                            const HazardSchedule& schedule = {});

}  // namespace varuna::policies

#endif  // VARUNA_POLICIES_HAZARD_PROBE_H_
