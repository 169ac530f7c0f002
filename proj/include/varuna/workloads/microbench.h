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

#ifndef VARUNA_WORKLOADS_MICROBENCH_H_
#define VARUNA_WORKLOADS_MICROBENCH_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "varuna/workloads/harness.h"

namespace varuna::workloads {

enum class OpMix { kWrite, kCas, kCasReadBatch };
enum class Mode { kSynchronous, kBatched };

std::string_view OpMixName(OpMix mix);
absl::StatusOr<OpMix> ParseOpMix(std::string_view name);
std::string_view ModeName(Mode mode);
absl::StatusOr<Mode> ParseMode(std::string_view name);

struct MicrobenchSpec {
  OpMix mix = OpMix::kWrite;
  uint32_t payload_bytes = 64;  // Write size; Read size for kCasReadBatch
  uint32_t clients = 1;
  Mode mode = Mode::kBatched;
  uint32_t batch_size = 64;
  // Rounds per client. A round is one batch, or one request (one CAS plus
  // three Reads for kCasReadBatch) in synchronous mode.
  uint32_t rounds = 10;
  // Chance that a CAS carries a stale expected value and must fail.
  double cas_mismatch_prob = 0;
  Nanos bin_ns = 10 * sim::kMicrosecond;
};

absl::Status ValidateMicrobench(const MicrobenchSpec& spec);

struct MicrobenchResult {
  RunMetrics metrics;
  uint64_t cas_ops = 0;
  uint64_t cas_successes = 0;
  // CAS words whose final value differs from what their owner concluded
  // from the return values it saw.
  uint64_t belief_mismatches = 0;
  // Every client finished every round without an error completion.
  bool all_completed = false;
};

// Each client owns one vqp and a disjoint slice of memory; CAS targets in a
// batch are distinct words.
absl::StatusOr<MicrobenchResult> RunMicrobench(const MicrobenchSpec& spec,
                                               const RunSetup& setup,
                                               const RunHook& hook = {});

struct RatioPoint {
  OpMix mix = OpMix::kWrite;
  uint32_t payload_bytes = 0;
  uint32_t batch_size = 0;
  uint32_t runs = 0;
  uint64_t in_flight = 0;
  uint64_t post_failure = 0;
  double ratio = 0;
};

struct RatioSweepSpec {
  struct Op {
    OpMix mix;
    uint32_t payload_bytes;
  };
  std::vector<Op> ops = {{OpMix::kCas, 8},
                         {OpMix::kWrite, 64},
                         {OpMix::kWrite, 4096},
                         {OpMix::kWrite, 65536}};
  std::vector<uint32_t> batch_sizes = {1, 8, 16, 32, 64};
  uint32_t runs = 100;
};

// Share of in-flight requests that had already executed when the link was
// cut, for one batch cut at a uniformly random time in its lifetime.
absl::StatusOr<std::vector<RatioPoint>> MeasurePostFailureRatio(
    const RatioSweepSpec& spec, const RunSetup& base);

}  // namespace varuna::workloads

#endif  // VARUNA_WORKLOADS_MICROBENCH_H_
