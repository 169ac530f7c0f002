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

#include <cmath>
#include <cstdint>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"
#include "varuna/workloads/harness.h"
#include "varuna/workloads/microbench.h"
#include "varuna/workloads/oracle.h"
#include "varuna/workloads/tx_workload.h"

namespace varuna::workloads {
namespace {

using failover::Classification;

RunSetup CasSuiteSetup(uint64_t seed) {
  RunSetup s = DefaultSetup();
  s.seed = seed;
  s.failures.random = RandomFailures{.count = 1,
                                     .window_start = 0,
                                     .window_end = 7 * sim::kMicrosecond,
                                     .links = {0},
                                     .flap_recover_after = std::nullopt};
  return s;
}

MicrobenchSpec CasSuiteSpec() {
  MicrobenchSpec m;
  m.mix = OpMix::kCas;
  m.clients = 2;
  m.batch_size = 16;
  m.rounds = 3;
  m.cas_mismatch_prob = 0.25;
  m.payload_bytes = 16;
  return m;
}

TEST(OracleTest, ClassifiesByCommitBeforeFailure) {
  sim::ExecutionTrace trace;
  trace.Append({.op_uid = 1, .commit_time = 99});
  trace.Append({.op_uid = 2, .commit_time = 100});
  std::vector<uint64_t> in_flight = {1, 2, 3};
  auto c = OracleClassify(trace, 100, in_flight);
  EXPECT_EQ(c[1], Classification::kPostFailure);
  EXPECT_EQ(c[2], Classification::kPreFailure);
  EXPECT_EQ(c[3], Classification::kPreFailure);
}

TEST(OracleTest, FlagsDuplicateWrite) {
  sim::ExecutionTrace trace;
  trace.Append({.op_uid = 5, .opcode = Opcode::kWrite, .commit_time = 1});
  trace.Append({.op_uid = 5, .opcode = Opcode::kWrite, .commit_time = 2});
  OpRecord op{.op_uid = 5, .opcode = Opcode::kWrite};
  op.status = AppStatus::kSuccess;
  auto v = OracleCheckExactlyOnce(trace, failover::MemoryLayout{},
                                  std::span<const OpRecord>(&op, 1));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::kDuplicate);
}

TEST(OracleTest, FlagsCasReturnMismatch) {
  sim::ExecutionTrace trace;
  trace.Append({.op_uid = 7, .opcode = Opcode::kCas, .commit_time = 1,
                .return_value = 4, .compare = 3, .swap_or_add = 9});
  OpRecord op{.op_uid = 7, .opcode = Opcode::kCas, .bytes = 8, .expect = 3};
  op.status = AppStatus::kSuccess;
  op.observed = 3;
  auto v = OracleCheckExactlyOnce(trace, failover::MemoryLayout{},
                                  std::span<const OpRecord>(&op, 1));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].kind, Violation::Kind::kReturnMismatch);
}

TEST(OracleTest, EmptyTraceReplaysToInitial) {
  sim::ExecutionTrace trace;
  sim::ResponderMemory initial(64);
  ASSERT_TRUE(initial.Store64(8, 42).ok());
  EXPECT_TRUE(OracleSerialReplay(trace, initial, initial));
}

TEST(OracleTest, OneCasChangesEightBytes) {
  sim::ResponderMemory initial(64);
  sim::ExecutionTrace trace;
  trace.Append({.op_uid = 1, .opcode = Opcode::kCas, .target = 16,
                .compare = 0, .swap_or_add = 0x0102030405060708});
  sim::ResponderMemory after = sim::SerialReplay(trace, initial);
  int differ = 0;
  for (size_t i = 0; i < 64; ++i) {
    differ += after.image()[i] != initial.image()[i] ? 1 : 0;
  }
  EXPECT_EQ(differ, 8);
}

TEST(MicrobenchTest, FailureFreeWriteLogsOnePacketPerOp) {
  MicrobenchSpec m;
  m.mix = OpMix::kWrite;
  m.payload_bytes = 4096;
  m.clients = 4;
  m.rounds = 5;
  auto r = RunMicrobench(m, DefaultSetup());
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_TRUE(r->all_completed);
  EXPECT_EQ(r->metrics.ops_succeeded, 4u * 5 * 64);
  EXPECT_EQ(r->metrics.inline_log_packets, r->metrics.non_idempotent_ops);
  EXPECT_EQ(r->metrics.inline_log_bytes, 8 * r->metrics.non_idempotent_ops);
  EXPECT_EQ(r->metrics.violations(), 0u);
}

TEST(MicrobenchTest, ReadsAreNotLogged) {
  MicrobenchSpec m;
  m.mix = OpMix::kCasReadBatch;
  m.clients = 2;
  m.rounds = 4;
  auto r = RunMicrobench(m, DefaultSetup());
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_EQ(r->metrics.read_ops, 3 * r->cas_ops);
  EXPECT_EQ(r->metrics.inline_log_packets, r->cas_ops);
}

TEST(MicrobenchTest, VarunaCommitsSameBytesAsNoBackup) {
  MicrobenchSpec m;
  m.payload_bytes = 4096;
  m.clients = 4;
  m.rounds = 4;
  RunSetup v = DefaultSetup();
  RunSetup n = DefaultSetup();
  n.policy = PolicyKind::kNoBackup;
  auto a = RunMicrobench(m, v);
  auto b = RunMicrobench(m, n);
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(a->metrics.committed_app_bytes, b->metrics.committed_app_bytes);
  EXPECT_EQ(b->metrics.inline_log_packets, 0u);
  EXPECT_GT(a->metrics.throughput_gbps, 0.95 * b->metrics.throughput_gbps);
}

TEST(MicrobenchTest, CasSuiteUnderFailuresIsExactlyOnce) {
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    auto r = RunMicrobench(CasSuiteSpec(), CasSuiteSetup(seed));
    ASSERT_TRUE(r.ok()) << r.status();
    const RunMetrics& m = r->metrics;
    EXPECT_TRUE(r->all_completed) << "seed " << seed;
    EXPECT_EQ(m.violations(), 0u) << "seed " << seed;
    EXPECT_EQ(r->belief_mismatches, 0u) << "seed " << seed;
    EXPECT_EQ(m.classification_mismatches, 0u) << "seed " << seed;
    EXPECT_EQ(m.bytes_retransmitted,
              m.oracle_pre_failure_bytes + m.corner_case_write_bytes)
        << "seed " << seed;
  }
}

TEST(MicrobenchTest, ResendDuplicatesCasUnderFailures) {
  uint64_t duplicates = 0;
  for (uint64_t seed = 1; seed <= 60; ++seed) {
    RunSetup s = CasSuiteSetup(seed);
    s.policy = PolicyKind::kResend;
    auto r = RunMicrobench(CasSuiteSpec(), s);
    ASSERT_TRUE(r.ok()) << r.status();
    duplicates += r->metrics.duplicate_commits + r->metrics.return_mismatches;
    EXPECT_TRUE(r->metrics.replay_matches);
  }
  EXPECT_GT(duplicates, 0u);
}

TEST(RatioTest, BoundedAndFallsWithPayload) {
  RatioSweepSpec spec;
  spec.ops = {{OpMix::kWrite, 64}, {OpMix::kWrite, 4096},
              {OpMix::kWrite, 65536}};
  spec.batch_sizes = {64};
  spec.runs = 100;
  auto points = MeasurePostFailureRatio(spec, DefaultSetup());
  ASSERT_TRUE(points.ok()) << points.status();
  ASSERT_EQ(points->size(), 3u);
  for (const auto& p : *points) {
    EXPECT_GE(p.ratio, 0.0);
    EXPECT_LE(p.ratio, 1.0);
    EXPECT_GT(p.in_flight, 0u);
  }
  EXPECT_GT((*points)[0].ratio, (*points)[1].ratio);
  EXPECT_GT((*points)[1].ratio, (*points)[2].ratio);
}

RunSetup TxSetup(PolicyKind policy, bool fail) {
  RunSetup s = DefaultSetup();
  s.policy = policy;
  if (fail) s.failures.fixed.push_back({.link_id = 0, .time = sim::kMillisecond});
  return s;
}

TEST(TxWorkloadTest, FailureFreeRunsAgreeAcrossBaselines) {
  TxWorkloadSpec t;
  t.duration = sim::kMillisecond;
  auto a = RunTxWorkload(t, TxSetup(PolicyKind::kNoBackup, false));
  auto b = RunTxWorkload(t, TxSetup(PolicyKind::kResend, false));
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_GT(a->committed, 0u);
  EXPECT_EQ(a->committed, b->committed);
  EXPECT_EQ(a->inconsistencies, 0u);
}

TEST(TxWorkloadTest, VarunaStaysConsistentAndRecovers) {
  TxWorkloadSpec t;
  auto clean = RunTxWorkload(t, TxSetup(PolicyKind::kVaruna, false));
  auto failed = RunTxWorkload(t, TxSetup(PolicyKind::kVaruna, true));
  ASSERT_TRUE(clean.ok() && failed.ok());
  EXPECT_EQ(failed->inconsistencies, 0u);
  EXPECT_EQ(failed->lock_token_corruption, 0u);
  EXPECT_EQ(failed->lost_updates, 0u);
  EXPECT_EQ(failed->failed_clients, 0u);
  EXPECT_LT(failed->longest_gap_ns, 100 * sim::kMicrosecond);
  // Bins from 2 ms to 4.9 ms against the failure-free run.
  uint64_t a = 0, b = 0;
  for (size_t i = 20; i < 49; ++i) {
    a += failed->tx_timeseries[i];
    b += clean->tx_timeseries[i];
  }
  EXPECT_GE(static_cast<double>(a), 0.9 * static_cast<double>(b));
}

TEST(TxWorkloadTest, ResendStallsForTheHandshake) {
  TxWorkloadSpec t;
  auto r = RunTxWorkload(t, TxSetup(PolicyKind::kResend, true));
  ASSERT_TRUE(r.ok());
  EXPECT_GE(r->longest_gap_ns, transport::TransportConfig{}.handshake_delay);
  for (size_t i = 11; i < 30; ++i) EXPECT_EQ(r->tx_timeseries[i], 0u) << i;
}

TEST(TxWorkloadTest, ZipfSkewRuns) {
  TxWorkloadSpec t;
  t.skew = KeySkew::kZipf;
  t.duration = sim::kMillisecond;
  auto r = RunTxWorkload(t, TxSetup(PolicyKind::kVaruna, false));
  ASSERT_TRUE(r.ok());
  EXPECT_GT(r->aborted, 0u);
  EXPECT_EQ(r->inconsistencies, 0u);
}

}  // namespace
}  // namespace varuna::workloads
