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

#include "varuna/failover/varuna_engine.h"

#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "gtest/gtest.h"
#include "test_util.h"

namespace varuna::failover {
namespace {

using sim::kMicrosecond;
using sim::kMillisecond;
using testing_util::AppCommits;
using testing_util::DataRkey;
using testing_util::MakeWorld;
using testing_util::TwoLinkConfig;
using transport::MakeCas;
using transport::MakeFaa;
using transport::MakeRead;
using transport::MakeSend;
using transport::MakeWrite;
using transport::OpPurpose;

std::vector<uint8_t> Pattern(size_t n, uint8_t seed) {
  std::vector<uint8_t> v(n);
  for (size_t i = 0; i < n; ++i) v[i] = static_cast<uint8_t>(seed + i * 7);
  return v;
}

class VarunaTest : public ::testing::Test {
 protected:
  void Build(uint32_t vqps, EngineConfig config = {},
             uint32_t log_capacity = 128) {
    world_ = MakeWorld(TwoLinkConfig(vqps, log_capacity));
    config.link_order = {0, 1};
    config.log_capacity = log_capacity;
    engine_ = std::make_unique<VarunaEngine>(world_.get(), config);
    ASSERT_TRUE(engine_->Setup(vqps).ok());
    engine_->set_completion_handler(
        [this](const AppCompletion& c) { seen_.push_back(c); });
  }

  uint64_t Addr(uint64_t offset) const {
    return world_->layout().data_base + offset;
  }
  uint32_t Rkey() { return DataRkey(*world_); }
  uint64_t Load(uint64_t addr) { return *world_->memory().Load64(addr); }
  void Store(uint64_t addr, uint64_t v) {
    ASSERT_TRUE(world_->memory().Store64(addr, v).ok());
  }

  void RunToIdle(sim::Nanos limit = 100 * kMillisecond) {
    world_->loop().RunUntil(limit);
  }

  WorkRequest Write(uint64_t id, uint64_t offset, size_t bytes, uint8_t seed) {
    WorkRequest wr = MakeWrite(id, Addr(offset), Rkey(),
                               transport::MakeBytes(Pattern(bytes, seed)));
    wr.op_uid = id;
    return wr;
  }
  WorkRequest Cas(uint64_t id, uint64_t offset, uint64_t expect,
                  uint64_t swap) {
    WorkRequest wr = MakeCas(id, Addr(offset), Rkey(), expect, swap);
    wr.op_uid = id;
    return wr;
  }

  const AppCompletion* Find(uint64_t op_uid) const {
    for (const auto& c : seen_) {
      if (c.op_uid == op_uid) return &c;
    }
    return nullptr;
  }

  std::unique_ptr<World> world_;
  std::unique_ptr<VarunaEngine> engine_;
  std::vector<AppCompletion> seen_;
};

TEST(DcqpPoolSizeTest, FixedAndRatio) {
  EXPECT_EQ(DcqpPoolSize({DcqpPolicy::Kind::kFixed, 1}, 0), 1u);
  EXPECT_EQ(DcqpPoolSize({DcqpPolicy::Kind::kFixed, 1}, 4096), 1u);
  EXPECT_EQ(DcqpPoolSize({DcqpPolicy::Kind::kRatio, 8}, 17), 3u);
  EXPECT_EQ(DcqpPoolSize({DcqpPolicy::Kind::kRatio, 8}, 16), 2u);
  EXPECT_EQ(DcqpPoolSize({DcqpPolicy::Kind::kRatio, 8}, 0), 1u);
}

TEST_F(VarunaTest, ReadIsNotLogged) {
  Build(1);
  std::vector<WorkRequest> in = {MakeRead(1, Addr(0), Rkey(), 64)};
  auto out = engine_->WrLogging(0, in);
  ASSERT_TRUE(out.ok());
  ASSERT_EQ(out->size(), 1u);
  EXPECT_EQ((*out)[0].wr.opcode, Opcode::kRead);
  EXPECT_EQ((*out)[0].role, WireRole::kPassthrough);
  EXPECT_EQ(engine_->LiveLogEntries(0), 0u);
}

TEST_F(VarunaTest, WriteGetsTrailingLogWrite) {
  Build(1);
  std::vector<WorkRequest> in = {Write(7, 0, 64, 1)};
  auto out = engine_->WrLogging(0, in);
  ASSERT_TRUE(out.ok());
  ASSERT_EQ(out->size(), 2u);
  const WorkRequest& op = (*out)[0].wr;
  const WorkRequest& log = (*out)[1].wr;
  EXPECT_EQ(op.opcode, Opcode::kWrite);
  EXPECT_FALSE(op.signaled);
  EXPECT_EQ(log.opcode, Opcode::kWrite);
  EXPECT_TRUE(log.signaled);
  EXPECT_TRUE(log.inline_data);
  EXPECT_EQ(log.length, 8u);
  EXPECT_EQ(log.wr_id, 7u);
  EXPECT_EQ(log.remote_addr, world_->layout().LogAddr(0, 0));
  EXPECT_EQ(log.purpose, OpPurpose::kCompletionLog);
  EXPECT_EQ(engine_->LiveLogEntries(0), 1u);
}

TEST_F(VarunaTest, UnsignaledWriteKeepsLogWriteUnsignaled) {
  Build(1);
  WorkRequest wr = Write(7, 0, 64, 1);
  wr.signaled = false;
  std::vector<WorkRequest> in = {wr};
  auto out = engine_->WrLogging(0, in);
  ASSERT_TRUE(out.ok());
  EXPECT_FALSE((*out)[1].wr.signaled);
}

TEST_F(VarunaTest, BatchOf64WritesLogsEachIndependently) {
  Build(1);
  std::vector<WorkRequest> in;
  for (int i = 0; i < 64; ++i) in.push_back(Write(i + 1, i * 64, 64, i));
  auto out = engine_->WrLogging(0, in);
  ASSERT_TRUE(out.ok());
  EXPECT_EQ(out->size(), 128u);
  EXPECT_EQ(engine_->LiveLogEntries(0), 64u);
  std::set<uint64_t> entries;
  for (size_t i = 1; i < out->size(); i += 2) {
    entries.insert(DecodeLogEntry(
                       *reinterpret_cast<const uint64_t*>(
                           (*out)[i].wr.payload->data()))
                       .handle);
  }
  EXPECT_EQ(entries.size(), 64u);
}

TEST_F(VarunaTest, LogFullWhenBatchExceedsWindow) {
  Build(1, {}, 4);
  std::vector<WorkRequest> in;
  for (int i = 0; i < 5; ++i) in.push_back(Write(i + 1, i * 64, 64, i));
  auto out = engine_->WrLogging(0, in);
  EXPECT_EQ(out.status().code(), absl::StatusCode::kResourceExhausted);
}

TEST_F(VarunaTest, CasBecomesOccupySequence) {
  Build(1);
  std::vector<WorkRequest> in = {Cas(3, 0, 0xA, 0xB)};
  auto logged = engine_->WrLogging(0, in);
  ASSERT_TRUE(logged.ok());
  QpId qp = engine_->CurrentQp(0);
  auto out = engine_->WrExtension(0, qp, std::move(*logged));
  ASSERT_EQ(out.size(), 3u);
  uint64_t slot = world_->layout().SlotAddr(0, 0);
  EXPECT_EQ(out[0].wr.remote_addr, slot);
  EXPECT_EQ(out[0].wr.length, kCasSlotBytes);
  uint64_t swap_in_slot = 0;
  std::memcpy(&swap_in_slot, out[0].wr.payload->data() + kSlotSwapOffset, 8);
  EXPECT_EQ(swap_in_slot, 0xBu);
  EXPECT_EQ(out[1].wr.opcode, Opcode::kCas);
  EXPECT_EQ(out[1].wr.compare_value, 0xAu);
  EXPECT_EQ(DecodeUid(out[1].wr.swap_value), (Uid{slot, qp}));
  EXPECT_EQ(out[2].wr.purpose, OpPurpose::kCompletionLog);
  // Slot write precedes the CAS and travels in the same packet.
  EXPECT_TRUE(out[0].wr.bundle_with_next);
  EXPECT_TRUE(out[1].wr.bundle_with_next);
}

TEST_F(VarunaTest, HintedFaaPassesThrough) {
  Build(1);
  WorkRequest faa = MakeFaa(4, Addr(0), Rkey(), 1);
  faa.idempotent_hint = true;
  std::vector<WorkRequest> in = {faa};
  auto logged = engine_->WrLogging(0, in);
  ASSERT_TRUE(logged.ok());
  auto out = engine_->WrExtension(0, engine_->CurrentQp(0), std::move(*logged));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].wr.opcode, Opcode::kFaa);
  EXPECT_EQ(engine_->LiveLogEntries(0), 0u);
}

TEST_F(VarunaTest, CasWithExtensionDisabledIsPlainPlusLog) {
  EngineConfig c;
  c.extension_enabled = false;
  Build(1, c);
  std::vector<WorkRequest> in = {Cas(3, 0, 0xA, 0xB)};
  auto logged = engine_->WrLogging(0, in);
  ASSERT_TRUE(logged.ok());
  auto out = engine_->WrExtension(0, engine_->CurrentQp(0), std::move(*logged));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].wr.opcode, Opcode::kCas);
  EXPECT_EQ(out[0].wr.swap_value, 0xBu);
  EXPECT_EQ(out[1].wr.purpose, OpPurpose::kCompletionLog);
}

TEST_F(VarunaTest, HealthyWriteCompletesAndFreesEntry) {
  Build(1);
  ASSERT_TRUE(engine_->PostSend(0, {Write(1, 0, 64, 9)}).ok());
  RunToIdle();
  ASSERT_EQ(seen_.size(), 1u);
  EXPECT_EQ(seen_[0].status, AppStatus::kSuccess);
  EXPECT_EQ(engine_->LiveLogEntries(0), 0u);
  EXPECT_EQ(engine_->SideTableSize(0), 0u);
  EXPECT_EQ(world_->transport().stats().inline_log_packets, 1u);
  auto bytes = *world_->memory().Read(Addr(0), 64);
  EXPECT_EQ(bytes, Pattern(64, 9));
  EXPECT_TRUE(engine_->Idle());
}

TEST_F(VarunaTest, ExtendedCasReturnsOriginalValueAndConfirms) {
  Build(1);
  Store(Addr(8), 0xA);
  ASSERT_TRUE(engine_->PostSend(0, {Cas(1, 8, 0xA, 0xB)}).ok());
  RunToIdle();
  const AppCompletion* c = Find(1);
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->return_value, 0xAu);
  EXPECT_EQ(Load(Addr(8)), 0xBu);
  EXPECT_EQ(engine_->ReturnValue(1), 0xAu);
  EXPECT_TRUE(engine_->Idle());
}

TEST_F(VarunaTest, FailedCasReturnsObservedValue) {
  Build(1);
  Store(Addr(8), 0xC);
  ASSERT_TRUE(engine_->PostSend(0, {Cas(1, 8, 0xA, 0xB)}).ok());
  RunToIdle();
  ASSERT_NE(Find(1), nullptr);
  EXPECT_EQ(Find(1)->return_value, 0xCu);
  EXPECT_EQ(Load(Addr(8)), 0xCu);
}

TEST_F(VarunaTest, FaaRewriteUnderContentionCountsExactly) {
  Build(2);
  // Two clients, each keeping one increment outstanding on the same word.
  std::map<uint32_t, int> issued;
  auto post = [&](uint32_t vqp) {
    WorkRequest faa = MakeFaa(issued[vqp], Addr(0), Rkey(), 1);
    faa.op_uid = 1000 * (vqp + 1) + issued[vqp]++;
    ASSERT_TRUE(engine_->PostSend(vqp, {faa}).ok());
  };
  engine_->set_completion_handler([&](const AppCompletion& c) {
    seen_.push_back(c);
    if (issued[c.vqp] < 20) post(c.vqp);
  });
  post(0);
  post(1);
  RunToIdle();
  EXPECT_EQ(Load(Addr(0)), 40u);
  std::set<uint64_t> returned;
  for (const auto& c : seen_) {
    ASSERT_EQ(c.status, AppStatus::kSuccess);
    returned.insert(*c.return_value);
  }
  // Every increment observed a distinct prior value.
  EXPECT_EQ(returned.size(), 40u);
  EXPECT_TRUE(engine_->Idle());
}

TEST_F(VarunaTest, SwitchRemapsAllVqpsInOneEvent) {
  EngineConfig c;
  c.dcqp = {DcqpPolicy::Kind::kFixed, 2};
  Build(16, c);
  testing_util::HardDown(*world_, 0, 10 * kMicrosecond);
  RunToIdle(kMillisecond);
  EXPECT_EQ(engine_->switch_events(), 1u);
  EXPECT_EQ(engine_->last_switch().size(), 16u);
  const auto& pool = engine_->DcqpPool(1);
  ASSERT_EQ(pool.size(), 2u);
  for (const auto& [vqp, qp] : engine_->last_switch()) {
    EXPECT_TRUE(qp == pool[0] || qp == pool[1]);
  }
}

TEST(VarunaDcqpAssignmentTest, UniformOverSeeds) {
  // Across 1000 seeds, 16 vqps onto 2 DCQPs: the count on the first DCQP is
  // Binomial(16000, 1/2). Allow four standard deviations.
  uint64_t on_first = 0;
  for (uint64_t seed = 1; seed <= 1000; ++seed) {
    auto world = MakeWorld(TwoLinkConfig(16));
    EngineConfig c;
    c.link_order = {0, 1};
    c.dcqp = {DcqpPolicy::Kind::kFixed, 2};
    c.seed = seed;
    VarunaEngine engine(world.get(), c);
    ASSERT_TRUE(engine.Setup(16).ok());
    testing_util::HardDown(*world, 0, kMicrosecond);
    world->loop().RunUntil(100 * kMicrosecond);
    QpId first = engine.DcqpPool(1)[0];
    ASSERT_EQ(engine.last_switch().size(), 16u);
    for (const auto& [_, qp] : engine.last_switch()) on_first += qp == first;
  }
  double mean = 16000 * 0.5;
  double sd = std::sqrt(16000 * 0.25);
  EXPECT_NEAR(static_cast<double>(on_first), mean, 4 * sd);
}

TEST_F(VarunaTest, TrafficResumesOnDcqpBeforeHandshake) {
  Build(1);
  testing_util::HardDown(*world_, 0, 10 * kMicrosecond);
  world_->loop().RunUntil(200 * kMicrosecond);
  EXPECT_TRUE(engine_->OnDcqp(0));
  EXPECT_EQ(engine_->CurrentLink(0), 1u);
  ASSERT_TRUE(engine_->PostSend(0, {Write(5, 0, 256, 3)}).ok());
  world_->loop().RunUntil(400 * kMicrosecond);
  ASSERT_NE(Find(5), nullptr);
  EXPECT_EQ(Find(5)->status, AppStatus::kSuccess);
  // The RC rebuild takes a full handshake; the write landed well before it.
  EXPECT_LT(world_->loop().now(),
            world_->transport().config().handshake_delay);
}

TEST_F(VarunaTest, SwapBackToRebuiltRcConservesCompletions) {
  Build(1);
  testing_util::HardDown(*world_, 0, 10 * kMicrosecond);
  // Keep traffic flowing across the swap.
  uint64_t id = 1;
  for (sim::Nanos t = 20 * kMicrosecond; t < 4 * kMillisecond;
       t += 50 * kMicrosecond) {
    world_->loop().RunUntil(t);
    ASSERT_TRUE(engine_->PostSend(0, {Write(id, (id % 64) * 64, 64,
                                            static_cast<uint8_t>(id))})
                    .ok());
    ++id;
  }
  RunToIdle();
  EXPECT_FALSE(engine_->OnDcqp(0));
  EXPECT_EQ(engine_->CurrentLink(0), 1u);
  EXPECT_GE(engine_->metrics().swap_backs, 1u);
  std::map<uint64_t, int> count;
  for (const auto& c : seen_) ++count[c.op_uid];
  EXPECT_EQ(count.size(), id - 1);
  for (const auto& [uid, n] : count) EXPECT_EQ(n, 1) << uid;
  for (uint64_t op = 1; op < id; ++op) {
    EXPECT_EQ(AppCommits(world_->trace(), op).size(), 1u) << op;
  }
}

TEST_F(VarunaTest, MigratesBackWhenPrimaryRecovers) {
  Build(2);
  testing_util::Flap(*world_, 0, 10 * kMicrosecond, 5 * kMillisecond);
  RunToIdle(20 * kMillisecond);
  EXPECT_EQ(engine_->CurrentLink(0), 0u);
  EXPECT_EQ(engine_->CurrentLink(1), 0u);
  EXPECT_FALSE(engine_->OnDcqp(0));
  ASSERT_TRUE(engine_->PostSend(0, {Write(1, 0, 64, 1)}).ok());
  RunToIdle(30 * kMillisecond);
  ASSERT_NE(Find(1), nullptr);
  EXPECT_EQ(AppCommits(world_->trace(), 1).at(0)->link, 0u);
}

// Classification against ground truth for a batch cut by a failure.
TEST_F(VarunaTest, BatchCutByFailureRetransmitsOnlyUnexecuted) {
  Build(1);
  std::vector<WorkRequest> batch;
  for (int i = 0; i < 64; ++i) batch.push_back(Write(i + 1, i * 4096, 4096, i));
  ASSERT_TRUE(engine_->PostSend(0, batch).ok());
  sim::Nanos fail_at = 40 * kMicrosecond;
  testing_util::HardDown(*world_, 0, fail_at);
  RunToIdle();

  uint64_t expected_bytes = 0;
  size_t post = 0;
  for (int i = 1; i <= 64; ++i) {
    auto commits = AppCommits(world_->trace(), i);
    ASSERT_FALSE(commits.empty()) << i;
    bool before = commits[0]->commit_time < fail_at;
    if (!before) expected_bytes += 4096;
    post += before;
    EXPECT_EQ(*world_->memory().Read(Addr((i - 1) * 4096), 4096),
              Pattern(4096, i - 1));
  }
  ASSERT_GT(post, 0u);
  ASSERT_LT(post, 64u);
  ASSERT_EQ(engine_->metrics().recoveries.size(), 1u);
  const RecoveryReport& r = engine_->metrics().recoveries[0];
  size_t corner = 0;
  for (const auto& op : r.classified) {
    auto commits = AppCommits(world_->trace(), op.op_uid);
    bool before = commits[0]->commit_time < fail_at;
    if (op.classification == Classification::kPostFailure) {
      EXPECT_TRUE(before) << op.op_uid;
    } else if (before) {
      ++corner;  // executed, but its log write was lost
      expected_bytes += 4096;
    }
  }
  EXPECT_EQ(engine_->metrics().bytes_retransmitted, expected_bytes);
  for (const auto& c : seen_) EXPECT_EQ(c.status, AppStatus::kSuccess);
  EXPECT_EQ(seen_.size(), 64u);
  EXPECT_LE(corner, 1u);
}

TEST_F(VarunaTest, CasOutcomesMatchTraceAcrossFailure) {
  Build(1);
  std::vector<WorkRequest> batch;
  for (int i = 0; i < 32; ++i) {
    uint64_t addr = Addr(i * 8);
    Store(addr, i % 3 == 0 ? 99 : 7);  // every third CAS is doomed
    batch.push_back(Cas(i + 1, i * 8, 7, 1000 + i));
  }
  world_->CaptureInitialMemory();
  ASSERT_TRUE(engine_->PostSend(0, batch).ok());
  // Early CASes have committed but their acknowledgements are still out.
  testing_util::HardDown(*world_, 0, 1300);
  RunToIdle();
  ASSERT_EQ(seen_.size(), 32u);
  for (int i = 1; i <= 32; ++i) {
    auto commits = AppCommits(world_->trace(), i);
    int effective = 0;
    for (auto* r : commits) effective += r->effective;
    bool doomed = (i - 1) % 3 == 0;
    EXPECT_EQ(effective, doomed ? 0 : 1) << i;
    EXPECT_EQ(engine_->ReturnValue(i), doomed ? 99u : 7u) << i;
    EXPECT_EQ(Load(Addr((i - 1) * 8)), doomed ? 99u : 1000u + i - 1);
  }
  bool saw_post = false;
  for (const auto& r : engine_->metrics().recoveries) {
    for (const auto& op : r.classified) {
      saw_post |= op.classification == Classification::kPostFailure;
    }
  }
  EXPECT_TRUE(saw_post);
}

TEST_F(VarunaTest, PostFailureSendIsUnrecoverable) {
  Build(1);
  WorkRequest send = MakeSend(1, transport::MakeBytes(Pattern(32, 1)));
  send.op_uid = 1;
  ASSERT_TRUE(engine_->PostSend(0, {send}).ok());
  // Past both commits, before the acknowledgement returns.
  testing_util::HardDown(*world_, 0, 1500);
  RunToIdle();
  ASSERT_NE(Find(1), nullptr);
  ASSERT_EQ(AppCommits(world_->trace(), 1).size(), 1u);
  EXPECT_EQ(Find(1)->status, AppStatus::kUnrecoverableReturnValue);
}

TEST_F(VarunaTest, InFlightReadIsReissued) {
  Build(1);
  Store(Addr(0), 42);
  ASSERT_TRUE(engine_->PostSend(0, {MakeRead(1, Addr(0), Rkey(), 8)}).ok());
  testing_util::HardDown(*world_, 0, 1500);
  RunToIdle();
  const AppCompletion* c = nullptr;
  for (const auto& x : seen_) {
    if (x.wr_id == 1) c = &x;
  }
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->status, AppStatus::kSuccess);
  EXPECT_EQ(c->return_value, 42u);
  EXPECT_EQ(engine_->metrics().reads_reissued, 1u);
  EXPECT_EQ(engine_->metrics().bytes_retransmitted, 0u);
}

TEST_F(VarunaTest, NoBackupLinkKillsVqp) {
  world_ = MakeWorld(TwoLinkConfig(1, 128, 1));
  EngineConfig c;
  c.link_order = {0};
  engine_ = std::make_unique<VarunaEngine>(world_.get(), c);
  ASSERT_TRUE(engine_->Setup(1).ok());
  engine_->set_completion_handler(
      [this](const AppCompletion& c) { seen_.push_back(c); });
  ASSERT_TRUE(engine_->PostSend(0, {Write(1, 0, 4096, 1)}).ok());
  testing_util::HardDown(*world_, 0, 500);
  RunToIdle();
  ASSERT_EQ(seen_.size(), 1u);
  EXPECT_EQ(seen_[0].status, AppStatus::kError);
  EXPECT_TRUE(engine_->Dead(0));
  EXPECT_FALSE(engine_->PostSend(0, {Write(2, 0, 64, 1)}).ok());
}

TEST_F(VarunaTest, SecondFailureDuringRecoveryMovesOn) {
  world_ = MakeWorld(TwoLinkConfig(1, 128, 3));
  EngineConfig c;
  c.link_order = {0, 1, 2};
  engine_ = std::make_unique<VarunaEngine>(world_.get(), c);
  ASSERT_TRUE(engine_->Setup(1).ok());
  engine_->set_completion_handler(
      [this](const AppCompletion& c) { seen_.push_back(c); });
  std::vector<WorkRequest> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(Write(i + 1, i * 4096, 4096, i));
  ASSERT_TRUE(engine_->PostSend(0, batch).ok());
  testing_util::HardDown(*world_, 0, 5 * kMicrosecond);
  // The backup dies while the recovery read is in flight.
  testing_util::HardDown(*world_, 1, 27 * kMicrosecond);
  RunToIdle();
  EXPECT_EQ(engine_->CurrentLink(0), 2u);
  ASSERT_EQ(seen_.size(), 16u);
  for (int i = 1; i <= 16; ++i) {
    EXPECT_EQ(*world_->memory().Read(Addr((i - 1) * 4096), 4096),
              Pattern(4096, i - 1));
  }
  bool interrupted = false;
  for (const auto& r : engine_->metrics().recoveries) {
    interrupted |= r.interrupted;
  }
  EXPECT_TRUE(interrupted);
}

TEST(ClassifyExtendedCasTest, Verdicts) {
  uint64_t entry = *EncodeLogEntry(5, 9, false);
  uint64_t uid = *EncodeUid(0x10000, 3);
  std::vector<uint8_t> slot(kCasSlotBytes, 0);
  auto set = [&](uint32_t off, uint64_t v) {
    std::memcpy(slot.data() + off, &v, 8);
  };
  // Nothing landed.
  EXPECT_EQ(ClassifyExtendedCas(entry, uid, slot, 7).outcome,
            CasOutcome::kNotExecuted);
  // Slot present, Uid installed.
  set(kSlotEntryOffset, entry);
  EXPECT_EQ(ClassifyExtendedCas(entry, uid, slot, uid).outcome,
            CasOutcome::kSuccess);
  // Slot present, unfinished, no Uid: executed and failed.
  CasVerdict failed = ClassifyExtendedCas(entry, uid, slot, 7);
  EXPECT_EQ(failed.outcome, CasOutcome::kFailed);
  EXPECT_EQ(failed.value, 7u);
  // Slot finished: succeeded and already confirmed.
  set(kSlotEntryOffset, entry | (uint64_t{1} << 63));
  EXPECT_EQ(ClassifyExtendedCas(entry, uid, slot, 0xB).outcome,
            CasOutcome::kSuccess);
  // A stale slot from an earlier request does not count.
  set(kSlotEntryOffset, *EncodeLogEntry(5, 8, false));
  EXPECT_EQ(ClassifyExtendedCas(entry, uid, slot, uid).outcome,
            CasOutcome::kNotExecuted);
}

}  // namespace
}  // namespace varuna::failover
