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

#include "varuna/sim/event_loop.h"

#include <random>
#include <vector>

#include "gtest/gtest.h"

namespace varuna::sim {
namespace {

TEST(EventLoopTest, EventAtNowRunsBeforeLaterEvent) {
  EventLoop loop;
  std::vector<int> order;
  ASSERT_TRUE(loop.Schedule(1, [&] { order.push_back(2); }).ok());
  ASSERT_TRUE(loop.Schedule(0, [&] { order.push_back(1); }).ok());
  loop.Run();
  EXPECT_EQ(order, (std::vector<int>{1, 2}));
}

TEST(EventLoopTest, EqualTimeDispatchesInInsertionOrder) {
  EventLoop loop;
  std::vector<char> order;
  ASSERT_TRUE(loop.Schedule(100, [&] { order.push_back('A'); }).ok());
  ASSERT_TRUE(loop.Schedule(100, [&] { order.push_back('B'); }).ok());
  loop.Run();
  EXPECT_EQ(order, (std::vector<char>{'A', 'B'}));
  EXPECT_EQ(loop.now(), 100);
}

TEST(EventLoopTest, SchedulingInThePastFails) {
  EventLoop loop;
  ASSERT_TRUE(loop.Schedule(50, [] {}).ok());
  loop.Run();
  auto h = loop.Schedule(10, [] {});
  EXPECT_EQ(h.status().code(), absl::StatusCode::kOutOfRange);
}

TEST(EventLoopTest, CancelledEventNeverRuns) {
  EventLoop loop;
  bool ran = false;
  auto h = loop.Schedule(5, [&] { ran = true; });
  ASSERT_TRUE(h.ok());
  EXPECT_TRUE(loop.Cancel(*h));
  EXPECT_FALSE(loop.Cancel(*h));
  loop.Run();
  EXPECT_FALSE(ran);
}

std::vector<std::pair<Nanos, int>> RandomRun(uint64_t seed) {
  EventLoop loop;
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Nanos, int>> log;
  for (int i = 0; i < 10000; ++i) {
    Nanos t = static_cast<Nanos>(rng() % 1000);
    EXPECT_TRUE(loop.Schedule(t, [&log, &loop, i] {
                      log.emplace_back(loop.now(), i);
                    }).ok());
  }
  loop.Run();
  return log;
}

TEST(EventLoopTest, SameSeedGivesIdenticalDispatchOrder) {
  auto a = RandomRun(7);
  auto b = RandomRun(7);
  ASSERT_EQ(a.size(), 10000u);
  EXPECT_EQ(a, b);
  for (size_t i = 1; i < a.size(); ++i) {
    ASSERT_LE(a[i - 1].first, a[i].first);
    if (a[i - 1].first == a[i].first) ASSERT_LT(a[i - 1].second, a[i].second);
  }
}

TEST(EventLoopTest, RunUntilStopsAtDeadline) {
  EventLoop loop;
  int n = 0;
  for (Nanos t : {10, 20, 30}) {
    ASSERT_TRUE(loop.Schedule(t, [&] { ++n; }).ok());
  }
  loop.RunUntil(20);
  EXPECT_EQ(n, 2);
  EXPECT_EQ(loop.now(), 20);
  EXPECT_EQ(loop.pending(), 1u);
}

}  // namespace
}  // namespace varuna::sim
