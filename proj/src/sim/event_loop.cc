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

#include "varuna/util/check.h"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"

namespace varuna::sim {

absl::StatusOr<EventHandle> EventLoop::Schedule(Nanos time, Callback callback) {
  if (time < now_) {
    return absl::OutOfRangeError(
        absl::StrCat("scheduling in the past: ", time, " < now ", now_));
  }
  EventHandle handle{time, next_sequence_++};
  queue_.emplace(Key{handle.time, handle.sequence}, std::move(callback));
  return handle;
}

EventHandle EventLoop::ScheduleAfter(Nanos delay, Callback callback) {
  VARUNA_CHECK(delay >= 0);
  return *Schedule(now_ + delay, std::move(callback));
}

bool EventLoop::Cancel(const EventHandle& handle) {
  return queue_.erase(Key{handle.time, handle.sequence}) > 0;
}

bool EventLoop::RunNext() {
  if (queue_.empty()) return false;
  auto node = queue_.extract(queue_.begin());
  now_ = node.key().first;
  ++dispatched_;
  node.mapped()();
  return true;
}

void EventLoop::RunUntil(Nanos deadline) {
  while (!queue_.empty() && queue_.begin()->first.first <= deadline) {
    RunNext();
  }
  if (deadline > now_) now_ = deadline;
}

uint64_t EventLoop::Run(uint64_t max_events) {
  uint64_t n = 0;
  while (n < max_events && RunNext()) ++n;
  return n;
}

}  // namespace varuna::sim
