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

#ifndef VARUNA_SIM_EVENT_LOOP_H_
#define VARUNA_SIM_EVENT_LOOP_H_

#include <cstdint>
#include <functional>
#include <map>
#include <utility>

#include "absl/status/statusor.h"

namespace varuna::sim {

// Simulated time in integer nanoseconds.
using Nanos = int64_t;

inline constexpr Nanos kMicrosecond = 1000;
inline constexpr Nanos kMillisecond = 1000 * kMicrosecond;

struct EventHandle {
  Nanos time = 0;
  uint64_t sequence = 0;
  friend bool operator==(const EventHandle&, const EventHandle&) = default;
};

// Single-threaded discrete-event loop. Events at equal time dispatch in the
// order they were scheduled.
class EventLoop {
 public:
  using Callback = std::function<void()>;

  EventLoop() = default;
  EventLoop(const EventLoop&) = delete;
  EventLoop& operator=(const EventLoop&) = delete;

  Nanos now() const { return now_; }

  // Fails with OutOfRange (scheduling in the past) if `time < now()`.
  absl::StatusOr<EventHandle> Schedule(Nanos time, Callback callback);

  // Schedule relative to now(); `delay` must be non-negative.
  EventHandle ScheduleAfter(Nanos delay, Callback callback);

  // Returns false if the event already ran or was cancelled.
  bool Cancel(const EventHandle& handle);

  // Dispatches the earliest event. Returns false when the queue is empty.
  bool RunNext();

  // Runs every event with time <= `deadline`, then advances now() to it.
  void RunUntil(Nanos deadline);

  // Runs to quiescence, or until `max_events` have been dispatched.
  uint64_t Run(uint64_t max_events = UINT64_MAX);

  bool empty() const { return queue_.empty(); }
  size_t pending() const { return queue_.size(); }
  uint64_t dispatched() const { return dispatched_; }

 private:
  using Key = std::pair<Nanos, uint64_t>;

  Nanos now_ = 0;
  uint64_t next_sequence_ = 0;
  uint64_t dispatched_ = 0;
  std::map<Key, Callback> queue_;
};

}  // namespace varuna::sim

#endif  // VARUNA_SIM_EVENT_LOOP_H_
