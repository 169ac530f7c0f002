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

#include "varuna/policies/hazard_probe.h"

#include <optional>

#include "varuna/policies/baseline_engine.h"

namespace varuna::policies {

absl::StatusOr<HazardResult> RunHazardProbe(failover::PolicyKind kind,
                                            const HazardSchedule& schedule) {
  failover::WorldConfig wc;
  for (LinkId id : {0, 1}) {
    wc.links.push_back({.id = id,
                        .bandwidth_bytes_per_ns = schedule.bandwidth_bytes_per_ns,
                        .propagation_delay = schedule.propagation_delay,
                        .mtu = 4096});
  }
  wc.connections = 2;
  auto world_or = World::Create(wc);
  if (!world_or.ok()) return world_or.status();
  World& world = **world_or;
  const uint64_t x = world.layout().data_base;
  if (auto s = world.memory().Store64(x, schedule.a); !s.ok()) return s;
  world.CaptureInitialMemory();

  EngineConfig ec;
  ec.link_order = {0, 1};
  ec.home_links = {0, 1};
  ec.log_capacity = wc.log_capacity;
  auto engine = MakeEngine(kind, &world, ec);
  if (auto s = engine->Setup(2); !s.ok()) return s;

  const uint64_t b_uid = 1;
  const uint64_t c_uid = 2;
  std::optional<sim::Nanos> b_delivered;
  engine->set_completion_handler([&](const failover::AppCompletion& c) {
    if (c.op_uid == b_uid && !b_delivered) b_delivered = world.loop().now();
  });
  if (schedule.inject_failure) {
    auto s = world.fabric().InjectFailure(
        {.link_id = 0, .time = schedule.fail_at, .kind = sim::HardDown{}});
    if (!s.ok()) return s;
  }
  auto write = [&](uint32_t vqp, uint64_t uid, uint64_t value) {
    WorkRequest wr = transport::MakeWrite(
        uid, x, *world.transport().RkeyFor(x, static_cast<transport::NicId>(vqp)),
        transport::Word(value));
    wr.op_uid = uid;
    return engine->PostSend(vqp, {wr});
  };
  absl::Status post_status;
  auto b_at = world.loop().Schedule(schedule.write_b_at, [&] {
    if (auto s = write(0, b_uid, schedule.b); !s.ok()) post_status = s;
  });
  if (!b_at.ok()) return b_at.status();
  auto c_at = world.loop().Schedule(schedule.write_c_at, [&] {
    if (auto s = write(1, c_uid, schedule.c); !s.ok()) post_status = s;
  });
  if (!c_at.ok()) return c_at.status();
  world.loop().Run();
  if (!post_status.ok()) return post_status;

  HazardResult r;
  auto v = world.memory().Load64(x);
  if (!v.ok()) return v.status();
  r.final_value = *v;
  r.inconsistencies = r.final_value == schedule.c ? 0 : 1;
  std::optional<sim::Nanos> first_commit;
  for (const auto& rec : world.trace().records()) {
    if (rec.op_uid != b_uid || rec.purpose != sim::OpPurpose::kApplication) {
      continue;
    }
    ++r.b_commits;
    if (!first_commit) first_commit = rec.commit_time;
  }
  r.window_hit = schedule.inject_failure && first_commit &&
                 *first_commit < schedule.fail_at &&
                 (!b_delivered || *b_delivered > schedule.fail_at);
  return r;
}

}  // namespace varuna::policies
