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

#include "varuna/workloads/harness.h"

#include <algorithm>
#include <random>

#include "varuna/policies/baseline_engine.h"

namespace varuna::workloads {
namespace {

uint32_t PayloadBytes(const transport::WorkRequest& wr) {
  switch (wr.opcode) {
    case Opcode::kRead:
      return 0;
    case Opcode::kCas:
    case Opcode::kFaa:
      return transport::kAtomicBytes;
    case Opcode::kWrite:
    case Opcode::kSend:
      return wr.length;
  }
  return 0;
}

}  // namespace

std::vector<sim::FailureEvent> ExpandFailures(const FailurePlan& plan,
                                              uint64_t seed) {
  std::vector<sim::FailureEvent> out = plan.fixed;
  if (plan.random && plan.random->count > 0) {
    const RandomFailures& r = *plan.random;
    std::seed_seq seq{seed, uint64_t{0xfa11}};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<Nanos> when(r.window_start,
                                              std::max(r.window_start, r.window_end));
    for (uint32_t i = 0; i < r.count; ++i) {
      sim::FailureEvent e;
      e.time = when(rng);
      if (!r.links.empty()) {
        e.link_id = r.links[std::uniform_int_distribution<size_t>(
            0, r.links.size() - 1)(rng)];
      }
      if (r.flap_recover_after) {
        e.kind = sim::Flap{*r.flap_recover_after};
      }
      out.push_back(e);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  return out;
}

RunSetup DefaultSetup() {
  RunSetup s;
  for (LinkId id : {0, 1}) {
    s.links.push_back({.id = id,
                       .bandwidth_bytes_per_ns = 3.125,
                       .propagation_delay = sim::kMicrosecond,
                       .mtu = 4096});
  }
  return s;
}

absl::StatusOr<std::unique_ptr<Harness>> Harness::Create(
    const RunSetup& setup, uint32_t connections, uint64_t data_bytes) {
  std::unique_ptr<Harness> h(new Harness());
  h->setup_ = setup;
  failover::WorldConfig wc;
  wc.links = setup.links;
  wc.transport = setup.transport;
  wc.data_bytes = std::max<uint64_t>(data_bytes, 64);
  wc.connections = connections;
  wc.log_capacity = setup.engine.log_capacity;
  auto world = failover::World::Create(wc);
  if (!world.ok()) return world.status();
  h->world_ = std::move(*world);
  h->world_->fabric().set_record_trace(setup.record_fabric_trace);
  failover::EngineConfig ec = setup.engine;
  ec.seed = setup.seed;
  h->engine_ = policies::MakeEngine(setup.policy, h->world_.get(), ec);
  if (auto s = h->engine_->Setup(connections); !s.ok()) return s;
  h->failures_ = ExpandFailures(setup.failures, setup.seed);
  for (const auto& f : h->failures_) {
    if (auto s = h->world_->fabric().InjectFailure(f); !s.ok()) return s;
  }
  Harness* raw = h.get();
  h->engine_->set_completion_handler(
      [raw](const failover::AppCompletion& c) { raw->OnCompletion(c); });
  h->world_->CaptureInitialMemory();
  return h;
}

absl::Status Harness::Post(uint32_t vqp,
                           std::vector<transport::WorkRequest> batch) {
  size_t first = ops_.size();
  for (auto& wr : batch) {
    if (wr.op_uid == 0) wr.op_uid = next_uid_++;
    OpRecord r;
    r.op_uid = wr.op_uid;
    r.vqp = vqp;
    r.opcode = wr.opcode;
    r.bytes = PayloadBytes(wr);
    r.expect = wr.compare_value;
    r.posted_at = world_->loop().now();
    r.idempotent_hint = wr.idempotent_hint;
    index_[r.op_uid] = ops_.size();
    ops_.push_back(r);
  }
  absl::Status s = engine_->PostSend(vqp, std::move(batch));
  if (!s.ok()) {
    for (size_t i = first; i < ops_.size(); ++i) {
      ops_[i].status = AppStatus::kError;
      ops_[i].completed_at = world_->loop().now();
    }
  }
  return s;
}

void Harness::OnCompletion(const failover::AppCompletion& c) {
  auto it = index_.find(c.op_uid);
  if (it != index_.end()) {
    OpRecord& r = ops_[it->second];
    r.completed_at = world_->loop().now();
    r.status = c.status;
    r.observed = c.return_value;
  }
  auto client = clients_.find(c.vqp);
  if (client != clients_.end()) client->second(c);
}

LatencySummary SummarizeLatencies(std::vector<Nanos> samples) {
  LatencySummary s;
  s.count = samples.size();
  if (samples.empty()) return s;
  std::sort(samples.begin(), samples.end());
  double sum = 0;
  for (Nanos v : samples) {
    sum += static_cast<double>(v);
    size_t bucket = 0;
    while ((Nanos{2} << bucket) <= v && bucket < 62) ++bucket;
    if (s.log2_histogram.size() <= bucket) s.log2_histogram.resize(bucket + 1);
    ++s.log2_histogram[bucket];
  }
  s.mean_ns = sum / static_cast<double>(samples.size());
  auto rank = [&](double q) {
    size_t i = static_cast<size_t>(q * static_cast<double>(samples.size() - 1) + 0.5);
    return samples[std::min(i, samples.size() - 1)];
  };
  s.p50_ns = rank(0.5);
  s.p99_ns = rank(0.99);
  s.max_ns = samples.back();
  return s;
}

RunMetrics CollectMetrics(Harness& h, Nanos bin_ns) {
  RunMetrics m;
  const auto& trace = h.world().trace();
  const auto& layout = h.world().layout();
  const auto& em = h.engine().metrics();
  const auto& ops = h.ops();

  std::vector<Nanos> latencies;
  for (const OpRecord& op : ops) {
    ++m.ops_posted;
    if (op.NonIdempotent()) ++m.non_idempotent_ops;
    if (op.opcode == Opcode::kRead) ++m.read_ops;
    if (!op.status) continue;
    switch (*op.status) {
      case AppStatus::kSuccess:
        ++m.ops_succeeded;
        latencies.push_back(*op.completed_at - op.posted_at);
        break;
      case AppStatus::kError:
        ++m.ops_failed;
        break;
      case AppStatus::kUnrecoverableReturnValue:
        ++m.unrecoverable;
        break;
    }
    m.makespan_ns = std::max(m.makespan_ns, *op.completed_at);
  }
  m.latency = SummarizeLatencies(std::move(latencies));

  m.bin_ns = bin_ns;
  for (const auto& r : trace.records()) {
    if (r.purpose != sim::OpPurpose::kApplication) continue;
    m.committed_app_bytes += r.length;
    if (bin_ns > 0) {
      size_t bin = static_cast<size_t>(r.commit_time / bin_ns);
      if (m.timeseries.size() <= bin) m.timeseries.resize(bin + 1, 0);
      m.timeseries[bin] += r.length;
    }
  }
  if (m.makespan_ns > 0) {
    m.throughput_gbps = static_cast<double>(m.committed_app_bytes) * 8.0 /
                        static_cast<double>(m.makespan_ns);
  }
  const auto& stats = h.world().transport().stats();
  m.inline_log_packets = stats.inline_log_packets;
  m.inline_log_bytes = stats.inline_log_bytes;
  m.bytes_retransmitted = em.bytes_retransmitted;
  m.ops_retransmitted = em.ops_retransmitted;
  m.qp_memory_bytes = h.engine().QpMemoryBytes();
  m.log_memory_bytes = h.engine().LogMemoryBytes();

  if (!h.failures().empty()) {
    const Nanos f = h.failures().front().time;
    m.failure_time = f;
    for (Nanos t : em.detection_times) {
      if (t >= f) {
        m.detection_time = t;
        break;
      }
    }
    for (const auto& rep : em.recoveries) {
      if (rep.started_at < f) continue;
      Nanos d = rep.finished_at - f;
      if (!m.first_resume_time_ns || d < *m.first_resume_time_ns) {
        m.first_resume_time_ns = d;
      }
      if (!m.recovery_duration_ns || d > *m.recovery_duration_ns) {
        m.recovery_duration_ns = d;
      }
    }
    std::vector<uint64_t> in_flight;
    for (const OpRecord& op : ops) {
      if (op.posted_at > f) continue;
      bool done = op.completed_at && *op.completed_at <= f &&
                  op.status == AppStatus::kSuccess;
      if (!done) in_flight.push_back(op.op_uid);
    }
    auto classes = OracleClassify(trace, f, in_flight);
    for (uint64_t uid : in_flight) {
      const OpRecord& op = h.op(uid);
      m.in_flight_bytes += op.bytes;
      if (classes[uid] == Classification::kPreFailure) {
        m.oracle_pre_failure_bytes += op.bytes;
      } else {
        ++m.post_failure_ops;
        if (op.opcode == Opcode::kWrite &&
            !LogWriteCommittedBefore(trace, uid, f)) {
          m.corner_case_write_bytes += op.bytes;
        }
      }
    }
    m.in_flight_at_failure = in_flight.size();
    if (!in_flight.empty()) {
      m.post_failure_ratio = static_cast<double>(m.post_failure_ops) /
                             static_cast<double>(in_flight.size());
    }
  }

  for (const auto& rep : em.recoveries) {
    if (rep.classified.empty()) continue;
    std::optional<Nanos> fault;
    for (const auto& f : h.failures()) {
      if (f.link_id == rep.failed_link && f.time <= rep.started_at) fault = f.time;
    }
    if (!fault) continue;
    std::vector<uint64_t> uids;
    for (const auto& c : rep.classified) uids.push_back(c.op_uid);
    auto truth = OracleClassify(trace, *fault, uids);
    for (const auto& c : rep.classified) {
      ++m.classified_ops;
      if (truth[c.op_uid] == c.classification) {
        ++m.classification_matches;
      } else if (c.opcode == Opcode::kWrite &&
                 c.classification == Classification::kPreFailure &&
                 !LogWriteCommittedBefore(trace, c.op_uid, *fault)) {
        ++m.classification_exceptions;
      } else {
        ++m.classification_mismatches;
      }
    }
  }

  for (const Violation& v : OracleCheckExactlyOnce(trace, layout, ops)) {
    switch (v.kind) {
      case Violation::Kind::kDuplicate:
        ++m.duplicate_commits;
        break;
      case Violation::Kind::kMissing:
        ++m.missing_commits;
        break;
      case Violation::Kind::kReturnMismatch:
        ++m.return_mismatches;
        break;
    }
  }
  m.replay_matches = OracleSerialReplay(trace, h.world().initial_memory(),
                                        h.world().memory());
  return m;
}

}  // namespace varuna::workloads
