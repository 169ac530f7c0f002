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

#include "varuna/workloads/microbench.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <unordered_map>

#include "absl/strings/str_cat.h"

namespace varuna::workloads {
namespace {

using transport::WorkRequest;

uint64_t Align8(uint64_t v) { return (v + 7) / 8 * 8; }

struct Client {
  uint32_t id = 0;
  uint64_t write_base = 0;
  uint64_t cas_base = 0;
  transport::Bytes payload;
  std::mt19937_64 rng;
  uint32_t rounds_left = 0;
  uint32_t outstanding = 0;
  bool dead = false;
  std::vector<uint64_t> belief;
  struct PendingCas {
    size_t word = 0;
    uint64_t expect = 0;
    uint64_t swap = 0;
  };
  std::unordered_map<uint64_t, PendingCas> cas;
  uint64_t counter = 0;
};

class Microbench {
 public:
  Microbench(const MicrobenchSpec& spec, Harness* h) : spec_(spec), h_(h) {}

  void Start() {
    const auto& layout = h_->world().layout();
    uint64_t region = Align8(std::max<uint32_t>(spec_.payload_bytes, 8));
    uint64_t stride = region + uint64_t{CasWords()} * 8;
    for (uint32_t c = 0; c < spec_.clients; ++c) {
      auto cl = std::make_unique<Client>();
      cl->id = c;
      cl->write_base = layout.data_base + c * stride;
      cl->cas_base = cl->write_base + region;
      cl->payload = transport::MakeBytes(std::vector<uint8_t>(
          spec_.payload_bytes, static_cast<uint8_t>(c + 1)));
      std::seed_seq seq{h_->setup().seed, uint64_t{c}};
      cl->rng.seed(seq);
      cl->rounds_left = spec_.rounds;
      cl->belief.assign(CasWords(), 0);
      Client* raw = cl.get();
      h_->set_client(c, [this, raw](const failover::AppCompletion& done) {
        OnDone(*raw, done);
      });
      clients_.push_back(std::move(cl));
    }
    for (auto& cl : clients_) {
      Client* raw = cl.get();
      h_->world().loop().ScheduleAfter(0, [this, raw] { NextRound(*raw); });
    }
  }

  static uint64_t DataBytes(const MicrobenchSpec& spec) {
    uint64_t region = Align8(std::max<uint32_t>(spec.payload_bytes, 8));
    return spec.clients * (region + uint64_t{std::max<uint32_t>(spec.batch_size, 1)} * 8);
  }

  void Finish(MicrobenchResult& r) {
    r.all_completed = true;
    for (auto& cl : clients_) {
      if (cl->dead || cl->rounds_left > 0 || cl->outstanding > 0) {
        r.all_completed = false;
        continue;
      }
      if (spec_.mix == OpMix::kWrite) continue;
      for (size_t w = 0; w < cl->belief.size(); ++w) {
        auto v = h_->world().memory().Load64(cl->cas_base + 8 * w);
        if (!v.ok() || *v != cl->belief[w]) ++r.belief_mismatches;
      }
    }
    r.cas_ops = cas_ops_;
    r.cas_successes = cas_successes_;
  }

 private:
  uint32_t CasWords() const { return std::max<uint32_t>(spec_.batch_size, 1); }

  WorkRequest Cas(Client& cl, size_t word) {
    uint64_t expect = cl.belief[word];
    if (spec_.cas_mismatch_prob > 0 &&
        std::bernoulli_distribution(spec_.cas_mismatch_prob)(cl.rng)) {
      expect += 1 + cl.rng() % 7;
    }
    uint64_t swap = (uint64_t{cl.id + 1} << 40) | ++cl.counter;
    uint64_t addr = cl.cas_base + 8 * word;
    WorkRequest wr = transport::MakeCas(0, addr, Rkey(addr), expect, swap);
    wr.op_uid = NextUid();
    cl.cas[wr.op_uid] = {word, expect, swap};
    ++cas_ops_;
    return wr;
  }

  WorkRequest Write(Client& cl) {
    return Uid(transport::MakeWrite(0, cl.write_base, Rkey(cl.write_base),
                                    cl.payload));
  }

  WorkRequest Read(Client& cl) {
    return Uid(transport::MakeRead(0, cl.write_base, Rkey(cl.write_base),
                                   std::max<uint32_t>(spec_.payload_bytes, 1)));
  }

  WorkRequest Uid(WorkRequest wr) {
    wr.op_uid = NextUid();
    return wr;
  }

  uint64_t NextUid() { return next_uid_++; }

  uint32_t Rkey(uint64_t addr) {
    return *h_->world().transport().RkeyFor(addr, 0);
  }

  void NextRound(Client& cl) {
    if (cl.dead || cl.rounds_left == 0) return;
    --cl.rounds_left;
    std::vector<WorkRequest> batch;
    bool sync = spec_.mode == Mode::kSynchronous;
    uint32_t n = sync ? 1 : std::max<uint32_t>(spec_.batch_size, 1);
    switch (spec_.mix) {
      case OpMix::kWrite:
        for (uint32_t i = 0; i < n; ++i) batch.push_back(Write(cl));
        break;
      case OpMix::kCas:
        for (uint32_t i = 0; i < n; ++i) batch.push_back(Cas(cl, i));
        break;
      case OpMix::kCasReadBatch: {
        uint32_t units = sync ? 1 : std::max<uint32_t>(n / 4, 1);
        for (uint32_t u = 0; u < units; ++u) {
          batch.push_back(Cas(cl, u));
          for (int k = 0; k < 3; ++k) batch.push_back(Read(cl));
        }
        break;
      }
    }
    for (auto& wr : batch) wr.wr_id = wr.op_uid;
    cl.outstanding = static_cast<uint32_t>(batch.size());
    if (!h_->Post(cl.id, std::move(batch)).ok()) {
      cl.outstanding = 0;
      cl.dead = true;
    }
  }

  void OnDone(Client& cl, const failover::AppCompletion& c) {
    if (cl.outstanding > 0) --cl.outstanding;
    if (c.status == AppStatus::kError) cl.dead = true;
    auto it = cl.cas.find(c.op_uid);
    if (it != cl.cas.end()) {
      if (c.status == AppStatus::kSuccess && c.return_value) {
        if (*c.return_value == it->second.expect) {
          cl.belief[it->second.word] = it->second.swap;
          ++cas_successes_;
        } else {
          cl.belief[it->second.word] = *c.return_value;
        }
      }
      cl.cas.erase(it);
    }
    if (cl.outstanding == 0 && !cl.dead) {
      Client* raw = &cl;
      h_->world().loop().ScheduleAfter(0, [this, raw] { NextRound(*raw); });
    }
  }

  MicrobenchSpec spec_;
  Harness* h_;
  std::vector<std::unique_ptr<Client>> clients_;
  uint64_t next_uid_ = 1;
  uint64_t cas_ops_ = 0;
  uint64_t cas_successes_ = 0;
};

}  // namespace

std::string_view OpMixName(OpMix mix) {
  switch (mix) {
    case OpMix::kWrite:
      return "write";
    case OpMix::kCas:
      return "cas";
    case OpMix::kCasReadBatch:
      return "cas-read-batch";
  }
  return "?";
}

absl::StatusOr<OpMix> ParseOpMix(std::string_view name) {
  for (OpMix m : {OpMix::kWrite, OpMix::kCas, OpMix::kCasReadBatch}) {
    if (OpMixName(m) == name) return m;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown op_mix '", std::string(name), "'"));
}

std::string_view ModeName(Mode mode) {
  return mode == Mode::kSynchronous ? "sync" : "batched";
}

absl::StatusOr<Mode> ParseMode(std::string_view name) {
  if (name == "sync") return Mode::kSynchronous;
  if (name == "batched") return Mode::kBatched;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown mode '", std::string(name), "'"));
}

absl::Status ValidateMicrobench(const MicrobenchSpec& spec) {
  if (spec.payload_bytes < 16 || spec.payload_bytes > (1u << 20)) {
    return absl::InvalidArgumentError("payload_bytes must be in [16, 1048576]");
  }
  if (spec.clients < 1 || spec.clients > 16) {
    return absl::InvalidArgumentError("clients must be in [1, 16]");
  }
  if (spec.mode == Mode::kBatched && spec.batch_size == 0) {
    return absl::InvalidArgumentError("batch_size must be positive");
  }
  if (spec.cas_mismatch_prob < 0 || spec.cas_mismatch_prob > 1) {
    return absl::InvalidArgumentError("cas_mismatch_prob must be in [0, 1]");
  }
  return absl::OkStatus();
}

absl::StatusOr<MicrobenchResult> RunMicrobench(const MicrobenchSpec& spec,
                                               const RunSetup& setup,
                                               const RunHook& hook) {
  auto h = Harness::Create(setup, spec.clients, Microbench::DataBytes(spec));
  if (!h.ok()) return h.status();
  Microbench bench(spec, h->get());
  bench.Start();
  (*h)->world().loop().Run();
  MicrobenchResult r;
  bench.Finish(r);
  r.metrics = CollectMetrics(**h, spec.bin_ns);
  if (hook) hook(**h);
  return r;
}

absl::StatusOr<std::vector<RatioPoint>> MeasurePostFailureRatio(
    const RatioSweepSpec& spec, const RunSetup& base) {
  std::vector<RatioPoint> out;
  const sim::LinkConfig& link = base.links.front();
  for (const auto& op : spec.ops) {
    for (uint32_t batch : spec.batch_sizes) {
      RatioPoint p;
      p.mix = op.mix;
      p.payload_bytes = op.payload_bytes;
      p.batch_size = batch;
      MicrobenchSpec mb;
      mb.mix = op.mix;
      mb.payload_bytes = std::max<uint32_t>(op.payload_bytes, 16);
      mb.clients = 1;
      mb.mode = Mode::kBatched;
      mb.batch_size = batch;
      mb.rounds = 1;
      mb.bin_ns = 0;
      uint32_t wire = op.mix == OpMix::kCas ? transport::kAtomicBytes
                                            : op.payload_bytes;
      Nanos lifetime =
          2 * link.propagation_delay +
          static_cast<Nanos>(std::ceil(static_cast<double>(batch) * wire /
                                       link.bandwidth_bytes_per_ns));
      for (uint32_t run = 0; run < spec.runs; ++run) {
        RunSetup s = base;
        s.policy = PolicyKind::kNoBackup;
        s.seed = base.seed * 1000003 + run;
        s.failures = {};
        s.failures.random = RandomFailures{.count = 1,
                                           .window_start = 0,
                                           .window_end = lifetime,
                                           .links = {link.id},
                                           .flap_recover_after = std::nullopt};
        auto r = RunMicrobench(mb, s);
        if (!r.ok()) return r.status();
        ++p.runs;
        p.in_flight += r->metrics.in_flight_at_failure;
        p.post_failure += r->metrics.post_failure_ops;
      }
      p.ratio = p.in_flight == 0 ? 0
                                 : static_cast<double>(p.post_failure) /
                                       static_cast<double>(p.in_flight);
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace varuna::workloads
