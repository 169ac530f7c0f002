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

#include "varuna/workloads/tx_workload.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <random>

#include "absl/strings/str_cat.h"

namespace varuna::workloads {
namespace {

using transport::WorkRequest;

class TxBench {
 public:
  TxBench(const TxWorkloadSpec& spec, Harness* h) : spec_(spec), h_(h) {
    std::vector<double> weights(spec.table_size, 1.0);
    if (spec.skew == KeySkew::kZipf) {
      for (uint32_t k = 0; k < spec.table_size; ++k) {
        weights[k] = 1.0 / std::pow(static_cast<double>(k + 1), spec.zipf_s);
      }
    }
    keys_ = std::discrete_distribution<uint32_t>(weights.begin(), weights.end());
    row_commits_.assign(spec.table_size, 0);
  }

  void Start() {
    for (uint32_t c = 0; c < spec_.clients; ++c) {
      auto cl = std::make_unique<Client>();
      cl->id = c;
      cl->token = c + 1;
      std::seed_seq seq{h_->setup().seed, uint64_t{c}, uint64_t{0x7e}};
      cl->rng.seed(seq);
      Client* raw = cl.get();
      h_->set_client(c, [this, raw](const failover::AppCompletion& done) {
        OnDone(*raw, done);
      });
      clients_.push_back(std::move(cl));
      h_->world().loop().ScheduleAfter(0, [this, raw] { Begin(*raw); });
    }
  }

  void Finish(TxReport& r) {
    r.committed = committed_;
    r.aborted = aborted_;
    r.lock_token_corruption = corruption_;
    for (uint32_t k = 0; k < spec_.table_size; ++k) {
      auto lock = h_->world().memory().Load64(LockAddr(k));
      auto value = h_->world().memory().Load64(ValueAddr(k));
      if (lock.ok() && *lock != 0) ++r.lock_token_corruption;
      uint64_t v = value.ok() ? *value : 0;
      if (v < row_commits_[k]) r.lost_updates += row_commits_[k] - v;
      if (v > row_commits_[k]) r.double_applied += v - row_commits_[k];
    }
    for (const auto& cl : clients_) r.failed_clients += cl->dead ? 1 : 0;
    std::sort(commit_times_.begin(), commit_times_.end());
    for (Nanos t : commit_times_) {
      if (spec_.bin_ns <= 0) break;
      size_t bin = static_cast<size_t>(t / spec_.bin_ns);
      if (r.tx_timeseries.size() <= bin) r.tx_timeseries.resize(bin + 1, 0);
      ++r.tx_timeseries[bin];
    }
    if (!h_->failures().empty()) {
      Nanos f = h_->failures().front().time;
      Nanos prev = 0;
      for (Nanos t : commit_times_) {
        if (t > f) r.longest_gap_ns = std::max(r.longest_gap_ns, t - prev);
        prev = t;
      }
      if (commit_times_.empty() || commit_times_.back() <= f) {
        r.longest_gap_ns = std::max(r.longest_gap_ns,
                                    h_->world().loop().now() - prev);
      }
    }
  }

 private:
  enum class Step { kLock, kRead, kWrite, kUnlock };
  struct Client {
    uint32_t id = 0;
    uint64_t token = 0;
    std::mt19937_64 rng;
    Step step = Step::kLock;
    uint32_t key = 0;
    bool dead = false;
  };

  uint64_t LockAddr(uint32_t k) const {
    return h_->world().layout().data_base + uint64_t{k} * 16;
  }
  uint64_t ValueAddr(uint32_t k) const { return LockAddr(k) + 8; }
  uint32_t Rkey(uint64_t addr) const {
    return *h_->world().transport().RkeyFor(addr, 0);
  }

  void Post(Client& cl, WorkRequest wr) {
    wr.op_uid = next_uid_++;
    wr.wr_id = wr.op_uid;
    if (!h_->Post(cl.id, {wr}).ok()) cl.dead = true;
  }

  void Begin(Client& cl) {
    if (cl.dead || h_->world().loop().now() >= spec_.duration) return;
    cl.key = keys_(cl.rng);
    cl.step = Step::kLock;
    Post(cl, transport::MakeCas(0, LockAddr(cl.key), Rkey(LockAddr(cl.key)), 0,
                                cl.token));
  }

  void OnDone(Client& cl, const failover::AppCompletion& c) {
    if (c.status == AppStatus::kError) {
      cl.dead = true;
      return;
    }
    auto& loop = h_->world().loop();
    Client* raw = &cl;
    switch (cl.step) {
      case Step::kLock:
        if (c.return_value != 0u) {
          ++aborted_;
          loop.ScheduleAfter(spec_.backoff, [this, raw] { Begin(*raw); });
          return;
        }
        cl.step = Step::kRead;
        Post(cl, transport::MakeRead(0, ValueAddr(cl.key),
                                     Rkey(ValueAddr(cl.key)), 8));
        return;
      case Step::kRead: {
        uint64_t v = 0;
        if (c.data && c.data->size() >= 8) std::memcpy(&v, c.data->data(), 8);
        cl.step = Step::kWrite;
        Post(cl, transport::MakeWrite(0, ValueAddr(cl.key),
                                      Rkey(ValueAddr(cl.key)),
                                      transport::Word(v + 1)));
        return;
      }
      case Step::kWrite:
        cl.step = Step::kUnlock;
        Post(cl, transport::MakeCas(0, LockAddr(cl.key), Rkey(LockAddr(cl.key)),
                                    cl.token, 0));
        return;
      case Step::kUnlock:
        if (c.return_value != cl.token) ++corruption_;
        ++committed_;
        ++row_commits_[cl.key];
        commit_times_.push_back(loop.now());
        loop.ScheduleAfter(0, [this, raw] { Begin(*raw); });
        return;
    }
  }

  TxWorkloadSpec spec_;
  Harness* h_;
  std::discrete_distribution<uint32_t> keys_;
  std::vector<std::unique_ptr<Client>> clients_;
  std::vector<uint64_t> row_commits_;
  std::vector<Nanos> commit_times_;
  uint64_t next_uid_ = 1;
  uint64_t committed_ = 0;
  uint64_t aborted_ = 0;
  uint64_t corruption_ = 0;
};

}  // namespace

std::string_view KeySkewName(KeySkew skew) {
  return skew == KeySkew::kUniform ? "uniform" : "zipf";
}

absl::StatusOr<KeySkew> ParseKeySkew(std::string_view name) {
  if (name == "uniform") return KeySkew::kUniform;
  if (name == "zipf") return KeySkew::kZipf;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown skew '", std::string(name), "'"));
}

absl::Status ValidateTx(const TxWorkloadSpec& spec) {
  if (spec.table_size == 0) {
    return absl::InvalidArgumentError("table_size must be positive");
  }
  if (spec.clients == 0) return absl::InvalidArgumentError("clients must be positive");
  if (spec.duration <= 0) return absl::InvalidArgumentError("duration must be positive");
  if (spec.backoff < 0) return absl::InvalidArgumentError("backoff must be >= 0");
  return absl::OkStatus();
}

absl::StatusOr<TxReport> RunTxWorkload(const TxWorkloadSpec& spec,
                                       const RunSetup& setup,
                                       const RunHook& hook) {
  auto h = Harness::Create(setup, spec.clients, uint64_t{spec.table_size} * 16);
  if (!h.ok()) return h.status();
  TxBench bench(spec, h->get());
  bench.Start();
  (*h)->world().loop().Run();
  TxReport r;
  bench.Finish(r);
  r.metrics = CollectMetrics(**h, spec.bin_ns);
  if (hook) hook(**h);
  r.double_applied += r.metrics.duplicate_commits;
  r.inconsistencies = r.lock_token_corruption + r.lost_updates +
                      r.double_applied + r.metrics.return_mismatches +
                      (r.metrics.replay_matches ? 0 : 1);
  return r;
}

}  // namespace varuna::workloads
