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

#include "varuna/cli/report.h"

#include <algorithm>
#include <map>
#include <sstream>


namespace varuna::cli {
namespace {

using nlohmann::json;

template <typename T>
json OrNull(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

std::string_view PurposeName(sim::OpPurpose p) {
  switch (p) {
    case sim::OpPurpose::kApplication:
      return "application";
    case sim::OpPurpose::kCompletionLog:
      return "completion_log";
    case sim::OpPurpose::kCasSlot:
      return "cas_slot";
    case sim::OpPurpose::kConfirm:
      return "confirm";
    case sim::OpPurpose::kRecovery:
      return "recovery";
    case sim::OpPurpose::kFaaRead:
      return "faa_read";
  }
  return "?";
}

json MetricsScalars(const workloads::RunMetrics& m) {
  json s;
  s["ops_posted"] = m.ops_posted;
  s["ops_succeeded"] = m.ops_succeeded;
  s["ops_failed"] = m.ops_failed;
  s["unrecoverable"] = m.unrecoverable;
  s["committed_app_bytes"] = m.committed_app_bytes;
  s["makespan_ns"] = m.makespan_ns;
  s["throughput_gbps"] = m.throughput_gbps;
  s["inline_log_packets"] = m.inline_log_packets;
  s["inline_log_bytes"] = m.inline_log_bytes;
  s["non_idempotent_ops"] = m.non_idempotent_ops;
  s["read_ops"] = m.read_ops;
  s["bytes_retransmitted"] = m.bytes_retransmitted;
  s["ops_retransmitted"] = m.ops_retransmitted;
  s["qp_memory_bytes"] = m.qp_memory_bytes;
  s["log_memory_bytes"] = m.log_memory_bytes;
  s["failure_time_ns"] = OrNull(m.failure_time);
  s["detection_time_ns"] = OrNull(m.detection_time);
  s["recovery_duration_ns"] = OrNull(m.recovery_duration_ns);
  s["first_resume_time_ns"] = OrNull(m.first_resume_time_ns);
  s["in_flight_at_failure"] = m.in_flight_at_failure;
  s["post_failure_ops"] = m.post_failure_ops;
  s["post_failure_ratio"] = OrNull(m.post_failure_ratio);
  s["in_flight_bytes"] = m.in_flight_bytes;
  s["oracle_pre_failure_bytes"] = m.oracle_pre_failure_bytes;
  s["corner_case_write_bytes"] = m.corner_case_write_bytes;
  s["classified_ops"] = m.classified_ops;
  s["classification_matches"] = m.classification_matches;
  s["classification_exceptions"] = m.classification_exceptions;
  s["classification_mismatches"] = m.classification_mismatches;
  s["duplicate_commits"] = m.duplicate_commits;
  s["return_mismatches"] = m.return_mismatches;
  s["missing_commits"] = m.missing_commits;
  s["replay_matches"] = m.replay_matches ? 1 : 0;
  s["latency_mean_ns"] = m.latency.mean_ns;
  s["latency_p50_ns"] = m.latency.p50_ns;
  s["latency_p99_ns"] = m.latency.p99_ns;
  return s;
}

json RunBase(uint64_t seed, const workloads::RunMetrics& m, json scalars) {
  json run;
  run["seed"] = seed;
  run["scalars"] = std::move(scalars);
  json lat;
  lat["count"] = m.latency.count;
  lat["mean_ns"] = m.latency.mean_ns;
  lat["p50_ns"] = m.latency.p50_ns;
  lat["p99_ns"] = m.latency.p99_ns;
  lat["max_ns"] = m.latency.max_ns;
  lat["log2_histogram"] = m.latency.log2_histogram;
  run["latency"] = std::move(lat);
  run["bin_ns"] = m.bin_ns;
  run["timeseries"] = m.timeseries;
  return run;
}

}  // namespace

json RunToJson(uint64_t seed, const workloads::MicrobenchResult& r) {
  json s = MetricsScalars(r.metrics);
  s["cas_ops"] = r.cas_ops;
  s["cas_successes"] = r.cas_successes;
  s["belief_mismatches"] = r.belief_mismatches;
  s["all_completed"] = r.all_completed ? 1 : 0;
  s["inconsistencies"] = r.belief_mismatches + r.metrics.violations();
  return RunBase(seed, r.metrics, std::move(s));
}

json RunToJson(uint64_t seed, const workloads::TxReport& r) {
  json s = MetricsScalars(r.metrics);
  s["tx_committed"] = r.committed;
  s["tx_aborted"] = r.aborted;
  s["lock_token_corruption"] = r.lock_token_corruption;
  s["lost_updates"] = r.lost_updates;
  s["double_applied"] = r.double_applied;
  s["inconsistencies"] = r.inconsistencies;
  s["failed_clients"] = r.failed_clients;
  s["longest_gap_ns"] = r.longest_gap_ns;
  json run = RunBase(seed, r.metrics, std::move(s));
  run["tx_timeseries"] = r.tx_timeseries;
  return run;
}

json Summarize(std::vector<double> values) {
  json out;
  out["n"] = values.size();
  if (values.empty()) {
    out["mean"] = nullptr;
    out["p50"] = nullptr;
    out["p99"] = nullptr;
    return out;
  }
  std::sort(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  auto rank = [&](double q) {
    size_t i = static_cast<size_t>(q * static_cast<double>(values.size() - 1) + 0.5);
    return values[std::min(i, values.size() - 1)];
  };
  out["mean"] = sum / static_cast<double>(values.size());
  out["p50"] = rank(0.5);
  out["p99"] = rank(0.99);
  return out;
}

json Aggregate(const std::vector<json>& runs) {
  std::map<std::string, std::vector<double>> values;
  for (const json& run : runs) {
    for (auto it = run["scalars"].begin(); it != run["scalars"].end(); ++it) {
      auto& column = values[it.key()];
      if (it.value().is_number()) column.push_back(it.value().get<double>());
    }
  }
  json out = json::object();
  for (auto& [key, column] : values) out[key] = Summarize(std::move(column));
  return out;
}

std::string TimeseriesCsv(
    const std::vector<std::pair<std::string, workloads::RunMetrics>>& series) {
  std::ostringstream out;
  out << "time_bin_ns,bytes_committed,policy\n";
  for (const auto& [policy, m] : series) {
    for (size_t i = 0; i < m.timeseries.size(); ++i) {
      out << static_cast<uint64_t>(i) * static_cast<uint64_t>(m.bin_ns) << ','
          << m.timeseries[i] << ',' << policy << '\n';
    }
  }
  return out.str();
}

std::string TraceNdjson(const sim::Fabric& fabric, const sim::ExecutionTrace& trace,
                        const std::string& policy, uint64_t seed) {
  std::vector<json> rows;
  for (const auto& r : fabric.trace()) {
    json j;
    j["time"] = r.time;
    j["kind"] = r.kind;
    j["link"] = r.link;
    j["packet_id"] = r.packet_id;
    j["result"] = r.result;
    rows.push_back(std::move(j));
  }
  for (const auto& r : trace.records()) {
    json j;
    j["time"] = r.commit_time;
    j["kind"] = "commit";
    j["link"] = r.link;
    j["packet_id"] = 0;
    j["result"] = std::string(sim::OpcodeName(r.opcode)) + ":" + std::string(PurposeName(r.purpose));
    j["op_uid"] = r.op_uid;
    j["target"] = r.target;
    j["return_value"] = OrNull(r.return_value);
    j["effective"] = r.effective;
    rows.push_back(std::move(j));
  }
  // Commits are recorded before the ACK leaves, so a stable sort keeps
  // dispatch order within one instant.
  std::stable_sort(rows.begin(), rows.end(), [](const json& a, const json& b) {
    return a["time"].get<sim::Nanos>() < b["time"].get<sim::Nanos>();
  });
  std::ostringstream out;
  for (auto& j : rows) {
    j["policy"] = policy;
    j["seed"] = seed;
    out << j.dump() << '\n';
  }
  return out.str();
}

}  // namespace varuna::cli
