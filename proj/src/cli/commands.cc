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

#include "varuna/cli/commands.h"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "absl/strings/str_cat.h"
#include "varuna/cli/report.h"

namespace varuna::cli {
namespace {

using nlohmann::json;

struct PolicyRuns {
  PolicyKind policy;
  std::vector<json> runs;
  std::vector<workloads::RunMetrics> metrics;
  std::string trace;
};

absl::StatusOr<PolicyRuns> RunPolicy(const ExperimentConfig& config,
                                     PolicyKind policy, uint32_t seeds,
                                     bool want_trace,
                                     std::vector<std::string>& violations) {
  PolicyRuns out;
  out.policy = policy;
  const std::string name(failover::PolicyName(policy));
  for (uint32_t i = 0; i < seeds; ++i) {
    workloads::RunSetup setup = config.setup;
    setup.policy = policy;
    setup.seed = config.setup.seed + i;
    setup.record_fabric_trace = want_trace && i == 0;
    workloads::RunHook hook;
    if (want_trace && i == 0) {
      hook = [&](workloads::Harness& h) {
        out.trace = TraceNdjson(h.world().fabric(), h.world().trace(), name, setup.seed);
      };
    }
    json run;
    workloads::RunMetrics metrics;
    bool clean = true;
    if (config.workload == WorkloadKind::kMicrobench) {
      auto r = workloads::RunMicrobench(config.microbench, setup, hook);
      if (!r.ok()) return r.status();
      run = RunToJson(setup.seed, *r);
      metrics = r->metrics;
      clean = r->belief_mismatches == 0 || !r->all_completed;
    } else {
      auto r = workloads::RunTxWorkload(config.tx, setup, hook);
      if (!r.ok()) return r.status();
      run = RunToJson(setup.seed, *r);
      metrics = r->metrics;
      clean = r->inconsistencies == 0;
    }
    auto flag = [&](const std::string& what) {
      violations.push_back(absl::StrCat(name, " seed ", setup.seed, ": ", what));
    };
    if (!metrics.replay_matches) flag("serial replay differs from memory");
    if (policy == PolicyKind::kVaruna) {
      if (metrics.duplicate_commits + metrics.missing_commits +
              metrics.return_mismatches > 0) {
        flag("exactly-once check failed");
      }
      if (metrics.classification_mismatches > 0) flag("classification mismatch");
      if (!clean) flag("workload inconsistency");
    }
    out.runs.push_back(std::move(run));
    out.metrics.push_back(std::move(metrics));
  }
  return out;
}

json PolicyBlock(const PolicyRuns& p) {
  json j;
  j["policy"] = failover::PolicyName(p.policy);
  j["runs"] = p.runs;
  j["aggregate"] = Aggregate(p.runs);
  return j;
}

json ConfigEcho(const ExperimentConfig& c, const std::string& command,
                uint32_t seeds) {
  json j;
  j["command"] = command;
  j["seed"] = c.setup.seed;
  j["seeds"] = seeds;
  j["workload"] = c.workload == WorkloadKind::kMicrobench ? "microbench" : "tx";
  j["failures"] = c.setup.failures.fixed.size() +
                  (c.setup.failures.random ? c.setup.failures.random->count : 0);
  return j;
}

absl::Status WriteFile(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  out << data;
  return out ? absl::OkStatus()
             : absl::UnavailableError(absl::StrCat("cannot write ", path));
}

}  // namespace

absl::StatusOr<CommandOutput> RunCommand(const std::string& command,
                                         const ExperimentConfig& config,
                                         uint32_t seeds, bool want_trace) {
  if (seeds == 0) return absl::InvalidArgumentError("--seeds must be >= 1");
  if (command == "microbench" && config.workload != WorkloadKind::kMicrobench) {
    return absl::InvalidArgumentError("workload.kind: microbench needs kind \"microbench\"");
  }
  if (command == "txbench" && config.workload != WorkloadKind::kTx) {
    return absl::InvalidArgumentError("workload.kind: txbench needs kind \"tx\"");
  }
  std::vector<PolicyKind> policies;
  if (command == "compare") {
    policies = config.compare_policies;
    if (policies.size() < 2) {
      return absl::InvalidArgumentError("compare.policies: needs at least two policies");
    }
    for (PolicyKind k : policies) {
      if (k != PolicyKind::kNoBackup && config.setup.engine.link_order.size() < 2) {
        return absl::InvalidArgumentError(
            "fabric.backup_order: must be non-empty unless policy is no-backup");
      }
    }
  } else if (command == "microbench" || command == "txbench") {
    policies = {config.setup.policy};
  } else {
    return absl::InvalidArgumentError(absl::StrCat("unknown command ", command));
  }

  CommandOutput out;
  std::vector<PolicyRuns> all;
  for (PolicyKind k : policies) {
    auto r = RunPolicy(config, k, seeds, want_trace, out.invariant_violations);
    if (!r.ok()) return r.status();
    all.push_back(std::move(*r));
  }

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["config"] = ConfigEcho(config, command, seeds);
  std::vector<std::pair<std::string, workloads::RunMetrics>> series;
  for (const auto& p : all) {
    series.emplace_back(std::string(failover::PolicyName(p.policy)), p.metrics.front());
    out.trace_ndjson += p.trace;
  }
  if (command == "compare") {
    json table = json::array();
    json per_policy = json::array();
    for (const auto& p : all) {
      json agg = Aggregate(p.runs);
      json row;
      row["policy"] = failover::PolicyName(p.policy);
      for (const char* key : {"recovery_duration_ns", "bytes_retransmitted",
                              "first_resume_time_ns", "qp_memory_bytes",
                              "log_memory_bytes", "throughput_gbps",
                              "inconsistencies", "duplicate_commits"}) {
        row[key] = agg.contains(key) ? agg[key] : Summarize({});
      }
      table.push_back(std::move(row));
      per_policy.push_back(PolicyBlock(p));
    }
    report["table"] = std::move(table);
    report["policies"] = std::move(per_policy);
  } else {
    report["policies"] = json::array({PolicyBlock(all.front())});
  }
  report["invariant_violations"] = out.invariant_violations;
  out.report = std::move(report);
  out.timeseries_csv = TimeseriesCsv(series);
  return out;
}

int Main(int argc, char** argv) {
  CLI::App app{"Discrete-event simulator for RDMA link failover policies",
               "varuna-sim"};
  app.require_subcommand(1);
  std::string config_path;
  uint32_t seeds = 1;
  std::string trace_out;
  std::string out_path;
  for (const char* name : {"microbench", "txbench", "compare"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--seeds", seeds, "number of seeded runs")->check(CLI::PositiveNumber);
    sub->add_option("--trace-out", trace_out, "write the commit trace (NDJSON)");
    sub->add_option("--out", out_path, "write the metrics report (JSON)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  auto config = LoadConfig(config_path);
  if (!config.ok()) {
    std::cerr << "config error: " << config.status().message() << "\n";
    return kExitConfigError;
  }
  if (const char* env = std::getenv("VARUNA_SIM_SEED"); env && *env) {
    uint64_t seed = 0;
    std::string_view text(env);
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || end != text.data() + text.size()) {
      std::cerr << "config error: VARUNA_SIM_SEED: not an unsigned integer\n";
      return kExitConfigError;
    }
    config->setup.seed = seed;
  }
  if (!trace_out.empty()) config->trace_path = trace_out;
  if (!out_path.empty()) config->metrics_path = out_path;

  auto result = RunCommand(command, *config, seeds, config->trace_path.has_value());
  if (!result.ok()) {
    if (absl::IsInvalidArgument(result.status())) {
      std::cerr << "config error: " << result.status().message() << "\n";
      return kExitConfigError;
    }
    std::cerr << "error: " << result.status().message() << "\n";
    return kExitFailure;
  }
  const std::string report = result->report.dump(2) + "\n";
  if (config->metrics_path) {
    if (auto s = WriteFile(*config->metrics_path, report); !s.ok()) {
      std::cerr << "error: " << s.message() << "\n";
      return kExitFailure;
    }
  } else {
    std::cout << report;
  }
  std::optional<std::string> csv_path = config->timeseries_path;
  if (!csv_path && config->metrics_path) {
    csv_path = *config->metrics_path + ".timeseries.csv";
  }
  if (csv_path) {
    if (auto s = WriteFile(*csv_path, result->timeseries_csv); !s.ok()) {
      std::cerr << "error: " << s.message() << "\n";
      return kExitFailure;
    }
  }
  if (config->trace_path) {
    if (auto s = WriteFile(*config->trace_path, result->trace_ndjson); !s.ok()) {
      std::cerr << "error: " << s.message() << "\n";
      return kExitFailure;
    }
  }
  for (const auto& v : result->invariant_violations) {
    std::cerr << "invariant violation: " << v << "\n";
  }
  return result->invariant_violations.empty() ? kExitOk : kExitInvariantViolation;
}

}  // namespace varuna::cli
