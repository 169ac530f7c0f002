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

#include "varuna/cli/config.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "absl/strings/str_cat.h"

namespace varuna::cli {
namespace {

using nlohmann::json;
using sim::Nanos;
using sim::LinkId;

struct FieldError : std::runtime_error {
  FieldError(const std::string& path, const std::string& what)
      : std::runtime_error(absl::StrCat(path, ": ", what)) {}
};

std::string Join(const std::string& path, const std::string& key) {
  return path.empty() ? key : absl::StrCat(path, ".", key);
}

void CheckKeys(const json& j, const std::string& path,
               std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw FieldError(path.empty() ? "<root>" : path, "must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.contains(it.key())) {
      throw FieldError(Join(path, it.key()), "unknown field");
    }
  }
}

double Number(const json& j, const std::string& path) {
  if (!j.is_number()) throw FieldError(path, "must be a number");
  return j.get<double>();
}

uint64_t Unsigned(const json& j, const std::string& path) {
  if (!j.is_number_integer() ||
      (!j.is_number_unsigned() && j.get<int64_t>() < 0)) {
    throw FieldError(path, "must be a non-negative integer");
  }
  return j.get<uint64_t>();
}

bool Bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw FieldError(path, "must be a boolean");
  return j.get<bool>();
}

std::string String(const json& j, const std::string& path) {
  if (!j.is_string()) throw FieldError(path, "must be a string");
  return j.get<std::string>();
}

Nanos Duration(const json& j, const std::string& path, double unit) {
  double v = Number(j, path);
  if (v < 0) throw FieldError(path, "must be >= 0");
  return static_cast<Nanos>(std::llround(v * unit));
}

template <typename T>
T Must(absl::StatusOr<T> v, const std::string& path) {
  if (!v.ok()) throw FieldError(path, std::string(v.status().message()));
  return *std::move(v);
}

void Check(const absl::Status& s, const std::string& path) {
  if (!s.ok()) throw FieldError(path, std::string(s.message()));
}

failover::DcqpPolicy ParseDcqp(const std::string& text, const std::string& path) {
  failover::DcqpPolicy p;
  auto open = text.find('(');
  if (open == std::string::npos || text.back() != ')') {
    throw FieldError(path, "expected fixed(n) or ratio(k)");
  }
  std::string kind = text.substr(0, open);
  std::string arg = text.substr(open + 1, text.size() - open - 2);
  if (kind == "fixed") {
    p.kind = failover::DcqpPolicy::Kind::kFixed;
  } else if (kind == "ratio") {
    p.kind = failover::DcqpPolicy::Kind::kRatio;
  } else {
    throw FieldError(path, "expected fixed(n) or ratio(k)");
  }
  if (arg.empty() || arg.find_first_not_of("0123456789") != std::string::npos) {
    throw FieldError(path, "argument must be a positive integer");
  }
  p.n = static_cast<uint32_t>(std::stoul(arg));
  if (p.n == 0) throw FieldError(path, "argument must be a positive integer");
  return p;
}

void ParseFabric(const json& j, ExperimentConfig& c, std::set<LinkId>& ids) {
  const std::string path = "fabric";
  CheckKeys(j, path, {"links", "primary", "backup_order"});
  if (!j.contains("links") || !j["links"].is_array() || j["links"].empty()) {
    throw FieldError(Join(path, "links"), "must be a non-empty array");
  }
  c.setup.links.clear();
  for (size_t i = 0; i < j["links"].size(); ++i) {
    const json& l = j["links"][i];
    std::string lp = absl::StrCat(path, ".links[", i, "]");
    CheckKeys(l, lp, {"id", "bandwidth_gbps", "propagation_us", "mtu"});
    sim::LinkConfig link;
    if (!l.contains("id")) throw FieldError(Join(lp, "id"), "required");
    link.id = static_cast<LinkId>(Unsigned(l["id"], Join(lp, "id")));
    if (!ids.insert(link.id).second) throw FieldError(Join(lp, "id"), "duplicate link id");
    if (l.contains("bandwidth_gbps")) {
      double g = Number(l["bandwidth_gbps"], Join(lp, "bandwidth_gbps"));
      if (g <= 0) throw FieldError(Join(lp, "bandwidth_gbps"), "must be > 0");
      link.bandwidth_bytes_per_ns = g / 8.0;
    }
    if (l.contains("propagation_us")) {
      link.propagation_delay =
          Duration(l["propagation_us"], Join(lp, "propagation_us"), sim::kMicrosecond);
    }
    if (l.contains("mtu")) {
      link.mtu = static_cast<uint32_t>(Unsigned(l["mtu"], Join(lp, "mtu")));
      if (link.mtu == 0) throw FieldError(Join(lp, "mtu"), "must be > 0");
    }
    c.setup.links.push_back(link);
  }
  LinkId primary = c.setup.links.front().id;
  if (j.contains("primary")) {
    primary = static_cast<LinkId>(Unsigned(j["primary"], Join(path, "primary")));
    if (!ids.contains(primary)) throw FieldError(Join(path, "primary"), "unknown link id");
  }
  std::vector<LinkId> order = {primary};
  if (j.contains("backup_order")) {
    const json& b = j["backup_order"];
    if (!b.is_array()) throw FieldError(Join(path, "backup_order"), "must be an array");
    for (size_t i = 0; i < b.size(); ++i) {
      std::string bp = absl::StrCat(path, ".backup_order[", i, "]");
      LinkId id = static_cast<LinkId>(Unsigned(b[i], bp));
      if (!ids.contains(id)) throw FieldError(bp, "unknown link id");
      if (std::find(order.begin(), order.end(), id) != order.end()) {
        throw FieldError(bp, "link listed twice");
      }
      order.push_back(id);
    }
  }
  c.setup.engine.link_order = order;
}

void ParseEngine(const json& j, ExperimentConfig& c) {
  const std::string path = "varuna";
  CheckKeys(j, path,
            {"log_capacity", "dcqp_policy", "heartbeat_ms", "handshake_delay_ms",
             "extension_enabled", "detection_delay_us", "port_event",
             "remap_cost_us", "ah_create_delay_us", "faa_retry_limit",
             "confirm_worker_period_us", "block_when_full"});
  auto& e = c.setup.engine;
  if (j.contains("log_capacity")) {
    e.log_capacity = static_cast<uint32_t>(Unsigned(j["log_capacity"], Join(path, "log_capacity")));
    if (e.log_capacity == 0 || e.log_capacity > 32768) {
      throw FieldError(Join(path, "log_capacity"), "must be in [1, 32768]");
    }
  }
  if (j.contains("dcqp_policy")) {
    e.dcqp = ParseDcqp(String(j["dcqp_policy"], Join(path, "dcqp_policy")),
                       Join(path, "dcqp_policy"));
  }
  if (j.contains("heartbeat_ms")) {
    Nanos hb = Duration(j["heartbeat_ms"], Join(path, "heartbeat_ms"), sim::kMillisecond);
    e.detection.heartbeat = hb > 0;
    if (hb > 0) e.detection.heartbeat_interval = hb;
  }
  if (j.contains("port_event")) {
    e.detection.port_event = Bool(j["port_event"], Join(path, "port_event"));
  }
  if (j.contains("detection_delay_us")) {
    e.detection.port_event_delay = Duration(
        j["detection_delay_us"], Join(path, "detection_delay_us"), sim::kMicrosecond);
  }
  if (!e.detection.port_event && !e.detection.heartbeat) {
    throw FieldError(path, "needs port_event or a positive heartbeat_ms");
  }
  if (j.contains("handshake_delay_ms")) {
    c.setup.transport.handshake_delay = Duration(
        j["handshake_delay_ms"], Join(path, "handshake_delay_ms"), sim::kMillisecond);
  }
  if (j.contains("ah_create_delay_us")) {
    c.setup.transport.ah_create_delay = Duration(
        j["ah_create_delay_us"], Join(path, "ah_create_delay_us"), sim::kMicrosecond);
  }
  if (j.contains("extension_enabled")) {
    e.extension_enabled = Bool(j["extension_enabled"], Join(path, "extension_enabled"));
  }
  if (j.contains("remap_cost_us")) {
    e.remap_cost = Duration(j["remap_cost_us"], Join(path, "remap_cost_us"), sim::kMicrosecond);
  }
  if (j.contains("faa_retry_limit")) {
    e.faa_retry_limit = static_cast<uint32_t>(
        Unsigned(j["faa_retry_limit"], Join(path, "faa_retry_limit")));
  }
  if (j.contains("confirm_worker_period_us")) {
    e.confirm_worker_period = Duration(j["confirm_worker_period_us"],
                                       Join(path, "confirm_worker_period_us"),
                                       sim::kMicrosecond);
    if (e.confirm_worker_period == 0) {
      throw FieldError(Join(path, "confirm_worker_period_us"), "must be > 0");
    }
  }
  if (j.contains("block_when_full")) {
    e.block_when_full = Bool(j["block_when_full"], Join(path, "block_when_full"));
  }
}

void ParseWorkload(const json& j, ExperimentConfig& c) {
  const std::string path = "workload";
  if (!j.is_object() || !j.contains("kind")) throw FieldError(Join(path, "kind"), "required");
  std::string kind = String(j["kind"], Join(path, "kind"));
  if (kind == "microbench") {
    CheckKeys(j, path,
              {"kind", "op_mix", "payload_bytes", "clients", "mode", "batch_size",
               "rounds", "cas_mismatch_prob", "bin_us"});
    c.workload = WorkloadKind::kMicrobench;
    auto& m = c.microbench;
    if (j.contains("op_mix")) {
      m.mix = Must(workloads::ParseOpMix(String(j["op_mix"], Join(path, "op_mix"))),
                   Join(path, "op_mix"));
    }
    if (j.contains("payload_bytes")) {
      m.payload_bytes = static_cast<uint32_t>(Unsigned(j["payload_bytes"], Join(path, "payload_bytes")));
    }
    if (j.contains("clients")) {
      m.clients = static_cast<uint32_t>(Unsigned(j["clients"], Join(path, "clients")));
    }
    if (j.contains("mode")) {
      m.mode = Must(workloads::ParseMode(String(j["mode"], Join(path, "mode"))),
                    Join(path, "mode"));
    }
    if (j.contains("batch_size")) {
      m.batch_size = static_cast<uint32_t>(Unsigned(j["batch_size"], Join(path, "batch_size")));
    }
    if (j.contains("rounds")) {
      m.rounds = static_cast<uint32_t>(Unsigned(j["rounds"], Join(path, "rounds")));
    }
    if (j.contains("cas_mismatch_prob")) {
      m.cas_mismatch_prob = Number(j["cas_mismatch_prob"], Join(path, "cas_mismatch_prob"));
    }
    if (j.contains("bin_us")) {
      m.bin_ns = Duration(j["bin_us"], Join(path, "bin_us"), sim::kMicrosecond);
    }
    Check(workloads::ValidateMicrobench(m), path);
    if (m.batch_size > c.setup.engine.log_capacity) {
      throw FieldError(Join(path, "batch_size"), "must not exceed varuna.log_capacity");
    }
  } else if (kind == "tx") {
    CheckKeys(j, path,
              {"kind", "table_size", "clients", "skew", "zipf_s", "duration_us",
               "backoff_us", "bin_us"});
    c.workload = WorkloadKind::kTx;
    auto& t = c.tx;
    if (j.contains("table_size")) {
      t.table_size = static_cast<uint32_t>(Unsigned(j["table_size"], Join(path, "table_size")));
    }
    if (j.contains("clients")) {
      t.clients = static_cast<uint32_t>(Unsigned(j["clients"], Join(path, "clients")));
    }
    if (j.contains("skew")) {
      t.skew = Must(workloads::ParseKeySkew(String(j["skew"], Join(path, "skew"))),
                    Join(path, "skew"));
    }
    if (j.contains("zipf_s")) t.zipf_s = Number(j["zipf_s"], Join(path, "zipf_s"));
    if (j.contains("duration_us")) {
      t.duration = Duration(j["duration_us"], Join(path, "duration_us"), sim::kMicrosecond);
    }
    if (j.contains("backoff_us")) {
      t.backoff = Duration(j["backoff_us"], Join(path, "backoff_us"), sim::kMicrosecond);
    }
    if (j.contains("bin_us")) {
      t.bin_ns = Duration(j["bin_us"], Join(path, "bin_us"), sim::kMicrosecond);
    }
    Check(workloads::ValidateTx(t), path);
  } else {
    throw FieldError(Join(path, "kind"), "must be \"microbench\" or \"tx\"");
  }
}

sim::FailureEvent ParseEvent(const json& j, const std::string& path,
                             const std::set<LinkId>& ids) {
  CheckKeys(j, path, {"link", "at_us", "kind", "recover_after_us"});
  sim::FailureEvent e;
  if (!j.contains("link")) throw FieldError(Join(path, "link"), "required");
  e.link_id = static_cast<LinkId>(Unsigned(j["link"], Join(path, "link")));
  if (!ids.contains(e.link_id)) throw FieldError(Join(path, "link"), "unknown link id");
  if (!j.contains("at_us")) throw FieldError(Join(path, "at_us"), "required");
  e.time = Duration(j["at_us"], Join(path, "at_us"), sim::kMicrosecond);
  std::string kind = j.contains("kind") ? String(j["kind"], Join(path, "kind")) : "down";
  if (kind == "flap") {
    if (!j.contains("recover_after_us")) {
      throw FieldError(Join(path, "recover_after_us"), "required for a flap");
    }
    e.kind = sim::Flap{Duration(j["recover_after_us"], Join(path, "recover_after_us"),
                                sim::kMicrosecond)};
  } else if (kind != "down") {
    throw FieldError(Join(path, "kind"), "must be \"down\" or \"flap\"");
  }
  return e;
}

void ParseFailures(const json& j, ExperimentConfig& c, const std::set<LinkId>& ids) {
  const std::string path = "failures";
  CheckKeys(j, path, {"events", "random"});
  if (j.contains("events")) {
    if (!j["events"].is_array()) throw FieldError(Join(path, "events"), "must be an array");
    for (size_t i = 0; i < j["events"].size(); ++i) {
      c.setup.failures.fixed.push_back(
          ParseEvent(j["events"][i], absl::StrCat(path, ".events[", i, "]"), ids));
    }
  }
  if (j.contains("random")) {
    const json& r = j["random"];
    std::string rp = Join(path, "random");
    CheckKeys(r, rp, {"count", "window_start_us", "window_end_us", "links",
                      "flap_recover_after_us"});
    workloads::RandomFailures rf;
    if (r.contains("count")) rf.count = static_cast<uint32_t>(Unsigned(r["count"], Join(rp, "count")));
    if (r.contains("window_start_us")) {
      rf.window_start = Duration(r["window_start_us"], Join(rp, "window_start_us"), sim::kMicrosecond);
    }
    if (r.contains("window_end_us")) {
      rf.window_end = Duration(r["window_end_us"], Join(rp, "window_end_us"), sim::kMicrosecond);
    }
    if (rf.window_end < rf.window_start) {
      throw FieldError(Join(rp, "window_end_us"), "must be >= window_start_us");
    }
    if (r.contains("links")) {
      if (!r["links"].is_array()) throw FieldError(Join(rp, "links"), "must be an array");
      for (size_t i = 0; i < r["links"].size(); ++i) {
        std::string lp = absl::StrCat(rp, ".links[", i, "]");
        LinkId id = static_cast<LinkId>(Unsigned(r["links"][i], lp));
        if (!ids.contains(id)) throw FieldError(lp, "unknown link id");
        rf.links.push_back(id);
      }
    } else {
      rf.links.push_back(c.setup.engine.link_order.front());
    }
    if (r.contains("flap_recover_after_us") && !r["flap_recover_after_us"].is_null()) {
      rf.flap_recover_after = Duration(r["flap_recover_after_us"],
                                       Join(rp, "flap_recover_after_us"), sim::kMicrosecond);
    }
    c.setup.failures.random = rf;
  }
}

ExperimentConfig Parse(const json& doc) {
  CheckKeys(doc, "", {"seed", "policy", "fabric", "varuna", "workload", "failures",
                      "compare", "outputs"});
  ExperimentConfig c;
  c.setup = workloads::DefaultSetup();
  if (doc.contains("seed")) c.setup.seed = Unsigned(doc["seed"], "seed");
  if (doc.contains("policy")) {
    c.setup.policy = Must(failover::ParsePolicy(String(doc["policy"], "policy")), "policy");
  }
  std::set<LinkId> ids;
  if (doc.contains("fabric")) {
    ParseFabric(doc["fabric"], c, ids);
  } else {
    for (const auto& l : c.setup.links) ids.insert(l.id);
    for (const auto& l : c.setup.links) c.setup.engine.link_order.push_back(l.id);
  }
  if (doc.contains("varuna")) ParseEngine(doc["varuna"], c);
  if (!doc.contains("workload")) throw FieldError("workload", "required");
  ParseWorkload(doc["workload"], c);
  if (doc.contains("failures")) ParseFailures(doc["failures"], c, ids);
  if (doc.contains("compare")) {
    CheckKeys(doc["compare"], "compare", {"policies"});
    const json& p = doc["compare"].value("policies", json::array());
    if (!p.is_array()) throw FieldError("compare.policies", "must be an array");
    for (size_t i = 0; i < p.size(); ++i) {
      std::string pp = absl::StrCat("compare.policies[", i, "]");
      c.compare_policies.push_back(Must(failover::ParsePolicy(String(p[i], pp)), pp));
    }
  }
  if (c.compare_policies.empty()) {
    c.compare_policies = {PolicyKind::kNoBackup, PolicyKind::kResend,
                          PolicyKind::kResendCache, PolicyKind::kVaruna};
  }
  if (doc.contains("outputs")) {
    const json& o = doc["outputs"];
    CheckKeys(o, "outputs", {"metrics_path", "trace_path", "timeseries_path"});
    if (o.contains("metrics_path")) c.metrics_path = String(o["metrics_path"], "outputs.metrics_path");
    if (o.contains("trace_path")) c.trace_path = String(o["trace_path"], "outputs.trace_path");
    if (o.contains("timeseries_path")) {
      c.timeseries_path = String(o["timeseries_path"], "outputs.timeseries_path");
    }
  }
  if (c.setup.policy != PolicyKind::kNoBackup &&
      c.setup.engine.link_order.size() < 2) {
    throw FieldError("fabric.backup_order", "must be non-empty unless policy is no-backup");
  }
  return c;
}

}  // namespace

absl::StatusOr<ExperimentConfig> ParseConfig(const nlohmann::json& doc) {
  try {
    return Parse(doc);
  } catch (const FieldError& e) {
    return absl::InvalidArgumentError(e.what());
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(e.what());
  }
}

absl::StatusOr<ExperimentConfig> LoadConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) {
    return absl::InvalidArgumentError(absl::StrCat(path, ": not valid JSON"));
  }
  return ParseConfig(doc);
}

}  // namespace varuna::cli
