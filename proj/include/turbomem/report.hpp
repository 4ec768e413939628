#pragma once

#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "turbomem/bench.hpp"

namespace turbomem {

using ordered_json = nlohmann::ordered_json;

enum class ReportFormat { Json, Csv };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw Error(Errc::invalid_config, "unknown report format '" + std::string(s) + "'");
}

namespace detail {

template <class T>
ordered_json opt_to_json(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

template <class T>
std::optional<T> opt_from_json(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

inline ordered_json metrics_to_json(const MetricMap& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : m) j[k] = opt_to_json(v);
  return j;
}

inline MetricMap metrics_from_json(const ordered_json& j) {
  MetricMap m;
  for (auto it = j.begin(); it != j.end(); ++it) m[it.key()] = opt_from_json<double>(it.value());
  return m;
}

}  // namespace detail

inline ordered_json to_json(const BenchConfig& c) {
  ordered_json j;
  j["handler"] = std::string(to_string(c.handler));
  j["threads"] = c.threads;
  j["duration_s"] = c.duration_s;
  j["ops_per_thread"] = detail::opt_to_json(c.ops_per_thread);
  j["object_size"] = c.object_size;
  j["capacity"] = c.capacity;
  j["cache_capacity"] = c.cache_capacity;
  j["refill_batch"] = c.refill_batch;
  j["flush_batch"] = c.flush_batch;
  j["huge_policy"] = std::string(to_string(c.huge_policy));
  j["pin"] = std::string(to_string(c.pin));
  j["descriptor_bytes"] = c.descriptor_bytes;
  j["imix"] = c.imix;
  j["events"] = c.events;
  j["seed"] = c.seed;
  j["repetitions"] = c.repetitions;
  j["audit"] = c.audit;
  j["inflight"] = c.inflight;
  j["warmup_ops"] = c.warmup_ops;
  j["numa_node"] = detail::opt_to_json(c.numa_node);
  return j;
}

inline BenchConfig config_from_json(const ordered_json& j) {
  BenchConfig c;
  c.handler = parse_handler(j.at("handler").get<std::string>());
  c.threads = j.at("threads").get<std::size_t>();
  c.duration_s = j.at("duration_s").get<double>();
  c.ops_per_thread = detail::opt_from_json<std::uint64_t>(j.at("ops_per_thread"));
  c.object_size = j.at("object_size").get<std::size_t>();
  c.capacity = j.at("capacity").get<std::size_t>();
  c.cache_capacity = j.at("cache_capacity").get<std::size_t>();
  c.refill_batch = j.at("refill_batch").get<std::size_t>();
  c.flush_batch = j.at("flush_batch").get<std::size_t>();
  c.huge_policy = parse_huge_policy(j.at("huge_policy").get<std::string>());
  c.pin = parse_pin_mode(j.at("pin").get<std::string>());
  c.descriptor_bytes = j.at("descriptor_bytes").get<std::size_t>();
  c.imix = j.at("imix").get<bool>();
  c.events = j.at("events").get<std::vector<std::string>>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.repetitions = j.at("repetitions").get<std::size_t>();
  c.audit = j.at("audit").get<bool>();
  c.inflight = j.at("inflight").get<std::size_t>();
  c.warmup_ops = j.at("warmup_ops").get<std::uint64_t>();
  c.numa_node = detail::opt_from_json<int>(j.at("numa_node"));
  return c;
}

inline ordered_json to_json(const RunRecord& r) {
  ordered_json j;
  j["seconds"] = r.seconds;
  j["ops"] = r.ops;
  j["mops"] = r.mops;
  j["drops"] = r.drops;
  j["counters_per_op"] = detail::metrics_to_json(r.counters_per_op);
  j["cas_retries"] = r.cas_retries;
  j["global_push_ops"] = r.global_push_ops;
  j["global_pop_ops"] = r.global_pop_ops;
  j["huge_fraction"] = detail::opt_to_json(r.huge_fraction);
  j["pin"] = r.pin;
  j["audit"] = r.audit_pass ? "PASS" : "FAILED";
  return j;
}

inline RunRecord run_from_json(const ordered_json& j) {
  RunRecord r;
  r.seconds = j.at("seconds").get<double>();
  r.ops = j.at("ops").get<std::uint64_t>();
  r.mops = j.at("mops").get<double>();
  r.drops = j.at("drops").get<std::uint64_t>();
  r.counters_per_op = detail::metrics_from_json(j.at("counters_per_op"));
  r.cas_retries = j.at("cas_retries").get<std::uint64_t>();
  r.global_push_ops = j.at("global_push_ops").get<std::uint64_t>();
  r.global_pop_ops = j.at("global_pop_ops").get<std::uint64_t>();
  r.huge_fraction = detail::opt_from_json<double>(j.at("huge_fraction"));
  r.pin = j.at("pin").get<std::string>();
  r.audit_pass = j.at("audit").get<std::string>() == "PASS";
  return r;
}

inline ordered_json to_json(const BenchReport& rep) {
  ordered_json j;
  j["schema_version"] = rep.schema_version;
  j["status"] = rep.status;
  j["error"] = rep.error;
  j["config"] = to_json(rep.config);
  ordered_json host;
  host["kernel"] = rep.host.kernel;
  host["cpu_model"] = rep.host.cpu_model;
  host["cores"] = rep.host.cores;
  host["nodes"] = rep.host.nodes;
  host["thp_mode"] = rep.host.thp_mode;
  host["perf_event_paranoid"] = detail::opt_to_json(rep.host.perf_event_paranoid);
  j["host"] = std::move(host);
  ordered_json summary;
  summary["median_mops"] = rep.median_mops;
  summary["min_mops"] = rep.min_mops;
  summary["max_mops"] = rep.max_mops;
  summary["median_counters_per_op"] = detail::metrics_to_json(rep.median_counters_per_op);
  summary["memory_bound_fraction"] = detail::opt_to_json(rep.memory_bound_fraction);
  summary["dram_latency_ns"] = detail::opt_to_json(rep.dram_latency_ns);
  j["summary"] = std::move(summary);
  ordered_json runs = ordered_json::array();
  for (const auto& r : rep.runs) runs.push_back(to_json(r));
  j["runs"] = std::move(runs);
  return j;
}

inline BenchReport report_from_json(const ordered_json& j) {
  BenchReport rep;
  rep.schema_version = j.at("schema_version").get<int>();
  if (rep.schema_version != kReportSchemaVersion)
    throw Error(Errc::parse_error, "unsupported schema version " + std::to_string(rep.schema_version));
  rep.status = j.at("status").get<std::string>();
  rep.error = j.at("error").get<std::string>();
  rep.config = config_from_json(j.at("config"));
  const auto& host = j.at("host");
  rep.host.kernel = host.at("kernel").get<std::string>();
  rep.host.cpu_model = host.at("cpu_model").get<std::string>();
  rep.host.cores = host.at("cores").get<std::size_t>();
  rep.host.nodes = host.at("nodes").get<std::size_t>();
  rep.host.thp_mode = host.at("thp_mode").get<std::string>();
  rep.host.perf_event_paranoid = detail::opt_from_json<int>(host.at("perf_event_paranoid"));
  const auto& summary = j.at("summary");
  rep.median_mops = summary.at("median_mops").get<double>();
  rep.min_mops = summary.at("min_mops").get<double>();
  rep.max_mops = summary.at("max_mops").get<double>();
  rep.median_counters_per_op = detail::metrics_from_json(summary.at("median_counters_per_op"));
  rep.memory_bound_fraction = detail::opt_from_json<double>(summary.at("memory_bound_fraction"));
  rep.dram_latency_ns = detail::opt_from_json<double>(summary.at("dram_latency_ns"));
  for (const auto& r : j.at("runs")) rep.runs.push_back(run_from_json(r));
  return rep;
}

// {"schema_version": N, "reports": [...]}
inline std::string reports_to_json(const std::vector<BenchReport>& reports) {
  ordered_json doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["reports"] = ordered_json::array();
  for (const auto& r : reports) doc["reports"].push_back(to_json(r));
  return doc.dump(2) + "\n";
}

inline std::vector<BenchReport> reports_from_json(std::string_view text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  std::vector<BenchReport> out;
  try {
    for (const auto& r : doc.at("reports")) out.push_back(report_from_json(r));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  return out;
}

namespace detail {

inline std::string csv_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

// One row per (report, run, metric). Null metrics leave the value empty.
inline std::string reports_to_csv(const std::vector<BenchReport>& reports) {
  std::string out = "report,handler,huge_policy,threads,status,run,metric,value\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& rep = reports[i];
    const std::string prefix = std::to_string(i) + "," + std::string(to_string(rep.config.handler)) + "," +
                               std::string(to_string(rep.config.huge_policy)) + "," +
                               std::to_string(rep.config.threads) + "," + rep.status + ",";
    for (std::size_t r = 0; r < rep.runs.size(); ++r) {
      const auto& run = rep.runs[r];
      auto row = [&](std::string_view metric, const std::string& value) {
        out += prefix + std::to_string(r) + "," + std::string(metric) + "," + value + "\n";
      };
      row("mops", detail::csv_number(run.mops));
      row("ops", std::to_string(run.ops));
      row("seconds", detail::csv_number(run.seconds));
      row("drops", std::to_string(run.drops));
      row("cas_retries", std::to_string(run.cas_retries));
      row("global_push_ops", std::to_string(run.global_push_ops));
      row("global_pop_ops", std::to_string(run.global_pop_ops));
      row("huge_fraction", run.huge_fraction ? detail::csv_number(*run.huge_fraction) : "");
      row("audit_pass", run.audit_pass ? "1" : "0");
      for (const auto& [ev, v] : run.counters_per_op) row(ev + "_per_op", v ? detail::csv_number(*v) : "");
    }
  }
  return out;
}

inline std::string format_reports(const std::vector<BenchReport>& reports, ReportFormat fmt) {
  return fmt == ReportFormat::Json ? reports_to_json(reports) : reports_to_csv(reports);
}

// Writes to `path`, or to `os` when path is empty.
inline void emit_report(const std::vector<BenchReport>& reports, ReportFormat fmt, const std::string& path,
                        std::ostream& os) {
  const std::string text = format_reports(reports, fmt);
  if (path.empty()) {
    os << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::io_error, "cannot open " + path);
  f << text;
  if (!f.flush()) throw Error(Errc::io_error, "write failed for " + path);
}

}  // namespace turbomem
