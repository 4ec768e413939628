// Packet-forwarding benchmark driver.
//
//   turbomem_bench --handler turbomem --threads 4 --duration 5 --huge advise
//   turbomem_bench --matrix "handler=turbomem,locked-ring;huge=plain,advise" --format csv
//
// Exit status: 0 when every report passed, 1 when any run failed, 2 for a
// rejected configuration.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "turbomem/report.hpp"

using namespace turbomem;

int main(int argc, char** argv) {
  CLI::App app{"Fixed-size pool packet-forwarding benchmark"};

  BenchConfig cfg;
  std::string handler = "turbomem";
  std::string huge = "advise";
  std::string pin = "soft";
  std::string format = "json";
  std::string out;
  std::string matrix;
  std::uint64_t ops = 0;
  int numa_node = -1;

  app.add_option("--handler", handler, "turbomem | global-only | locked-ring")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads")->capture_default_str();
  app.add_option("--duration", cfg.duration_s, "Measured seconds per run")->capture_default_str();
  app.add_option("--ops", ops, "Fixed measured ops per thread (overrides --duration)");
  app.add_option("--object-size", cfg.object_size, "Slot payload bytes")->capture_default_str();
  app.add_option("--capacity", cfg.capacity, "Slots in the pool")->capture_default_str();
  app.add_option("--cache", cfg.cache_capacity, "Per-thread cache capacity")->capture_default_str();
  auto* refill = app.add_option("--refill", cfg.refill_batch, "Refill batch (default cache/2)");
  auto* flush = app.add_option("--flush", cfg.flush_batch, "Flush batch (default cache/2)");
  app.add_option("--huge", huge, "plain | advise | require")->capture_default_str();
  app.add_option("--pin", pin, "strict | soft | off")->capture_default_str();
  app.add_option("--numa-node", numa_node, "Bind the region to this node");
  app.add_option("--descriptor-bytes", cfg.descriptor_bytes, "Bytes written per packet")->capture_default_str();
  app.add_flag("--imix", cfg.imix, "Draw descriptor sizes from the 64/576/1500 mix");
  app.add_option("--events", cfg.events, "Comma-separated counter events")->delimiter(',');
  app.add_option("--seed", cfg.seed, "Seed for the IMIX schedule")->capture_default_str();
  app.add_option("--reps", cfg.repetitions, "Repetitions per configuration")->capture_default_str();
  app.add_option("--inflight", cfg.inflight, "Packets held per worker")->capture_default_str();
  app.add_option("--warmup-ops", cfg.warmup_ops, "Minimum warm-up ops per worker")->capture_default_str();
  app.add_flag("--audit", cfg.audit, "Enable double-free detection");
  app.add_option("--matrix", matrix, "Axes to sweep, e.g. \"handler=turbomem,locked-ring;huge=plain,advise\"");
  app.add_option("--format", format, "json | csv")->capture_default_str();
  app.add_option("--out", out, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  std::vector<MatrixAxis> axes;
  ReportFormat fmt{};
  try {
    cfg.handler = parse_handler(handler);
    cfg.huge_policy = parse_huge_policy(huge);
    cfg.pin = parse_pin_mode(pin);
    fmt = parse_report_format(format);
    if (ops) cfg.ops_per_thread = ops;
    if (numa_node >= 0) cfg.numa_node = numa_node;
    if (refill->count() == 0) cfg.refill_batch = std::max<std::size_t>(1, cfg.cache_capacity / 2);
    if (flush->count() == 0) cfg.flush_batch = std::max<std::size_t>(1, cfg.cache_capacity / 2);
    axes = parse_matrix_spec(matrix);
    for (const auto& cell : expand_matrix(cfg, axes)) cell.validate();
  } catch (const Error& e) {
    std::cerr << "turbomem_bench: " << e.what() << "\n";
    return 2;
  }

  const auto reports = run_matrix(cfg, axes, [](const BenchConfig& cell) {
    BenchReport rep = run_forwarding_bench(cell);
    std::cerr << to_string(cell.handler) << " huge=" << to_string(cell.huge_policy) << " threads=" << cell.threads
              << ": " << rep.status << " median " << rep.median_mops << " Mops";
    if (!rep.passed()) std::cerr << " (" << rep.error << ")";
    std::cerr << "\n";
    return rep;
  });

  try {
    emit_report(reports, fmt, out, std::cout);
  } catch (const Error& e) {
    std::cerr << "turbomem_bench: " << e.what() << "\n";
    return 1;
  }

  for (const auto& r : reports)
    if (!r.passed()) return 1;
  return 0;
}
