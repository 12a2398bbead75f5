#include <atomic>
#include <csignal>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "wams/analyzer.hpp"
#include "wams/live.hpp"
#include "wams/log.hpp"
#include "wams/scenario.hpp"
#include "wams/simulation.hpp"
#include "wams/stats.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

void install_signal_handlers() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

class UsageError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// One value per line, or one named column of a CSV file with a header row.
std::vector<double> read_presample(const std::string& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot open presample file '{}'", path));
  std::vector<double> values;
  std::string line;
  std::optional<std::size_t> col;
  std::size_t lineno = 0;
  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string cell = line;
    if (!column.empty()) {
      const auto cells = split(line);
      if (!col) {
        for (std::size_t i = 0; i < cells.size(); ++i)
          if (cells[i] == column) col = i;
        if (!col) throw UsageError(fmt::format("{}: no column named '{}'", path, column));
        continue;
      }
      if (*col >= cells.size()) throw UsageError(fmt::format("{}:{}: missing column '{}'", path, lineno, column));
      cell = cells[*col];
    }
    try {
      std::size_t used = 0;
      const double v = std::stod(cell, &used);
      if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument("trailing text");
      values.push_back(v);
    } catch (const std::exception&) {
      throw UsageError(fmt::format("{}:{}: not a number: '{}'", path, lineno, cell));
    }
  }
  if (values.empty()) throw UsageError(fmt::format("presample file '{}' has no values", path));
  return values;
}

struct AnalyzeArgs {
  std::string capture;
  std::string out_dir = ".";
  std::optional<double> t_fdr;
  std::optional<double> t_dcs;
  std::optional<std::uint64_t> sample_size;
  std::uint64_t sample_seed = 1;
  double window = 1.0;
};

wams::AnalyzeOptions to_options(const AnalyzeArgs& a) {
  wams::AnalyzeOptions o;
  o.delay.t_fdr_ms = a.t_fdr;
  o.delay.t_dcs_ms = a.t_dcs;
  o.sample_size = a.sample_size;
  o.sample_seed = a.sample_seed;
  o.window_s = a.window;
  return o;
}

void print_integrity(const wams::analyzer::MetricsSummary& s) {
  const auto& i = s.integrity;
  std::cerr << fmt::format(
      "slots: {} of {}; malformed lines: {}; flagged delays: {}; duplicate frames: {}; outside population: {}\n",
      s.selected_slots, s.population_slots, i.malformed_lines, i.flagged_delays, i.duplicate_frames,
      i.outside_population);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wide-area monitoring network simulator, live data concentrator and capture analyzer"};
  app.require_subcommand(1);

  // simulate
  std::string scenario_path;
  std::string sim_out = "out";
  auto* simulate = app.add_subcommand("simulate", "Run a scenario on the discrete-event simulator");
  simulate->add_option("scenario", scenario_path, "Scenario file")->required();
  simulate->add_option("-o,--out-dir", sim_out, "Output directory")->capture_default_str();

  // serve
  wams::live::ServerConfig server_cfg;
  double serve_duration = 0.0;
  auto* serve = app.add_subcommand("serve", "Run a real-socket data concentrator");
  serve->add_option("--host", server_cfg.host, "Listen address")->capture_default_str();
  serve->add_option("--port", server_cfg.port, "Listen port (0 = ephemeral)")->capture_default_str();
  serve->add_option("--max-conns", server_cfg.max_conns, "Concurrent connection limit")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  serve->add_option("-o,--out-dir", server_cfg.out_dir, "Directory for capture.jsonl and measurements.jsonl")
      ->capture_default_str();
  serve->add_option("--skew-bound", server_cfg.skew_bound_ms, "Declared clock skew bound, ms")->capture_default_str();
  serve->add_option("--t-dcs", server_cfg.t_dcs_ms, "DCS processing time recorded in the header, ms")
      ->capture_default_str();
  serve->add_option("--duration", serve_duration, "Stop after this many seconds (0 = until SIGINT)")
      ->capture_default_str();

  // emulate
  wams::live::EmulatorConfig emu_cfg;
  auto* emulate = app.add_subcommand("emulate", "Run N FDR clients against a data concentrator");
  emulate->add_option("--host", emu_cfg.host, "Server address")->capture_default_str();
  emulate->add_option("--port", emu_cfg.port, "Server port")->capture_default_str();
  emulate->add_option("-n,--devices", emu_cfg.devices, "Number of devices")->capture_default_str();
  emulate->add_option("--first-id", emu_cfg.first_device_id, "First device id")->capture_default_str();
  emulate->add_option("--duration", emu_cfg.duration_s, "Seconds to stream")->capture_default_str();
  emulate->add_option("--connect-attempts", emu_cfg.connect_attempts, "Consecutive failures before giving up")
      ->capture_default_str();
  emulate->add_option("--retry-ms", emu_cfg.retry_initial_ms, "Initial reconnect backoff, ms")->capture_default_str();
  emulate->add_option("--seed", emu_cfg.seed, "Measurement noise seed")->capture_default_str();

  // analyze / report
  AnalyzeArgs an;
  const auto add_analyze_flags = [&an](CLI::App* cmd) {
    cmd->add_option("capture", an.capture, "Capture log (capture.jsonl)")->required();
    cmd->add_option("--t-fdr", an.t_fdr, "FDR processing time override, ms");
    cmd->add_option("--t-dcs", an.t_dcs, "DCS processing time override, ms");
    cmd->add_option("--sample-size", an.sample_size, "Number of 1-second slots to sample");
    cmd->add_option("--sample-seed", an.sample_seed, "Sampling seed")->capture_default_str();
    cmd->add_option("--window", an.window, "Throughput window, s")->capture_default_str()->check(CLI::PositiveNumber);
  };
  auto* analyze = app.add_subcommand("analyze", "Compute metrics from a capture log and write CSV reports");
  add_analyze_flags(analyze);
  analyze->add_option("-o,--out-dir", an.out_dir, "Output directory")->capture_default_str();
  auto* report = app.add_subcommand("report", "Print a summary table for a capture log");
  add_analyze_flags(report);
  bool report_csv = false;
  report->add_flag("--csv", report_csv, "Print summary CSV instead of a table");

  // samplesize
  std::vector<double> s_values;
  std::vector<std::string> presample_files;
  std::string presample_column;
  double confidence = 0.95;
  std::optional<double> z_override;
  double e = 0.0;
  double population = 86400.0;
  auto* samplesize = app.add_subcommand("samplesize", "Minimum sample size with finite population correction");
  samplesize->add_option("--s", s_values, "Pre-sample standard deviation (repeatable, one per metric)");
  samplesize->add_option("--presample", presample_files, "File of pre-sample values (repeatable)");
  samplesize->add_option("--column", presample_column, "CSV column to read from presample files");
  samplesize->add_option("--confidence", confidence, "Confidence level: 0.90, 0.95 or 0.99")->capture_default_str();
  samplesize->add_option("--z", z_override, "Z-score, overrides --confidence");
  samplesize->add_option("--e", e, "Acceptable standard error, in the metric's units")->required();
  samplesize->add_option("--population", population, "Population size")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) {
      const auto sc = wams::load_scenario_file(scenario_path);
      const auto out = wams::simulate_to_dir(sc, sim_out);
      std::cout << wams::analyzer::summary_table(out.analysis.summary);
      return kExitOk;
    }
    if (*serve) {
      install_signal_handlers();
      wams::live::Server server(server_cfg);
      server.start();
      std::cout << fmt::format("listening on {}:{}", server_cfg.host, server.port()) << std::endl;
      const auto begin = std::chrono::steady_clock::now();
      while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        if (serve_duration > 0 &&
            std::chrono::steady_clock::now() - begin >= std::chrono::duration<double>(serve_duration))
          break;
      }
      server.stop();
      const auto st = server.stats();
      std::cout << fmt::format("accepted={} refused={} rows={} duplicates={} crc_failures={} framing_errors={}\n",
                               st.accepted, st.refused, st.rows, st.duplicate_frames, st.integrity.crc_failures,
                               st.integrity.framing_errors);
      return kExitOk;
    }
    if (*emulate) {
      install_signal_handlers();
      const auto rep = wams::live::run_emulators(emu_cfg, &g_stop);
      for (const auto& d : rep.devices)
        std::cout << fmt::format("device={} generated={} sent={} dropped={} connections={} offline={}\n",
                                 d.device_id, d.frames_generated, d.frames_sent, d.frames_dropped, d.connections,
                                 d.offline);
      if (rep.any_offline()) {
        std::cerr << fmt::format("error: could not connect to {}:{}\n", emu_cfg.host, emu_cfg.port);
        return kExitRuntime;
      }
      return kExitOk;
    }
    if (*analyze) {
      const auto out = wams::analyze_to_dir(an.capture, to_options(an), an.out_dir);
      std::cout << wams::analyzer::summary_csv(out.summary);
      print_integrity(out.summary);
      return kExitOk;
    }
    if (*report) {
      auto log = wams::read_capture_file(an.capture);
      const auto opts = to_options(an);
      wams::analyzer::SummaryOptions so;
      so.delay = opts.delay;
      if (opts.sample_size) {
        const auto idx = wams::stats::random_sample(wams::analyzer::population_slots(log.header), *opts.sample_size,
                                                    opts.sample_seed);
        so.sample_indices = std::vector<std::size_t>(idx.begin(), idx.end());
      }
      const auto summary = wams::analyzer::summarize(log, so);
      if (report_csv) {
        std::cout << wams::analyzer::summary_csv(summary);
        print_integrity(summary);
      } else {
        std::cout << wams::analyzer::summary_table(summary);
      }
      return kExitOk;
    }
    if (*samplesize) {
      if (s_values.empty() && presample_files.empty())
        throw UsageError("give --s or --presample for at least one metric");
      const double z = z_override ? *z_override : wams::stats::z_for_confidence(confidence);
      std::vector<double> sizes;
      int metric = 0;
      const auto emit = [&](double s, const std::string& source) {
        wams::stats::SampleSizeInputs in{s, z, e, population};
        const double n = wams::stats::min_sample_size(in);
        sizes.push_back(n);
        std::cout << fmt::format("metric={} source={} S={:.6f} z={} e={} population={} n_min={:.2f} n_ceil={}\n",
                                 ++metric, source, s, z, e, population, n, wams::stats::min_sample_count(in));
      };
      for (const double s : s_values) emit(s, "given");
      for (const auto& f : presample_files) {
        const auto values = read_presample(f, presample_column);
        emit(wams::stats::presample_std(values), f);
      }
      const double n = wams::stats::combined_min(sizes);
      std::cout << fmt::format("combined n_min={:.2f} n_ceil={}\n", n,
                               static_cast<std::uint64_t>(std::min(std::ceil(n - 1e-9), population)));
      return kExitOk;
    }
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
