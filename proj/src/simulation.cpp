#include "wams/simulation.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>

#include <fmt/format.h>

#include "wams/log.hpp"
#include "wams/stats.hpp"

namespace wams {
namespace {

// Channel length charged for serialization: payload bytes as in the
// delay model; control segments without payload are charged their headers.
std::size_t serialized_length(const tcplite::Segment& seg) {
  return seg.payload.empty() ? tcplite::Segment::kHeaderBytes : seg.payload.size();
}

struct Link {
  sim::ChannelParams params;
  sim::Rng rng;
};

}  // namespace

SimulationResult run_simulation(const Scenario& sc) {
  sc.validate();
  sim::EventLoop loop;
  const sim::SimTime warmup_us = sim::ms_to_us(sc.warmup_s * 1000.0);
  const sim::SimTime stream_end_us = warmup_us + sim::ms_to_us(sc.duration_s * 1000.0);
  const sim::SimTime end_us = stream_end_us + sim::ms_to_us(sc.drain_s * 1000.0);

  std::map<std::uint16_t, std::size_t> index;
  std::vector<Link> uplinks;
  std::vector<Link> downlinks;
  for (std::size_t i = 0; i < sc.devices.size(); ++i) {
    const auto& d = sc.devices[i];
    index[d.fdr.device_id] = i;
    uplinks.push_back(Link{d.uplink, sim::make_rng(sc.seed, d.fdr.device_id, 3)});
    downlinks.push_back(Link{d.downlink, sim::make_rng(sc.seed, d.fdr.device_id, 4)});
  }

  std::vector<std::unique_ptr<fdr::SimDevice>> devices;
  std::uint64_t next_conn_id = 1;

  auto dcs = std::make_unique<dcs::SimDcs>(
      sc.transport, loop,
      [&](std::uint16_t device_id, std::uint64_t conn_id, const tcplite::Segment& seg) {
        const auto i = index.at(device_id);
        auto& link = downlinks[i];
        if (sim::should_drop(link.params, link.rng)) return;
        const auto delay = sim::transit_delay_us(serialized_length(seg), link.params, link.rng);
        loop.schedule_in(delay, [&devices, i, conn_id, seg] { devices[i]->deliver(conn_id, seg); });
      },
      sc.epoch_utc_ms, sc.seed, sc.dcs_clock_skew_ms);

  for (const auto& d : sc.devices) {
    devices.push_back(std::make_unique<fdr::SimDevice>(
        d.fdr, sc.transport, loop,
        [&](std::uint16_t device_id, std::uint64_t conn_id, const tcplite::Segment& seg) {
          auto& link = uplinks[index.at(device_id)];
          if (sim::should_drop(link.params, link.rng)) return;
          const auto delay = sim::transit_delay_us(serialized_length(seg), link.params, link.rng);
          loop.schedule_in(delay, [&dcs, device_id, conn_id, seg] { dcs->receive(device_id, conn_id, seg); });
        },
        [&next_conn_id] { return next_conn_id++; }, sc.epoch_utc_ms, sc.seed));
  }

  if (sc.dcs_outage) {
    loop.schedule(warmup_us + sim::ms_to_us(sc.dcs_outage->start_s * 1000.0), [&] { dcs->set_down(true); });
    loop.schedule(warmup_us + sim::ms_to_us(sc.dcs_outage->end_s * 1000.0), [&] { dcs->set_down(false); });
  }
  for (auto& dev : devices) dev->start(warmup_us, stream_end_us);

  SimulationResult result;
  result.events = loop.run_until(end_us);

  result.header.source = "sim";
  result.header.start_time_us = sc.epoch_utc_ms * sim::kUsPerMs + warmup_us;
  result.header.duration_s = sc.duration_s;
  result.header.skew_bound_ms = std::abs(sc.dcs_clock_skew_ms);
  result.header.t_dcs_ms = sc.t_dcs_ms;
  result.header.seed = sc.seed;
  for (const auto& d : sc.devices) result.header.t_fdr_ms[d.fdr.device_id] = d.fdr.t_fdr_ms;

  result.capture = dcs->capture();
  result.rows = dcs->store().rows();
  result.integrity = dcs->integrity();
  for (const auto& dev : devices)
    result.devices.push_back(DeviceReport{dev->config().device_id, dev->stats(), dev->transport_totals()});
  return result;
}

void write_capture(std::ostream& out, const CaptureHeader& header, std::span<const CaptureRecord> records) {
  out << format_header_line(header) << '\n';
  for (const auto& r : records) out << format_record_line(r) << '\n';
}

void write_measurements(std::ostream& out, const CaptureHeader& header, std::span<const MeasurementRow> rows) {
  out << format_measurement_header_line(header) << '\n';
  for (const auto& r : rows) out << format_row_line(r) << '\n';
}

void write_measurements_csv(std::ostream& out, std::span<const MeasurementRow> rows) {
  out << measurement_csv_header() << '\n';
  for (const auto& r : rows) out << format_row_csv(r) << '\n';
}

namespace {
void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  return out;
}
}  // namespace

AnalyzeOutput analyze_to_dir(const std::filesystem::path& capture_path, const AnalyzeOptions& options,
                             const std::filesystem::path& out_dir) {
  AnalyzeOutput out;
  out.log = read_capture_file(capture_path.string());
  if (out.log.malformed_lines > 0)
    log::get()->warn("skipped {} malformed line(s) in {}", out.log.malformed_lines, capture_path.string());

  analyzer::SummaryOptions summary_opts;
  summary_opts.delay = options.delay;
  if (options.sample_size) {
    const auto population = analyzer::population_slots(out.log.header);
    out.sample_indices = stats::random_sample(population, *options.sample_size, options.sample_seed);
    summary_opts.sample_indices = std::vector<std::size_t>(out.sample_indices.begin(), out.sample_indices.end());
  }
  out.summary = analyzer::summarize(out.log, summary_opts);

  std::filesystem::create_directories(out_dir);
  write_text(out_dir / "summary.csv", analyzer::summary_csv(out.summary));
  write_text(out_dir / "delays.csv", analyzer::delays_csv(analyzer::one_way_delays(out.log, options.delay)));
  write_text(out_dir / "throughput.csv", analyzer::throughput_csv(analyzer::throughput_series(out.log, options.window_s)));
  return out;
}

SimulateOutput simulate_to_dir(const Scenario& scenario, const std::filesystem::path& out_dir) {
  SimulateOutput out;
  out.result = run_simulation(scenario);
  std::filesystem::create_directories(out_dir);
  {
    auto f = open_out(out_dir / "capture.jsonl");
    write_capture(f, out.result.header, out.result.capture);
  }
  {
    auto f = open_out(out_dir / "measurements.jsonl");
    write_measurements(f, out.result.header, out.result.rows);
  }
  {
    auto f = open_out(out_dir / "measurements.csv");
    write_measurements_csv(f, out.result.rows);
  }
  out.analysis = analyze_to_dir(out_dir / "capture.jsonl", AnalyzeOptions{}, out_dir);
  return out;
}

}  // namespace wams
