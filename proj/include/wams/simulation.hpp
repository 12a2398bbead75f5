#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "wams/analyzer.hpp"
#include "wams/capture.hpp"
#include "wams/dcs.hpp"
#include "wams/fdr.hpp"
#include "wams/scenario.hpp"

namespace wams {

struct DeviceReport {
  std::uint16_t device_id = 0;
  fdr::DeviceStats stats;
  tcplite::ConnectionStats transport;
};

struct SimulationResult {
  CaptureHeader header;
  std::vector<CaptureRecord> capture;
  std::vector<MeasurementRow> rows;
  std::vector<DeviceReport> devices;
  dcs::IntegrityStats integrity;
  std::size_t events = 0;
};

/// Runs one scenario to completion on a single-threaded event loop.
/// Deterministic for a given scenario (including its seed).
SimulationResult run_simulation(const Scenario& scenario);

void write_capture(std::ostream& out, const CaptureHeader& header, std::span<const CaptureRecord> records);
void write_measurements(std::ostream& out, const CaptureHeader& header, std::span<const MeasurementRow> rows);
void write_measurements_csv(std::ostream& out, std::span<const MeasurementRow> rows);

struct AnalyzeOptions {
  analyzer::DelayOptions delay;
  std::optional<std::uint64_t> sample_size;  // number of 1-second slots to draw
  std::uint64_t sample_seed = 1;
  double window_s = 1.0;
};

struct AnalyzeOutput {
  CaptureLog log;
  analyzer::MetricsSummary summary;
  std::vector<std::uint64_t> sample_indices;
};

/// Reads a capture log and writes summary.csv, delays.csv and
/// throughput.csv into `out_dir`.
AnalyzeOutput analyze_to_dir(const std::filesystem::path& capture_path, const AnalyzeOptions& options,
                             const std::filesystem::path& out_dir);

struct SimulateOutput {
  SimulationResult result;
  AnalyzeOutput analysis;
};

/// Simulates, writes capture.jsonl, measurements.jsonl, measurements.csv,
/// then analyzes the written capture exactly as `analyze` would.
SimulateOutput simulate_to_dir(const Scenario& scenario, const std::filesystem::path& out_dir);

}  // namespace wams
