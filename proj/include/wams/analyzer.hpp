#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wams/capture.hpp"

namespace wams::analyzer {

class AnalysisError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Tracks which sequence bytes of one connection have been seen. A segment
/// copy "delivers" when it adds at least one byte not seen before.
class ByteCoverage {
 public:
  /// Adds [begin, end); returns true if any byte was new.
  bool add(std::uint64_t begin, std::uint64_t end);

 private:
  std::map<std::uint64_t, std::uint64_t> ranges_;  // begin -> end, disjoint, non-adjacent
};

struct DelayOptions {
  std::optional<double> t_fdr_ms;  // overrides the per-device value in the header
  std::optional<double> t_dcs_ms;  // overrides the header value
};

struct DelaySample {
  std::uint16_t device_id = 0;
  std::uint32_t frame_seq = 0;
  std::int64_t frame_timestamp_ms = 0;
  std::int64_t arrival_time_us = 0;
  double t_ci_ms = 0.0;   // last-byte arrival minus (timestamp + t_fdr)
  double t_ete_ms = 0.0;  // t_ci + t_fdr + t_dcs
  bool flagged = false;   // more negative than the declared skew bound
};

struct DelaySeries {
  std::vector<DelaySample> samples;  // per device, in completion order
  std::uint64_t flagged = 0;
  std::uint64_t duplicates = 0;
};

DelaySeries one_way_delays(const CaptureLog& log, const DelayOptions& options = {});

struct ThroughputSeries {
  double window_s = 1.0;
  std::map<std::uint16_t, std::vector<double>> kbps;  // per device, one value per window
};

/// Delivering uplink bytes (payload + headers) per window of the population
/// interval, in kbit/s.
ThroughputSeries throughput_series(const CaptureLog& log, double window_s);

struct ByteCounts {
  std::uint64_t first = 0;
  std::uint64_t rto_retx = 0;
  std::uint64_t fast_retx = 0;
  std::uint64_t total = 0;

  double retx_pct() const noexcept;
  double fast_retx_pct() const noexcept;
  /// All retransmitted bytes over all wire bytes.
  double wasted_pct() const noexcept;
};

/// Uplink wire bytes of every copy in the log, per class.
ByteCounts retransmission_stats(const CaptureLog& log);
double wasted_bandwidth_pct(const CaptureLog& log);

struct DeviceMetrics {
  std::uint16_t device_id = 0;
  double avg_throughput_kbps = 0.0;
  double avg_delay_ms = 0.0;  // NaN when no frames fell in the selection
  double max_delay_ms = 0.0;
  double avg_ete_ms = 0.0;
  double retx_pct = 0.0;
  double fast_retx_pct = 0.0;
  double wasted_bw_pct = 0.0;
  std::uint64_t frames = 0;
  std::uint64_t delivering_bytes = 0;
  ByteCounts bytes;

  friend bool operator==(const DeviceMetrics&, const DeviceMetrics&) = default;
};

struct IntegrityReport {
  std::uint64_t malformed_lines = 0;
  std::uint64_t flagged_delays = 0;
  std::uint64_t duplicate_frames = 0;
  std::uint64_t outside_population = 0;

  friend bool operator==(const IntegrityReport&, const IntegrityReport&) = default;
};

struct MetricsSummary {
  std::vector<DeviceMetrics> devices;  // ascending device id
  IntegrityReport integrity;
  std::size_t population_slots = 0;
  std::size_t selected_slots = 0;
};

struct SummaryOptions {
  DelayOptions delay;
  /// Indices of 1-second population slots to average over; all slots if unset.
  std::optional<std::vector<std::size_t>> sample_indices;
};

/// Number of 1-second slots in the capture's population interval.
std::size_t population_slots(const CaptureHeader& header);

/// Per-device summary. Devices are processed in parallel (OpenMP); each
/// device's records are reduced serially in log order, so the result is
/// identical to the serial reference.
MetricsSummary summarize(const CaptureLog& log, const SummaryOptions& options = {});

namespace reference {
/// Single-pass serial implementation kept as the test oracle for summarize.
MetricsSummary summarize_serial(const CaptureLog& log, const SummaryOptions& options = {});
}  // namespace reference

inline const char* kSummaryCsvHeader =
    "device,avg_throughput_kbps,avg_delay_ms,max_delay_ms,retx_pct,fast_retx_pct,wasted_bw_pct";

std::string summary_csv(const MetricsSummary& summary);
std::string summary_table(const MetricsSummary& summary);
std::string delays_csv(const DelaySeries& series);
std::string throughput_csv(const ThroughputSeries& series);

}  // namespace wams::analyzer
