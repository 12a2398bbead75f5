#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wams/tcplite.hpp"

namespace wams {

// Capture and measurement logs are JSON-lines. Line one is a header object;
// each following line is one record. All wall-clock fields are integer
// microseconds since the Unix epoch (declared as "time_unit": "us" in the
// header); frame_timestamp is the frame's own UTC millisecond stamp.

enum class Direction { kUplink, kAck };
std::string_view to_string(Direction d);
std::optional<Direction> direction_from_string(std::string_view s);

struct FrameCompletion {
  std::uint32_t frame_seq = 0;
  std::int64_t frame_timestamp_ms = 0;
  std::int64_t arrival_time_us = 0;  // arrival of the segment carrying the last byte

  friend bool operator==(const FrameCompletion&, const FrameCompletion&) = default;
};

struct CaptureRecord {
  std::int64_t wall_time_us = 0;
  std::uint16_t device_id = 0;
  std::uint64_t conn_id = 0;
  Direction direction = Direction::kUplink;
  std::uint64_t seq_begin = 0;  // [seq_begin, seq_end) of sequence space
  std::uint64_t seq_end = 0;
  std::uint32_t payload_bytes = 0;
  std::uint32_t header_bytes = tcplite::Segment::kHeaderBytes;
  tcplite::RetxClass retx = tcplite::RetxClass::kFirst;
  std::vector<FrameCompletion> frame_complete;

  std::uint64_t wire_bytes() const noexcept { return std::uint64_t{payload_bytes} + header_bytes; }
  friend bool operator==(const CaptureRecord&, const CaptureRecord&) = default;
};

struct CaptureHeader {
  int version = 1;
  std::string source = "sim";  // "sim" or "live"
  std::int64_t start_time_us = 0;  // population start (first frame instant)
  double duration_s = 0.0;         // population length
  double skew_bound_ms = 0.0;      // tolerated clock disagreement FDR vs DCS
  double t_dcs_ms = 0.0;
  std::map<std::uint16_t, double> t_fdr_ms;  // also lists every configured device
  std::optional<std::uint64_t> seed;

  friend bool operator==(const CaptureHeader&, const CaptureHeader&) = default;
};

struct CaptureLog {
  CaptureHeader header;
  std::vector<CaptureRecord> records;
  std::size_t malformed_lines = 0;
};

struct MeasurementRow {
  std::uint16_t device_id = 0;
  std::uint64_t conn_id = 0;
  std::uint32_t frame_seq = 0;
  std::int64_t frame_timestamp_ms = 0;
  std::int64_t arrival_time_us = 0;
  double frequency_hz = 0.0;
  double voltage_mag_pu = 0.0;
  double voltage_angle_deg = 0.0;
  std::uint8_t status = 0;

  friend bool operator==(const MeasurementRow&, const MeasurementRow&) = default;
};

struct MeasurementLog {
  std::vector<MeasurementRow> rows;
  std::size_t malformed_lines = 0;
};

class LogFormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_header_line(const CaptureHeader& h);
std::string format_record_line(const CaptureRecord& r);
std::string format_measurement_header_line(const CaptureHeader& h);
std::string format_row_line(const MeasurementRow& r);
std::string measurement_csv_header();
std::string format_row_csv(const MeasurementRow& r);

/// Throws LogFormatError when the first line is not a capture header.
/// Later lines that fail to parse are skipped and counted.
CaptureLog read_capture(std::istream& in);
CaptureLog read_capture_file(const std::string& path);

MeasurementLog read_measurements(std::istream& in);
MeasurementLog read_measurements_file(const std::string& path);

}  // namespace wams
