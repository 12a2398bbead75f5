#include "wams/capture.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>

#include <fmt/format.h>
#include <json.hpp>

namespace wams {
namespace {

using Json = nlohmann::ordered_json;

Json header_json(const CaptureHeader& h) {
  Json t_fdr = Json::object();
  for (const auto& [id, ms] : h.t_fdr_ms) t_fdr[std::to_string(id)] = ms;
  Json j;
  j["version"] = h.version;
  j["time_unit"] = "us";
  j["source"] = h.source;
  j["start_time"] = h.start_time_us;
  j["duration_s"] = h.duration_s;
  j["skew_bound_ms"] = h.skew_bound_ms;
  j["t_dcs_ms"] = h.t_dcs_ms;
  j["t_fdr_ms"] = std::move(t_fdr);
  if (h.seed) j["seed"] = *h.seed;
  return j;
}

CaptureHeader header_from_json(const Json& j) {
  CaptureHeader h;
  h.version = j.at("version").get<int>();
  if (j.value("time_unit", std::string{"us"}) != "us") throw LogFormatError("unsupported time_unit");
  h.source = j.value("source", std::string{"sim"});
  h.start_time_us = j.at("start_time").get<std::int64_t>();
  h.duration_s = j.at("duration_s").get<double>();
  h.skew_bound_ms = j.value("skew_bound_ms", 0.0);
  h.t_dcs_ms = j.value("t_dcs_ms", 0.0);
  if (j.contains("t_fdr_ms"))
    for (const auto& [key, value] : j.at("t_fdr_ms").items())
      h.t_fdr_ms[static_cast<std::uint16_t>(std::stoul(key))] = value.get<double>();
  if (j.contains("seed")) h.seed = j.at("seed").get<std::uint64_t>();
  return h;
}

CaptureRecord record_from_json(const Json& j) {
  CaptureRecord r;
  r.wall_time_us = j.at("wall_time").get<std::int64_t>();
  r.device_id = j.at("device_id").get<std::uint16_t>();
  r.conn_id = j.value("conn_id", std::uint64_t{0});
  const auto dir = direction_from_string(j.at("direction").get<std::string>());
  if (!dir) throw LogFormatError("bad direction");
  r.direction = *dir;
  const auto& range = j.at("seq_range");
  if (!range.is_array() || range.size() != 2) throw LogFormatError("bad seq_range");
  r.seq_begin = range[0].get<std::uint64_t>();
  r.seq_end = range[1].get<std::uint64_t>();
  if (r.seq_end < r.seq_begin) throw LogFormatError("inverted seq_range");
  const auto payload = j.at("payload_bytes").get<std::int64_t>();
  const auto header = j.at("header_bytes").get<std::int64_t>();
  if (payload < 0 || header < 0) throw LogFormatError("negative byte count");
  r.payload_bytes = static_cast<std::uint32_t>(payload);
  r.header_bytes = static_cast<std::uint32_t>(header);
  const auto cls = tcplite::retx_class_from_string(j.at("retransmission_class").get<std::string>());
  if (!cls) throw LogFormatError("bad retransmission_class");
  r.retx = *cls;
  if (j.contains("frame_complete") && !j.at("frame_complete").is_null()) {
    for (const auto& fc : j.at("frame_complete")) {
      FrameCompletion c;
      c.frame_seq = fc.at("frame_seq").get<std::uint32_t>();
      c.frame_timestamp_ms = fc.at("frame_timestamp").get<std::int64_t>();
      c.arrival_time_us = fc.at("arrival_time_of_last_byte").get<std::int64_t>();
      r.frame_complete.push_back(c);
    }
  }
  return r;
}

MeasurementRow row_from_json(const Json& j) {
  MeasurementRow r;
  r.device_id = j.at("device_id").get<std::uint16_t>();
  r.conn_id = j.value("conn_id", std::uint64_t{0});
  r.frame_seq = j.at("frame_seq").get<std::uint32_t>();
  r.frame_timestamp_ms = j.at("frame_timestamp").get<std::int64_t>();
  r.arrival_time_us = j.at("arrival_time").get<std::int64_t>();
  r.frequency_hz = j.at("frequency").get<double>();
  r.voltage_mag_pu = j.at("voltage_mag").get<double>();
  r.voltage_angle_deg = j.at("voltage_angle").get<double>();
  r.status = j.value("status", std::uint8_t{0});
  return r;
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::kUplink ? "UPLINK" : "ACK"; }

std::optional<Direction> direction_from_string(std::string_view s) {
  if (s == "UPLINK") return Direction::kUplink;
  if (s == "ACK") return Direction::kAck;
  return std::nullopt;
}

std::string format_header_line(const CaptureHeader& h) {
  Json j;
  j["capture_header"] = header_json(h);
  return j.dump();
}

std::string format_measurement_header_line(const CaptureHeader& h) {
  Json j;
  j["measurement_header"] = header_json(h);
  return j.dump();
}

std::string format_record_line(const CaptureRecord& r) {
  Json j;
  j["wall_time"] = r.wall_time_us;
  j["device_id"] = r.device_id;
  j["conn_id"] = r.conn_id;
  j["direction"] = to_string(r.direction);
  j["seq_range"] = Json::array({r.seq_begin, r.seq_end});
  j["payload_bytes"] = r.payload_bytes;
  j["header_bytes"] = r.header_bytes;
  j["retransmission_class"] = tcplite::to_string(r.retx);
  if (!r.frame_complete.empty()) {
    Json frames = Json::array();
    for (const auto& c : r.frame_complete) {
      Json f;
      f["frame_seq"] = c.frame_seq;
      f["frame_timestamp"] = c.frame_timestamp_ms;
      f["arrival_time_of_last_byte"] = c.arrival_time_us;
      frames.push_back(std::move(f));
    }
    j["frame_complete"] = std::move(frames);
  }
  return j.dump();
}

std::string format_row_line(const MeasurementRow& r) {
  Json j;
  j["device_id"] = r.device_id;
  j["conn_id"] = r.conn_id;
  j["frame_seq"] = r.frame_seq;
  j["frame_timestamp"] = r.frame_timestamp_ms;
  j["arrival_time"] = r.arrival_time_us;
  j["frequency"] = r.frequency_hz;
  j["voltage_mag"] = r.voltage_mag_pu;
  j["voltage_angle"] = r.voltage_angle_deg;
  j["status"] = r.status;
  return j.dump();
}

std::string measurement_csv_header() {
  return "device_id,conn_id,frame_seq,frame_timestamp_ms,arrival_time_us,frequency_hz,voltage_mag_pu,voltage_angle_deg,"
         "status";
}

std::string format_row_csv(const MeasurementRow& r) {
  return fmt::format("{},{},{},{},{},{:.6f},{:.6f},{:.6f},{}", r.device_id, r.conn_id, r.frame_seq,
                     r.frame_timestamp_ms, r.arrival_time_us, r.frequency_hz, r.voltage_mag_pu, r.voltage_angle_deg,
                     r.status);
}

CaptureLog read_capture(std::istream& in) {
  CaptureLog log;
  std::string line;
  if (!std::getline(in, line)) throw LogFormatError("capture log is empty");
  try {
    const auto j = Json::parse(line);
    log.header = header_from_json(j.at("capture_header"));
  } catch (const nlohmann::json::exception& e) {
    throw LogFormatError(fmt::format("bad capture header: {}", e.what()));
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      log.records.push_back(record_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception&) {
      ++log.malformed_lines;
    } catch (const LogFormatError&) {
      ++log.malformed_lines;
    }
  }
  // An open-ended log (live capture) declares duration 0; the population
  // then runs to the last recorded second.
  if (!(log.header.duration_s > 0) && !log.records.empty()) {
    std::int64_t last = log.header.start_time_us;
    for (const auto& r : log.records) last = std::max(last, r.wall_time_us);
    log.header.duration_s = std::floor(static_cast<double>(last - log.header.start_time_us) / 1e6) + 1.0;
  }
  return log;
}

CaptureLog read_capture_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LogFormatError(fmt::format("cannot open capture log '{}'", path));
  return read_capture(in);
}

MeasurementLog read_measurements(std::istream& in) {
  MeasurementLog log;
  std::string line;
  if (!std::getline(in, line)) throw LogFormatError("measurement log is empty");
  try {
    (void)Json::parse(line).at("measurement_header");
  } catch (const nlohmann::json::exception& e) {
    throw LogFormatError(fmt::format("bad measurement header: {}", e.what()));
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      log.rows.push_back(row_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception&) {
      ++log.malformed_lines;
    }
  }
  return log;
}

MeasurementLog read_measurements_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LogFormatError(fmt::format("cannot open measurement log '{}'", path));
  return read_measurements(in);
}

}  // namespace wams
