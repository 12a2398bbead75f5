#pragma once

// Five small capture logs built by hand, each with expected metrics worked
// out by hand. Shared by the unit tests and the acceptance binary.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wams/analyzer.hpp"
#include "wams/capture.hpp"

namespace wams::fixtures {

inline constexpr std::int64_t kStartUs = 1'700'000'000'000'000;
inline constexpr std::int64_t kStartMs = kStartUs / 1000;

struct Expected {
  std::uint16_t device_id;
  double avg_throughput_kbps;
  double avg_delay_ms;
  double max_delay_ms;
  double retx_pct;
  double fast_retx_pct;
  double wasted_bw_pct;
  std::uint64_t frames;
  double avg_ete_ms;
};

struct HandCase {
  std::string name;
  CaptureLog log;
  analyzer::SummaryOptions options;
  std::vector<Expected> devices;
  analyzer::IntegrityReport integrity;
};

inline CaptureRecord uplink(std::int64_t wall_us, std::uint16_t dev, std::uint64_t seq_begin, std::uint32_t len,
                            tcplite::RetxClass cls = tcplite::RetxClass::kFirst,
                            std::vector<FrameCompletion> done = {}) {
  CaptureRecord r;
  r.wall_time_us = wall_us;
  r.device_id = dev;
  r.conn_id = 1;
  r.direction = Direction::kUplink;
  r.seq_begin = seq_begin;
  r.seq_end = seq_begin + len;
  r.payload_bytes = len;
  r.retx = cls;
  r.frame_complete = std::move(done);
  return r;
}

inline CaptureRecord ack(std::int64_t wall_us, std::uint16_t dev) {
  CaptureRecord r;
  r.wall_time_us = wall_us;
  r.device_id = dev;
  r.conn_id = 1;
  r.direction = Direction::kAck;
  return r;
}

inline CaptureHeader make_header(double duration_s, std::vector<std::pair<std::uint16_t, double>> t_fdr,
                                 double t_dcs = 0.0, double skew = 0.0) {
  CaptureHeader h;
  h.start_time_us = kStartUs;
  h.duration_s = duration_s;
  h.t_dcs_ms = t_dcs;
  h.skew_bound_ms = skew;
  for (auto [id, v] : t_fdr) h.t_fdr_ms[id] = v;
  return h;
}

inline std::vector<HandCase> hand_cases() {
  using tcplite::RetxClass;
  std::vector<HandCase> cases;

  {  // three whole frames, no loss, two 1-second slots
    HandCase c;
    c.name = "lossless";
    c.log.header = make_header(2, {{1, 0.0}});
    c.log.records = {
        uplink(kStartUs + 101'146, 1, 1000, 55, RetxClass::kFirst, {{0, kStartMs, kStartUs + 101'146}}),
        ack(kStartUs + 101'146, 1),
        uplink(kStartUs + 201'146, 1, 1055, 55, RetxClass::kFirst, {{1, kStartMs + 100, kStartUs + 201'146}}),
        ack(kStartUs + 201'146, 1),
        uplink(kStartUs + 1'101'146, 1, 1110, 55, RetxClass::kFirst, {{10, kStartMs + 1000, kStartUs + 1'101'146}}),
    };
    // 3 x 95 wire bytes over 2 slots
    c.devices = {{1, 3 * 95 * 8 / 1000.0 / 2, 101.146, 101.146, 0, 0, 0, 3, 101.146}};
    cases.push_back(std::move(c));
  }
  {  // one frame split 27/28; delay runs to the second segment
    HandCase c;
    c.name = "split frame";
    c.log.header = make_header(1, {{2, 5.0}}, 1.5);
    c.log.records = {
        uplink(kStartUs + 100'000, 2, 0, 27),
        uplink(kStartUs + 130'000, 2, 27, 28, RetxClass::kFirst, {{0, kStartMs, kStartUs + 130'000}}),
    };
    // 130 ms to the last byte minus t_fdr 5; end-to-end adds t_fdr and t_dcs back
    c.devices = {{2, 135 * 8 / 1000.0, 125.0, 125.0, 0, 0, 0, 1, 131.5}};
    cases.push_back(std::move(c));
  }
  {  // spurious RTO copy of an already delivered frame
    HandCase c;
    c.name = "duplicate frame";
    c.log.header = make_header(1, {{3, 0.0}});
    c.log.records = {
        uplink(kStartUs + 150'000, 3, 0, 55, RetxClass::kFirst, {{0, kStartMs, kStartUs + 150'000}}),
        uplink(kStartUs + 420'000, 3, 0, 55, RetxClass::kRtoRetx, {{0, kStartMs, kStartUs + 420'000}}),
    };
    c.devices = {{3, 95 * 8 / 1000.0, 150.0, 150.0, 50.0, 0, 50.0, 1, 150.0}};
    c.integrity.duplicate_frames = 1;
    cases.push_back(std::move(c));
  }
  {  // first frame lost; three later frames wait behind the hole until a fast retransmit
    HandCase c;
    c.name = "fast retransmit fills a hole";
    c.log.header = make_header(1, {{4, 0.0}});
    const std::int64_t t = kStartUs + 530'000;
    c.log.records = {
        uplink(kStartUs + 210'000, 4, 55, 55),
        uplink(kStartUs + 310'000, 4, 110, 55),
        uplink(kStartUs + 410'000, 4, 165, 55),
        uplink(t, 4, 0, 55, RetxClass::kFastRetx,
               {{0, kStartMs, t}, {1, kStartMs + 100, t}, {2, kStartMs + 200, t}, {3, kStartMs + 300, t}}),
    };
    // delays 530, 430, 330, 230
    c.devices = {{4, 380 * 8 / 1000.0, 380.0, 530.0, 0, 25.0, 25.0, 4, 380.0}};
    cases.push_back(std::move(c));
  }
  {  // two devices, sampled slots {0, 2}, a flagged negative delay, a record past the population
    HandCase c;
    c.name = "sampling and skew";
    c.log.header = make_header(4, {{5, 0.0}, {6, 0.0}}, 0.0, 10.0);
    c.log.records = {
        uplink(kStartUs + 100'000, 5, 0, 55, RetxClass::kFirst, {{0, kStartMs, kStartUs + 100'000}}),
        uplink(kStartUs + 480'000, 6, 0, 55, RetxClass::kFirst, {{5, kStartMs + 500, kStartUs + 480'000}}),
        uplink(kStartUs + 1'200'000, 5, 55, 55, RetxClass::kFirst, {{10, kStartMs + 1000, kStartUs + 1'200'000}}),
        uplink(kStartUs + 2'300'000, 5, 110, 55, RetxClass::kFirst, {{20, kStartMs + 2000, kStartUs + 2'300'000}}),
        uplink(kStartUs + 2'190'000, 6, 55, 55, RetxClass::kFirst, {{21, kStartMs + 2100, kStartUs + 2'190'000}}),
        uplink(kStartUs + 3'400'000, 5, 165, 55, RetxClass::kFirst, {{30, kStartMs + 3000, kStartUs + 3'400'000}}),
        uplink(kStartUs + 4'500'000, 5, 165, 55, RetxClass::kRtoRetx),
    };
    c.options.sample_indices = std::vector<std::size_t>{0, 2};
    // device 5: frames in slots 0 and 2 (100, 300 ms); bytes 2 x 95 over 2 slots
    // device 6: frame 5 is 20 ms early (flagged); frame 21 takes 90 ms
    c.devices = {{5, 190 * 8 / 1000.0 / 2, 200.0, 300.0, 0, 0, 0, 2, 200.0},
                 {6, 190 * 8 / 1000.0 / 2, 90.0, 90.0, 0, 0, 0, 1, 90.0}};
    c.integrity.flagged_delays = 1;
    c.integrity.outside_population = 1;
    cases.push_back(std::move(c));
  }
  return cases;
}

/// Exact comparison; returns a description of the first mismatch.
inline std::optional<std::string> compare(const analyzer::MetricsSummary& got, const HandCase& c) {
  if (got.devices.size() != c.devices.size()) return "device count";
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
  for (std::size_t i = 0; i < c.devices.size(); ++i) {
    const auto& g = got.devices[i];
    const auto& e = c.devices[i];
    const auto tag = c.name + ", device " + std::to_string(e.device_id) + ": ";
    if (g.device_id != e.device_id) return tag + "id";
    if (!near(g.avg_throughput_kbps, e.avg_throughput_kbps)) return tag + "throughput";
    if (!near(g.avg_delay_ms, e.avg_delay_ms)) return tag + "avg delay";
    if (!near(g.max_delay_ms, e.max_delay_ms)) return tag + "max delay";
    if (!near(g.retx_pct, e.retx_pct)) return tag + "retx";
    if (!near(g.fast_retx_pct, e.fast_retx_pct)) return tag + "fast retx";
    if (!near(g.wasted_bw_pct, e.wasted_bw_pct)) return tag + "wasted";
    if (g.frames != e.frames) return tag + "frames";
    if (!near(g.avg_ete_ms, e.avg_ete_ms)) return tag + "end-to-end";
  }
  if (!(got.integrity == c.integrity)) return c.name + ": integrity counters";
  return std::nullopt;
}

}  // namespace wams::fixtures
