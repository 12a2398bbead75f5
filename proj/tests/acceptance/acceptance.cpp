// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <unistd.h>

#include "fixtures/hand_logs.hpp"
#include "fixtures/wire.hpp"
#include "wams/analyzer.hpp"
#include "wams/frame.hpp"
#include "wams/live.hpp"
#include "wams/log.hpp"
#include "wams/simnet.hpp"
#include "wams/simulation.hpp"
#include "wams/stats.hpp"

using namespace wams;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome ok(bool pass, std::string detail) { return Outcome{pass, std::move(detail)}; }

Scenario bundled(const std::string& name) {
  return load_scenario_file(std::string(WAMS_SCENARIO_DIR) + "/" + name + ".scenario");
}

CaptureLog as_log(const SimulationResult& r) { return CaptureLog{r.header, r.capture, 0}; }

std::string capture_text(const SimulationResult& r) {
  std::ostringstream out;
  write_capture(out, r.header, r.capture);
  return out.str();
}

Outcome sample_size() {
  const double z = stats::z_for_confidence(0.95);
  const double d = stats::min_sample_size({0.908, z, 0.02, 86400});
  const double th = stats::min_sample_size({0.186, z, 0.02, 86400});
  const std::vector<double> both{d, th};
  const double combined = stats::combined_min(both);
  const bool pass = z == 1.959 && std::abs(d - 7246.63) <= 1.0 && std::abs(th - 330.65) <= 0.5 &&
                    std::abs(combined - 7246.63) <= 1.0;
  return ok(pass, fmt::format("z={} n(0.908)={:.2f} n(0.186)={:.2f} combined={:.2f}", z, d, th, combined));
}

Outcome serialization() {
  sim::ChannelParams ch;
  ch.t_p_ms = 0;
  ch.rate_bps = 384000;
  auto rng = sim::make_rng(1, 1);
  const double ms = sim::transit_delay_ms(55, ch, rng);
  return ok(std::abs(ms - 1.1458) <= 0.001, fmt::format("transit_delay={:.6f} ms", ms));
}

Outcome lossless() {
  const auto sc = bundled("lossless");
  const auto res = run_simulation(sc);
  const auto log = as_log(res);
  const auto series = analyzer::one_way_delays(log);
  const double closed = sc.devices[0].uplink.t_p_ms + 55.0 * 8.0 / 384000.0 * 1000.0;
  double worst = 0;
  for (const auto& s : series.samples) worst = std::max(worst, std::abs(s.t_ci_ms - closed));
  const auto summary = analyzer::summarize(log);
  bool zero = true;
  for (const auto& d : summary.devices)
    zero = zero && d.retx_pct == 0 && d.fast_retx_pct == 0 && d.wasted_bw_pct == 0;
  const bool pass = res.rows.size() == 6000 && series.samples.size() == 6000 && worst <= 0.001 && zero;
  return ok(pass, fmt::format("rows={} delays={} max|T_CI-{:.4f}|={:.4f} ms (1 us time base) zero_retx={}",
                              res.rows.size(), series.samples.size(), closed, worst, zero));
}

Outcome loss_tracking() {
  const auto res = run_simulation(bundled("lossy_0p3"));
  std::uint64_t frames = 0;
  for (const auto& d : res.devices) frames += d.stats.frames_generated;
  const auto log = as_log(res);
  const auto summary = analyzer::summarize(log);
  double mean = 0;
  bool identity = true;
  for (const auto& d : summary.devices) {
    mean += d.retx_pct + d.fast_retx_pct;
    // byte identity is exact; the percentages differ only by rounding of one division
    const double sum = d.retx_pct + d.fast_retx_pct;
    identity = identity && d.bytes.rto_retx + d.bytes.fast_retx <= d.bytes.total &&
               std::abs(d.wasted_bw_pct - sum) <= 1e-12 * std::max(1.0, sum) &&
               d.wasted_bw_pct == d.bytes.wasted_pct();
  }
  mean /= static_cast<double>(summary.devices.size());
  const auto all = analyzer::retransmission_stats(log);
  const bool pass = frames >= 100000 && mean >= 0.2 && mean <= 0.4 && identity;
  return ok(pass, fmt::format("frames={} mean(retx+fast)={:.4f}% overall={:.4f}% wasted=sum:{}", frames, mean,
                              all.wasted_pct(), identity));
}

Outcome delay_band() {
  const auto res = run_simulation(bundled("paper_like"));
  const auto summary = analyzer::summarize(as_log(res));
  double lo = 1e300, hi = -1e300, worst = 0;
  for (const auto& d : summary.devices) {
    lo = std::min(lo, d.avg_delay_ms);
    hi = std::max(hi, d.avg_delay_ms);
    worst = std::max(worst, d.max_delay_ms);
  }
  const auto csv = analyzer::summary_csv(summary);
  std::istringstream in(csv);
  std::string header, line;
  std::getline(in, header);
  std::size_t rows = 0;
  bool columns = true;
  while (std::getline(in, line)) {
    ++rows;
    columns = columns && std::count(line.begin(), line.end(), ',') == 6;
  }
  const bool pass = summary.devices.size() == 10 && lo >= 100 && hi <= 170 && worst < 1000 &&
                    header == analyzer::kSummaryCsvHeader && rows == 10 && columns;
  return ok(pass, fmt::format("mean delay {:.3f}..{:.3f} ms, max {:.3f} ms, csv rows={} header_ok={}", lo, hi, worst,
                              rows, header == analyzer::kSummaryCsvHeader));
}

Outcome analyzer_oracle() {
  std::size_t n = 0;
  std::string failures;
  for (const auto& c : fixtures::hand_cases()) {
    ++n;
    if (auto m = fixtures::compare(analyzer::summarize(c.log, c.options), c)) failures += fmt::format(" [{}: {}]", c.name, *m);
  }
  return ok(n == 5 && failures.empty(), fmt::format("{} hand logs{}", n, failures.empty() ? ", all metrics exact" : failures));
}

Outcome reliability() {
  std::string detail;
  bool pass = true;
  for (double p : {0.0, 0.01, 0.1}) {
    tcplite::TransportConfig cfg;
    cfg.max_retransmits = 1000;
    cfg.syn_retries = 1000;
    cfg.max_rto_ms = 4000;
    fixtures::Wire w(cfg, p, 31 + static_cast<std::uint64_t>(p * 1000));
    w.apply(true, w.client.open(0));
    w.loop.run_until(60 * sim::kUsPerSec);
    std::vector<std::uint8_t> sent;
    auto split = sim::make_rng(8, 8);
    sim::SimTime t = w.loop.now();
    for (int i = 0; i < 10000; ++i) {
      std::vector<std::uint8_t> payload(55);
      for (std::size_t k = 0; k < payload.size(); ++k) payload[k] = static_cast<std::uint8_t>(i * 31 + k);
      payload[0] = static_cast<std::uint8_t>(i);
      payload[1] = static_cast<std::uint8_t>(i >> 8);
      sent.insert(sent.end(), payload.begin(), payload.end());
      t += 100 * 1000;
      w.loop.run_until(t);
      w.apply(true, w.client.send(payload, sim::uniform01(split) < 0.15, t));
    }
    w.loop.run_until(t + 3600 * sim::kUsPerSec);
    const auto retx = w.sent_by_class[1] + w.sent_by_class[2];
    const bool same = !w.reset && w.received == sent;
    const bool clean = p > 0 || retx == 0;
    pass = pass && same && clean;
    detail += fmt::format("{}p={} identical={} retx={}", detail.empty() ? "" : "; ", p, same, retx);
  }
  return ok(pass, detail);
}

Outcome codec() {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> freq(45.0, 65.0), vm(0.0, 2.0), ang(-180.0, 180.0);
  std::size_t round_trips = 0;
  bool lengths = true;
  for (int i = 0; i < 10000; ++i) {
    FdrFrame f;
    f.device_id = static_cast<std::uint16_t>(rng());
    f.frame_seq = static_cast<std::uint32_t>(rng());
    f.utc_timestamp_ms = static_cast<std::int64_t>(rng() >> 20);
    f.frequency_hz = freq(rng);
    f.voltage_mag_pu = vm(rng);
    f.voltage_angle_deg = ang(rng);
    f.status = static_cast<std::uint8_t>(rng());
    const auto b = encode_frame(f);
    lengths = lengths && b.size() == 55;
    if (decode_frame(b) == f) ++round_trips;
  }
  FdrFrame g;
  g.utc_timestamp_ms = 1'700'000'000'000;
  g.frequency_hz = 50.0;
  g.voltage_mag_pu = 1.0;
  const auto good = encode_frame(g);
  int detected = 0;
  for (std::size_t bit = 0; bit < 55 * 8; ++bit) {
    auto b = good;
    b[bit / 8] ^= static_cast<std::uint8_t>(0x80 >> (bit % 8));
    try {
      (void)decode_frame(b);
    } catch (const DecodeError&) {
      ++detected;
    }
  }
  return ok(round_trips == 10000 && lengths && detected == 440,
            fmt::format("round_trips={}/10000 len55={} bit_flips_detected={}/440", round_trips, lengths, detected));
}

Outcome determinism() {
  bool pass = true;
  std::string detail;
  for (const char* name : {"lossless", "lossy_0p3", "paper_like"}) {
    const auto sc = bundled(name);
    const auto a = capture_text(run_simulation(sc));
    const auto b = capture_text(run_simulation(sc));
    pass = pass && a == b && !a.empty();
    detail += fmt::format("{}{}={} ({} B)", detail.empty() ? "" : "; ", name, a == b ? "identical" : "DIFFERENT", a.size());
  }
  return ok(pass, detail);
}

Outcome live_loopback() {
  const auto dir = fs::temp_directory_path() / fmt::format("wams_acceptance_live_{}", ::getpid());
  fs::remove_all(dir);
  live::ServerConfig scfg;
  scfg.port = 0;
  scfg.out_dir = dir;
  live::Server server(scfg);
  server.start();
  const auto t0 = live::utc_now_us();
  live::EmulatorConfig ecfg;
  ecfg.port = server.port();
  ecfg.devices = 3;
  ecfg.duration_s = 30.0;
  const auto report = live::run_emulators(ecfg);
  server.stop();
  const auto t1 = live::utc_now_us();

  const auto rows = read_measurements_file(server.measurements_path().string());
  std::map<std::uint16_t, std::int64_t> last;
  bool valid = rows.malformed_lines == 0;
  for (const auto& r : rows.rows) {
    const std::int64_t ts_us = r.frame_timestamp_ms * 1000;
    valid = valid && r.frame_timestamp_ms % 100 == 0 && ts_us >= t0 - 100'000 && ts_us <= t1 &&
            r.arrival_time_us >= ts_us - static_cast<std::int64_t>(scfg.skew_bound_ms * 1000);
    auto [it, fresh] = last.emplace(r.device_id, r.frame_timestamp_ms);
    if (!fresh) {
      valid = valid && r.frame_timestamp_ms > it->second;
      it->second = r.frame_timestamp_ms;
    }
  }
  const auto generated = report.frames_generated();
  const double share = generated ? static_cast<double>(rows.rows.size()) / static_cast<double>(generated) : 0.0;
  fs::remove_all(dir);
  const bool pass = generated > 0 && share >= 0.95 && valid && last.size() == 3 && !report.any_offline();
  return ok(pass, fmt::format("generated={} stored={} ({:.2f}%) devices={} timestamps_valid={}", generated,
                              rows.rows.size(), share * 100.0, last.size(), valid));
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  log::get()->set_level(spdlog::level::err);
  const std::vector<Criterion> criteria{
      {1, "sample-size reproduction", 1, sample_size},
      {2, "serialization term", 1, serialization},
      {3, "lossless oracle", 10, lossless},
      {4, "loss-rate tracking", 60, loss_tracking},
      {5, "delay band calibration", 60, delay_band},
      {6, "analyzer oracle equivalence", 1, analyzer_oracle},
      {7, "transport reliability", 30, reliability},
      {8, "codec", 5, codec},
      {9, "determinism", 20, determinism},
      {10, "live loopback", 40, live_loopback},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = ok(false, fmt::format("exception: {}", e.what()));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failed;
    fmt::print("{} {:>2} {}: {} [{:.2f} s, limit {} s{}]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail, secs,
               c.limit_s, in_time ? "" : ", TOO SLOW");
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
