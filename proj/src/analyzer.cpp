#include "wams/analyzer.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "analyzer_internal.hpp"

namespace wams::analyzer {

bool ByteCoverage::add(std::uint64_t begin, std::uint64_t end) {
  if (begin >= end) return false;
  auto it = ranges_.upper_bound(begin);
  if (it != ranges_.begin()) {
    auto prev = std::prev(it);
    if (prev->second >= begin) it = prev;
  }
  std::uint64_t merged_begin = begin;
  std::uint64_t merged_end = end;
  std::uint64_t already = 0;
  while (it != ranges_.end() && it->first <= merged_end) {
    const auto lo = std::max(begin, it->first);
    const auto hi = std::min(end, it->second);
    if (hi > lo) already += hi - lo;
    merged_begin = std::min(merged_begin, it->first);
    merged_end = std::max(merged_end, it->second);
    it = ranges_.erase(it);
  }
  ranges_.emplace(merged_begin, merged_end);
  return already < end - begin;
}

double ByteCounts::retx_pct() const noexcept { return detail::pct(rto_retx, total); }
double ByteCounts::fast_retx_pct() const noexcept { return detail::pct(fast_retx, total); }
double ByteCounts::wasted_pct() const noexcept { return detail::pct(rto_retx + fast_retx, total); }

namespace detail {

Selection make_selection(const CaptureHeader& header, const std::optional<std::vector<std::size_t>>& indices) {
  Selection sel;
  sel.start_us = header.start_time_us;
  sel.n_slots = population_slots(header);
  sel.selected.assign(sel.n_slots, indices ? 0 : 1);
  if (!indices) {
    sel.n_selected = sel.n_slots;
    return sel;
  }
  std::vector<std::size_t> offenders;
  for (auto i : *indices) {
    if (i >= sel.n_slots) offenders.push_back(i);
    else sel.selected[i] = 1;
  }
  if (!offenders.empty())
    throw AnalysisError(fmt::format("sample indices out of range [0, {}): {}", sel.n_slots, fmt::join(offenders, ", ")));
  sel.n_selected = static_cast<std::size_t>(std::count(sel.selected.begin(), sel.selected.end(), 1));
  return sel;
}

double t_fdr_for(const CaptureHeader& header, const DelayOptions& options, std::uint16_t device) {
  if (options.t_fdr_ms) return *options.t_fdr_ms;
  auto it = header.t_fdr_ms.find(device);
  return it == header.t_fdr_ms.end() ? 0.0 : it->second;
}

double t_dcs_for(const CaptureHeader& header, const DelayOptions& options) {
  return options.t_dcs_ms ? *options.t_dcs_ms : header.t_dcs_ms;
}

}  // namespace detail

std::size_t population_slots(const CaptureHeader& header) {
  if (!(header.duration_s > 0)) return 0;
  return static_cast<std::size_t>(std::ceil(header.duration_s - 1e-9));
}

namespace {

std::vector<std::uint16_t> device_ids(const CaptureLog& log) {
  std::set<std::uint16_t> ids;
  for (const auto& [id, _] : log.header.t_fdr_ms) ids.insert(id);
  for (const auto& r : log.records)
    if (r.direction == Direction::kUplink) ids.insert(r.device_id);
  return {ids.begin(), ids.end()};
}

void add_bytes(ByteCounts& c, const CaptureRecord& r) {
  const auto n = r.wire_bytes();
  c.total += n;
  switch (r.retx) {
    case tcplite::RetxClass::kFirst: c.first += n; break;
    case tcplite::RetxClass::kRtoRetx: c.rto_retx += n; break;
    case tcplite::RetxClass::kFastRetx: c.fast_retx += n; break;
  }
}

struct DeviceResult {
  DeviceMetrics metrics;
  IntegrityReport integrity;
};

// Reduces one device's uplink records (in log order) to its metrics.
DeviceResult reduce_device(const CaptureLog& log, const std::vector<std::size_t>& records, std::uint16_t device,
                           const detail::Selection& sel, const DelayOptions& options) {
  DeviceResult out;
  auto& m = out.metrics;
  m.device_id = device;
  const double t_fdr = detail::t_fdr_for(log.header, options, device);
  const double t_dcs = detail::t_dcs_for(log.header, options);
  const double skew = log.header.skew_bound_ms;

  std::map<std::uint64_t, ByteCoverage> coverage;
  std::set<std::uint32_t> seen_frames;
  double delay_sum = 0.0;
  double delay_max = -std::numeric_limits<double>::infinity();

  for (const auto idx : records) {
    const auto& r = log.records[idx];
    const bool delivering = r.payload_bytes > 0 && coverage[r.conn_id].add(r.seq_begin, r.seq_begin + r.payload_bytes);
    const auto slot = sel.slot_of(r.wall_time_us);
    if (!slot) ++out.integrity.outside_population;
    else if (sel.selected[*slot]) {
      add_bytes(m.bytes, r);
      if (delivering) m.delivering_bytes += r.wire_bytes();
    }
    for (const auto& fc : r.frame_complete) {
      if (!seen_frames.insert(fc.frame_seq).second) {
        ++out.integrity.duplicate_frames;
        continue;
      }
      const double t_ci =
          static_cast<double>(fc.arrival_time_us - fc.frame_timestamp_ms * 1000) / 1000.0 - t_fdr;
      if (t_ci < -skew) {
        ++out.integrity.flagged_delays;
        continue;
      }
      const auto fslot = sel.slot_of(fc.frame_timestamp_ms * 1000);
      if (!fslot || !sel.selected[*fslot]) continue;
      ++m.frames;
      delay_sum += t_ci;
      delay_max = std::max(delay_max, t_ci);
    }
  }

  m.avg_throughput_kbps =
      sel.n_selected == 0 ? 0.0 : static_cast<double>(m.delivering_bytes) * 8.0 / 1000.0 / static_cast<double>(sel.n_selected);
  if (m.frames > 0) {
    m.avg_delay_ms = delay_sum / static_cast<double>(m.frames);
    m.max_delay_ms = delay_max;
  } else {
    m.avg_delay_ms = m.max_delay_ms = std::numeric_limits<double>::quiet_NaN();
  }
  m.avg_ete_ms = m.avg_delay_ms + t_fdr + t_dcs;
  m.retx_pct = m.bytes.retx_pct();
  m.fast_retx_pct = m.bytes.fast_retx_pct();
  m.wasted_bw_pct = m.bytes.wasted_pct();
  return out;
}

}  // namespace

MetricsSummary summarize(const CaptureLog& log, const SummaryOptions& options) {
  const auto sel = detail::make_selection(log.header, options.sample_indices);
  const auto ids = device_ids(log);

  std::map<std::uint16_t, std::size_t> slot_of_device;
  for (std::size_t i = 0; i < ids.size(); ++i) slot_of_device[ids[i]] = i;
  std::vector<std::vector<std::size_t>> per_device(ids.size());
  for (std::size_t i = 0; i < log.records.size(); ++i) {
    const auto& r = log.records[i];
    if (r.direction == Direction::kUplink) per_device[slot_of_device.at(r.device_id)].push_back(i);
  }

  std::vector<DeviceResult> results(ids.size());
  const auto n = static_cast<std::ptrdiff_t>(ids.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t d = 0; d < n; ++d)
    results[static_cast<std::size_t>(d)] =
        reduce_device(log, per_device[static_cast<std::size_t>(d)], ids[static_cast<std::size_t>(d)], sel, options.delay);

  MetricsSummary summary;
  summary.population_slots = sel.n_slots;
  summary.selected_slots = sel.n_selected;
  summary.integrity.malformed_lines = log.malformed_lines;
  for (auto& res : results) {
    summary.integrity.flagged_delays += res.integrity.flagged_delays;
    summary.integrity.duplicate_frames += res.integrity.duplicate_frames;
    summary.integrity.outside_population += res.integrity.outside_population;
    summary.devices.push_back(res.metrics);
  }
  return summary;
}

DelaySeries one_way_delays(const CaptureLog& log, const DelayOptions& options) {
  DelaySeries out;
  const double t_dcs = detail::t_dcs_for(log.header, options);
  const double skew = log.header.skew_bound_ms;
  std::set<std::pair<std::uint16_t, std::uint32_t>> seen;
  for (const auto& r : log.records) {
    if (r.direction != Direction::kUplink) continue;
    const double t_fdr = detail::t_fdr_for(log.header, options, r.device_id);
    for (const auto& fc : r.frame_complete) {
      if (!seen.emplace(r.device_id, fc.frame_seq).second) {
        ++out.duplicates;
        continue;
      }
      DelaySample s;
      s.device_id = r.device_id;
      s.frame_seq = fc.frame_seq;
      s.frame_timestamp_ms = fc.frame_timestamp_ms;
      s.arrival_time_us = fc.arrival_time_us;
      s.t_ci_ms = static_cast<double>(fc.arrival_time_us - fc.frame_timestamp_ms * 1000) / 1000.0 - t_fdr;
      s.t_ete_ms = s.t_ci_ms + t_fdr + t_dcs;
      s.flagged = s.t_ci_ms < -skew;
      if (s.flagged) ++out.flagged;
      out.samples.push_back(s);
    }
  }
  std::stable_sort(out.samples.begin(), out.samples.end(),
                   [](const DelaySample& a, const DelaySample& b) { return a.device_id < b.device_id; });
  return out;
}

ThroughputSeries throughput_series(const CaptureLog& log, double window_s) {
  if (!(window_s > 0)) throw AnalysisError(fmt::format("window must be > 0, got {}", window_s));
  ThroughputSeries out;
  out.window_s = window_s;
  const auto window_us = static_cast<std::int64_t>(std::llround(window_s * 1e6));
  const auto n_windows = log.header.duration_s > 0
                             ? static_cast<std::size_t>(std::ceil(log.header.duration_s / window_s - 1e-9))
                             : std::size_t{0};
  const auto ids = device_ids(log);
  for (auto id : ids) out.kbps[id].assign(n_windows, 0.0);

  std::vector<std::uint16_t> dev_list(ids.begin(), ids.end());
  const auto n = static_cast<std::ptrdiff_t>(dev_list.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t d = 0; d < n; ++d) {
    const auto id = dev_list[static_cast<std::size_t>(d)];
    std::vector<std::uint64_t> bytes(n_windows, 0);
    std::map<std::uint64_t, ByteCoverage> coverage;
    for (const auto& r : log.records) {
      if (r.direction != Direction::kUplink || r.device_id != id) continue;
      if (!(r.payload_bytes > 0 && coverage[r.conn_id].add(r.seq_begin, r.seq_begin + r.payload_bytes))) continue;
      if (r.wall_time_us < log.header.start_time_us) continue;
      const auto w = static_cast<std::size_t>((r.wall_time_us - log.header.start_time_us) / window_us);
      if (w < n_windows) bytes[w] += r.wire_bytes();
    }
    auto& series = out.kbps.at(id);  // distinct keys per thread; map shape fixed above
    for (std::size_t w = 0; w < n_windows; ++w) series[w] = static_cast<double>(bytes[w]) * 8.0 / 1000.0 / window_s;
  }
  return out;
}

ByteCounts retransmission_stats(const CaptureLog& log) {
  ByteCounts c;
  for (const auto& r : log.records)
    if (r.direction == Direction::kUplink) add_bytes(c, r);
  return c;
}

double wasted_bandwidth_pct(const CaptureLog& log) { return retransmission_stats(log).wasted_pct(); }

std::string summary_csv(const MetricsSummary& s) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& d : s.devices)
    out += fmt::format("{},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f},{:.3f}\n", d.device_id, d.avg_throughput_kbps,
                       d.avg_delay_ms, d.max_delay_ms, d.retx_pct, d.fast_retx_pct, d.wasted_bw_pct);
  return out;
}

std::string summary_table(const MetricsSummary& s) {
  std::string out = fmt::format("{:>6}  {:>18}  {:>14}  {:>14}  {:>8}  {:>12}  {:>11}\n", "FDR", "Avg Throughput",
                                "Avg Delay", "Max Delay", "Retx", "Fast Retx", "Wasted BW");
  out += fmt::format("{:>6}  {:>18}  {:>14}  {:>14}  {:>8}  {:>12}  {:>11}\n", "", "(kbit/s)", "(ms)", "(ms)", "(%)",
                     "(%)", "(%)");
  for (const auto& d : s.devices)
    out += fmt::format("{:>6}  {:>18.3f}  {:>14.3f}  {:>14.3f}  {:>8.3f}  {:>12.3f}  {:>11.3f}\n", d.device_id,
                       d.avg_throughput_kbps, d.avg_delay_ms, d.max_delay_ms, d.retx_pct, d.fast_retx_pct,
                       d.wasted_bw_pct);
  out += fmt::format("slots {}/{}; integrity: {} malformed lines, {} flagged delays, {} duplicate frames\n",
                     s.selected_slots, s.population_slots, s.integrity.malformed_lines, s.integrity.flagged_delays,
                     s.integrity.duplicate_frames);
  return out;
}

std::string delays_csv(const DelaySeries& series) {
  std::string out = "device,frame_seq,frame_timestamp_ms,arrival_time_us,t_ci_ms,t_ete_ms,flagged\n";
  for (const auto& s : series.samples)
    out += fmt::format("{},{},{},{},{:.3f},{:.3f},{}\n", s.device_id, s.frame_seq, s.frame_timestamp_ms,
                       s.arrival_time_us, s.t_ci_ms, s.t_ete_ms, s.flagged ? 1 : 0);
  return out;
}

std::string throughput_csv(const ThroughputSeries& series) {
  std::string out = "device,window,kbps\n";
  for (const auto& [id, values] : series.kbps)
    for (std::size_t w = 0; w < values.size(); ++w) out += fmt::format("{},{},{:.3f}\n", id, w, values[w]);
  return out;
}

}  // namespace wams::analyzer
