// Serial reference for analyzer::summarize. One pass over the log with
// per-device accumulators; no partitioning, no threads.

#include <limits>
#include <map>
#include <set>

#include "analyzer_internal.hpp"
#include "wams/analyzer.hpp"

namespace wams::analyzer::reference {

namespace {
struct Accum {
  DeviceMetrics m;
  double t_fdr = 0.0;
  double delay_sum = 0.0;
  double delay_max = -std::numeric_limits<double>::infinity();
};
}  // namespace

MetricsSummary summarize_serial(const CaptureLog& log, const SummaryOptions& options) {
  const auto sel = detail::make_selection(log.header, options.sample_indices);
  const double t_dcs = detail::t_dcs_for(log.header, options.delay);

  std::map<std::uint16_t, Accum> acc;
  auto touch = [&](std::uint16_t id) -> Accum& {
    auto [it, inserted] = acc.try_emplace(id);
    if (inserted) {
      it->second.m.device_id = id;
      it->second.t_fdr = detail::t_fdr_for(log.header, options.delay, id);
    }
    return it->second;
  };
  for (const auto& [id, _] : log.header.t_fdr_ms) touch(id);

  MetricsSummary out;
  out.integrity.malformed_lines = log.malformed_lines;
  std::map<std::pair<std::uint16_t, std::uint64_t>, ByteCoverage> coverage;
  std::set<std::pair<std::uint16_t, std::uint32_t>> seen;

  for (const auto& r : log.records) {
    if (r.direction != Direction::kUplink) continue;
    auto& a = touch(r.device_id);

    bool delivering = false;
    if (r.payload_bytes > 0)
      delivering = coverage[{r.device_id, r.conn_id}].add(r.seq_begin, r.seq_begin + r.payload_bytes);

    const auto slot = sel.slot_of(r.wall_time_us);
    if (!slot) {
      ++out.integrity.outside_population;
    } else if (sel.selected[*slot]) {
      const auto n = r.wire_bytes();
      a.m.bytes.total += n;
      if (r.retx == tcplite::RetxClass::kFirst) a.m.bytes.first += n;
      else if (r.retx == tcplite::RetxClass::kRtoRetx) a.m.bytes.rto_retx += n;
      else a.m.bytes.fast_retx += n;
      if (delivering) a.m.delivering_bytes += n;
    }

    for (const auto& fc : r.frame_complete) {
      if (!seen.emplace(r.device_id, fc.frame_seq).second) {
        ++out.integrity.duplicate_frames;
        continue;
      }
      const std::int64_t ts_us = fc.frame_timestamp_ms * 1000;
      const double t_ci = static_cast<double>(fc.arrival_time_us - ts_us) / 1000.0 - a.t_fdr;
      if (t_ci < -log.header.skew_bound_ms) {
        ++out.integrity.flagged_delays;
        continue;
      }
      const auto fslot = sel.slot_of(ts_us);
      if (fslot && sel.selected[*fslot]) {
        ++a.m.frames;
        a.delay_sum += t_ci;
        if (t_ci > a.delay_max) a.delay_max = t_ci;
      }
    }
  }

  out.population_slots = sel.n_slots;
  out.selected_slots = sel.n_selected;
  for (auto& [id, a] : acc) {
    auto& m = a.m;
    m.avg_throughput_kbps = sel.n_selected == 0 ? 0.0
                                                : static_cast<double>(m.delivering_bytes) * 8.0 / 1000.0 /
                                                      static_cast<double>(sel.n_selected);
    if (m.frames == 0) {
      m.avg_delay_ms = std::numeric_limits<double>::quiet_NaN();
      m.max_delay_ms = std::numeric_limits<double>::quiet_NaN();
    } else {
      m.avg_delay_ms = a.delay_sum / static_cast<double>(m.frames);
      m.max_delay_ms = a.delay_max;
    }
    m.avg_ete_ms = m.avg_delay_ms + a.t_fdr + t_dcs;
    m.retx_pct = detail::pct(m.bytes.rto_retx, m.bytes.total);
    m.fast_retx_pct = detail::pct(m.bytes.fast_retx, m.bytes.total);
    m.wasted_bw_pct = detail::pct(m.bytes.rto_retx + m.bytes.fast_retx, m.bytes.total);
    out.devices.push_back(m);
  }
  return out;
}

}  // namespace wams::analyzer::reference
