#include "wams/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace wams {
namespace {

struct Entry {
  std::string key;
  std::string value;
  int line;
};

struct Section {
  std::string name;
  int line = 0;
  std::vector<Entry> entries;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void fail(const Entry& e, const std::string& msg) {
  throw ScenarioError(fmt::format("line {}: {}: {}", e.line, e.key, msg));
}

double to_double(const Entry& e) {
  try {
    std::size_t used = 0;
    const double v = std::stod(e.value, &used);
    if (used != e.value.size() || !std::isfinite(v)) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    fail(e, fmt::format("expected a number, got '{}'", e.value));
  }
}

std::int64_t to_int(const Entry& e) {
  std::int64_t v = 0;
  const auto* end = e.value.data() + e.value.size();
  const auto [ptr, ec] = std::from_chars(e.value.data(), end, v);
  if (ec != std::errc{} || ptr != end) fail(e, fmt::format("expected an integer, got '{}'", e.value));
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

// Returns true if the key was a channel key.
bool apply_channel_key(sim::ChannelParams& ch, const std::string& key, const Entry& e) {
  if (key == "t_p_ms") ch.t_p_ms = to_double(e);
  else if (key == "r_ul_bps" || key == "rate_bps" || key == "r_dl_bps") ch.rate_bps = to_double(e);
  else if (key == "p_loss") ch.p_loss = to_double(e);
  else if (key == "jitter.kind") {
    try {
      ch.jitter.kind = sim::jitter_kind_from_string(e.value);
    } catch (const std::invalid_argument& ex) {
      fail(e, ex.what());
    }
  } else if (key == "jitter.median_ms" || key == "jitter.mean_ms" || key == "jitter.value_ms")
    ch.jitter.scale_ms = to_double(e);
  else if (key == "jitter.sigma") ch.jitter.sigma = to_double(e);
  else if (key == "jitter.cap_ms") ch.jitter.cap_ms = to_double(e);
  else return false;
  return true;
}

bool apply_signal_key(fdr::SignalModel& s, const std::string& key, const Entry& e, std::int64_t stream_start_utc_ms) {
  if (key == "f_nominal") s.f_nominal_hz = to_double(e);
  else if (key == "f_wander_amp") s.f_wander_amp_hz = to_double(e);
  else if (key == "f_wander_period_s") s.f_wander_period_s = to_double(e);
  else if (key == "noise_sigma") s.noise_sigma_hz = to_double(e);
  else if (key == "v_nominal") s.v_nominal_pu = to_double(e);
  else if (key == "v_noise_sigma") s.v_noise_sigma_pu = to_double(e);
  else if (key == "disturbance") {
    const auto parts = split_list(e.value);
    if (parts.size() != 3) fail(e, "expected 'start_s, step_hz, tau_s'");
    fdr::Disturbance d;
    Entry sub = e;
    sub.value = parts[0];
    d.start_utc_ms = stream_start_utc_ms + static_cast<std::int64_t>(std::llround(to_double(sub) * 1000.0));
    sub.value = parts[1];
    d.step_hz = to_double(sub);
    sub.value = parts[2];
    d.tau_s = to_double(sub);
    s.disturbances.push_back(d);
  } else return false;
  return true;
}

bool apply_fdr_key(fdr::FdrConfig& f, const std::string& key, const Entry& e) {
  if (key == "t_fdr_ms") f.t_fdr_ms = to_double(e);
  else if (key == "p_seg") f.p_seg = to_double(e);
  else if (key == "reconnect_initial_ms") f.reconnect_initial_ms = to_double(e);
  else if (key == "reconnect_max_ms") f.reconnect_max_ms = to_double(e);
  else if (key == "max_connect_attempts") f.max_connect_attempts = static_cast<int>(to_int(e));
  else return false;
  return true;
}

}  // namespace

void Scenario::validate() const {
  if (!(duration_s > 0)) throw ScenarioError(fmt::format("duration_s must be > 0, got {}", duration_s));
  if (!(warmup_s >= 0) || !(drain_s >= 0)) throw ScenarioError("warmup_s and drain_s must be >= 0");
  const auto warmup_ms = std::llround(warmup_s * 1000.0);
  if (warmup_ms % fdr::kReportingIntervalMs != 0 || (epoch_utc_ms % fdr::kReportingIntervalMs) != 0)
    throw ScenarioError("warmup_s and epoch_utc_ms must keep frame instants on the 100 ms grid");
  if (devices.empty()) throw ScenarioError("devices: at least one device is required");
  if (!(t_dcs_ms >= 0)) throw ScenarioError("t_dcs_ms must be >= 0");
  try {
    transport.validate();
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(fmt::format("transport: {}", e.what()));
  }
  std::set<std::uint16_t> ids;
  for (const auto& d : devices) {
    if (!ids.insert(d.fdr.device_id).second)
      throw ScenarioError(fmt::format("devices: duplicate device id {}", d.fdr.device_id));
    try {
      d.fdr.validate();
      d.uplink.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(fmt::format("device {}: {}", d.fdr.device_id, e.what()));
    }
    try {
      d.downlink.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(fmt::format("device {}: downlink: {}", d.fdr.device_id, e.what()));
    }
  }
  if (dcs_outage && !(dcs_outage->end_s > dcs_outage->start_s && dcs_outage->start_s >= 0))
    throw ScenarioError("dcs_outage_s must be 'start, end' with 0 <= start < end");
}

Scenario parse_scenario(std::istream& in, const std::string& name) {
  std::vector<Section> sections{Section{"", 0, {}}};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ScenarioError(fmt::format("line {}: unterminated section header", line_no));
      sections.push_back(Section{trim(line.substr(1, line.size() - 2)), line_no, {}});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ScenarioError(fmt::format("line {}: expected 'key = value'", line_no));
    sections.back().entries.push_back(Entry{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no});
  }

  Scenario sc;
  sc.name = name;
  std::vector<std::uint16_t> device_ids;
  fdr::FdrConfig fdr_defaults;
  for (const auto& e : sections.front().entries) {
    if (e.key == "seed") sc.seed = static_cast<std::uint64_t>(to_int(e));
    else if (e.key == "duration_s") sc.duration_s = to_double(e);
    else if (e.key == "warmup_s") sc.warmup_s = to_double(e);
    else if (e.key == "drain_s") sc.drain_s = to_double(e);
    else if (e.key == "epoch_utc_ms") sc.epoch_utc_ms = to_int(e);
    else if (e.key == "t_dcs_ms") sc.t_dcs_ms = to_double(e);
    else if (e.key == "dcs_clock_skew_ms") sc.dcs_clock_skew_ms = to_double(e);
    else if (e.key == "min_rto_ms") sc.transport.min_rto_ms = to_double(e);
    else if (e.key == "max_rto_ms") sc.transport.max_rto_ms = to_double(e);
    else if (e.key == "initial_rto_ms") sc.transport.initial_rto_ms = to_double(e);
    else if (e.key == "mss") sc.transport.mss = static_cast<std::size_t>(to_int(e));
    else if (e.key == "split_at") sc.transport.split_at = static_cast<std::size_t>(to_int(e));
    else if (e.key == "max_retransmits") sc.transport.max_retransmits = static_cast<int>(to_int(e));
    else if (e.key == "syn_retries") sc.transport.syn_retries = static_cast<int>(to_int(e));
    else if (e.key == "dcs_outage_s") {
      const auto parts = split_list(e.value);
      if (parts.size() != 2) fail(e, "expected 'start_s, end_s'");
      Entry a = e, b = e;
      a.value = parts[0];
      b.value = parts[1];
      sc.dcs_outage = Outage{to_double(a), to_double(b)};
    } else if (e.key == "devices") {
      const auto parts = split_list(e.value);
      if (parts.size() == 1) {
        const auto n = to_int(e);
        if (n < 1 || n > 65535) fail(e, "device count must lie in [1, 65535]");
        for (std::int64_t i = 1; i <= n; ++i) device_ids.push_back(static_cast<std::uint16_t>(i));
      } else {
        for (const auto& p : parts) {
          Entry item = e;
          item.value = p;
          const auto id = to_int(item);
          if (id < 0 || id > 65535) fail(e, fmt::format("device id {} outside [0, 65535]", id));
          device_ids.push_back(static_cast<std::uint16_t>(id));
        }
      }
    } else if (!apply_fdr_key(fdr_defaults, e.key, e)) {
      fail(e, "unknown key");
    }
  }
  if (device_ids.empty()) throw ScenarioError("devices: key is required");

  const std::int64_t stream_start_utc_ms = sc.epoch_utc_ms + std::llround(sc.warmup_s * 1000.0);
  sim::ChannelParams uplink;
  std::optional<const Section*> downlink_section;
  for (std::size_t i = 1; i < sections.size(); ++i) {
    const auto& s = sections[i];
    if (s.name == "channel") {
      for (const auto& e : s.entries)
        if (!apply_channel_key(uplink, e.key, e)) fail(e, "unknown channel key");
    } else if (s.name == "signal") {
      for (const auto& e : s.entries)
        if (!apply_signal_key(fdr_defaults.signal, e.key, e, stream_start_utc_ms)) fail(e, "unknown signal key");
    } else if (s.name == "downlink") {
      downlink_section = &s;
    } else if (s.name.rfind("device", 0) != 0) {
      throw ScenarioError(fmt::format("line {}: unknown section [{}]", s.line, s.name));
    }
  }
  sim::ChannelParams downlink = uplink;
  downlink.rate_bps = 7.2e6;
  if (downlink_section)
    for (const auto& e : (*downlink_section)->entries)
      if (!apply_channel_key(downlink, e.key, e)) fail(e, "unknown downlink key");

  std::map<std::uint16_t, std::size_t> index;
  for (auto id : device_ids) {
    if (index.count(id)) throw ScenarioError(fmt::format("devices: duplicate device id {}", id));
    index[id] = sc.devices.size();
    DeviceSpec d{fdr_defaults, uplink, downlink};
    d.fdr.device_id = id;
    sc.devices.push_back(std::move(d));
  }

  for (std::size_t i = 1; i < sections.size(); ++i) {
    const auto& s = sections[i];
    if (s.name.rfind("device", 0) != 0) continue;
    Entry id_entry{"device section", trim(s.name.substr(6)), s.line};
    const auto id = to_int(id_entry);
    auto it = index.find(static_cast<std::uint16_t>(id));
    if (id < 0 || id > 65535 || it == index.end())
      throw ScenarioError(fmt::format("line {}: [device {}] is not listed in 'devices'", s.line, id));
    auto& d = sc.devices[it->second];
    for (const auto& e : s.entries) {
      if (e.key.rfind("downlink.", 0) == 0) {
        if (!apply_channel_key(d.downlink, e.key.substr(9), e)) fail(e, "unknown downlink key");
      } else if (e.key.rfind("signal.", 0) == 0) {
        if (!apply_signal_key(d.fdr.signal, e.key.substr(7), e, stream_start_utc_ms)) fail(e, "unknown signal key");
      } else if (!apply_channel_key(d.uplink, e.key, e) && !apply_fdr_key(d.fdr, e.key, e)) {
        fail(e, "unknown device key");
      }
    }
  }
  sc.validate();
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(fmt::format("cannot open scenario file '{}'", path));
  auto name = path;
  if (const auto slash = name.find_last_of('/'); slash != std::string::npos) name = name.substr(slash + 1);
  return parse_scenario(in, name);
}

}  // namespace wams
