#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wams/fdr.hpp"
#include "wams/simnet.hpp"
#include "wams/tcplite.hpp"

namespace wams {

class ScenarioError : public std::invalid_argument {
 public:
  explicit ScenarioError(const std::string& what) : std::invalid_argument(what) {}
};

struct DeviceSpec {
  fdr::FdrConfig fdr;
  sim::ChannelParams uplink;
  sim::ChannelParams downlink;
};

struct Outage {
  double start_s = 0.0;  // relative to the first frame instant
  double end_s = 0.0;
};

/// A complete simulation experiment.
struct Scenario {
  std::string name;
  std::uint64_t seed = 1;
  double duration_s = 60.0;
  double warmup_s = 1.0;  // connection setup time before the first frame instant
  double drain_s = 30.0;  // time after the last frame instant for in-flight data
  std::int64_t epoch_utc_ms = 1'700'000'000'000;
  double t_dcs_ms = 0.0;
  double dcs_clock_skew_ms = 0.0;
  tcplite::TransportConfig transport;
  std::vector<DeviceSpec> devices;
  std::optional<Outage> dcs_outage;

  void validate() const;
};

/// Flat `key = value` text with `[channel]`, `[downlink]`, `[signal]` and
/// `[device N]` sections. `#` starts a comment.
Scenario parse_scenario(std::istream& in, const std::string& name = "scenario");
Scenario load_scenario_file(const std::string& path);

}  // namespace wams
