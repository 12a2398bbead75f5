#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace wams::sim {

/// Simulation time in integer microseconds since simulation start.
using SimTime = std::int64_t;
inline constexpr SimTime kUsPerMs = 1000;
inline constexpr SimTime kUsPerSec = 1'000'000;

constexpr SimTime ms_to_us(double ms) { return static_cast<SimTime>(ms * kUsPerMs + (ms >= 0 ? 0.5 : -0.5)); }

using Rng = std::mt19937_64;

/// Independent deterministic stream derived from a master seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

class SchedulingError : public std::logic_error {
  using std::logic_error::logic_error;
};

using EventId = std::uint64_t;

/// Discrete-event core. Events with equal fire time dispatch in insertion order.
class EventLoop {
 public:
  SimTime now() const noexcept { return now_; }

  EventId schedule(SimTime fire_time, std::function<void()> action);
  EventId schedule_in(SimTime delay, std::function<void()> action) { return schedule(now_ + delay, std::move(action)); }

  /// Returns false if the id already fired, was canceled, or never existed.
  bool cancel(EventId id);

  /// Processes every event with fire_time <= t_end, then sets the clock to t_end.
  std::size_t run_until(SimTime t_end);

  std::size_t pending() const noexcept { return queue_.size() - canceled_.size(); }

 private:
  struct Event {
    SimTime fire_time;
    std::uint64_t insertion_seq;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.fire_time != b.fire_time) return a.fire_time > b.fire_time;
      return a.insertion_seq > b.insertion_seq;
    }
  };

  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_set<EventId> live_;
  std::unordered_set<EventId> canceled_;
};

enum class JitterKind { kNone, kConstant, kExponential, kLognormal };

std::string to_string(JitterKind kind);
JitterKind jitter_kind_from_string(const std::string& name);

/// Random delay added to every segment. `scale_ms` is the constant value,
/// the exponential mean, or the lognormal median depending on `kind`.
/// Samples are truncated (not clamped) to [0, cap_ms].
struct JitterSpec {
  JitterKind kind = JitterKind::kNone;
  double scale_ms = 0.0;
  double sigma = 0.0;
  double cap_ms = 1000.0;
};

/// Aggregate one-direction channel: propagation, serialization, jitter and
/// i.i.d. loss.
struct ChannelParams {
  double t_p_ms = 0.0;
  double rate_bps = 384000.0;
  JitterSpec jitter;
  double p_loss = 0.0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

double sample_jitter_ms(const JitterSpec& jitter, Rng& rng);

/// t_p + 8 * len / rate + jitter, in milliseconds.
double transit_delay_ms(std::size_t len_bytes, const ChannelParams& params, Rng& rng);

/// transit_delay_ms rounded to the simulation time base.
SimTime transit_delay_us(std::size_t len_bytes, const ChannelParams& params, Rng& rng);

bool should_drop(const ChannelParams& params, Rng& rng);

}  // namespace wams::sim
