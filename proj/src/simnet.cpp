#include "wams/simnet.hpp"

#include <cmath>

#include <fmt/format.h>

namespace wams::sim {

Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(substream)};
  return Rng(seq);
}

EventId EventLoop::schedule(SimTime fire_time, std::function<void()> action) {
  if (fire_time < now_)
    throw SchedulingError(fmt::format("event at {} us is before now ({} us)", fire_time, now_));
  const EventId id = next_seq_++;
  queue_.push(Event{fire_time, id, std::move(action)});
  live_.insert(id);
  return id;
}

bool EventLoop::cancel(EventId id) {
  if (live_.erase(id) == 0) return false;
  canceled_.insert(id);
  return true;
}

std::size_t EventLoop::run_until(SimTime t_end) {
  if (t_end < now_) throw SchedulingError(fmt::format("run_until({}) is before now ({})", t_end, now_));
  std::size_t processed = 0;
  while (!queue_.empty() && queue_.top().fire_time <= t_end) {
    // priority_queue::top is const; the action is moved out before pop.
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    if (canceled_.erase(ev.insertion_seq) > 0) continue;
    live_.erase(ev.insertion_seq);
    now_ = ev.fire_time;
    ev.action();
    ++processed;
  }
  now_ = t_end;
  return processed;
}

std::string to_string(JitterKind kind) {
  switch (kind) {
    case JitterKind::kNone: return "none";
    case JitterKind::kConstant: return "constant";
    case JitterKind::kExponential: return "exponential";
    case JitterKind::kLognormal: return "lognormal";
  }
  return "none";
}

JitterKind jitter_kind_from_string(const std::string& name) {
  if (name == "none") return JitterKind::kNone;
  if (name == "constant") return JitterKind::kConstant;
  if (name == "exponential") return JitterKind::kExponential;
  if (name == "lognormal") return JitterKind::kLognormal;
  throw std::invalid_argument(
      fmt::format("unknown jitter kind '{}' (expected none, constant, exponential, lognormal)", name));
}

void ChannelParams::validate() const {
  if (!(t_p_ms >= 0)) throw std::invalid_argument(fmt::format("t_p_ms must be >= 0, got {}", t_p_ms));
  if (!(rate_bps > 0)) throw std::invalid_argument(fmt::format("rate_bps must be > 0, got {}", rate_bps));
  if (!(p_loss >= 0 && p_loss <= 1))
    throw std::invalid_argument(fmt::format("p_loss must lie in [0, 1], got {}", p_loss));
  if (!(jitter.cap_ms > 0)) throw std::invalid_argument(fmt::format("jitter.cap_ms must be > 0, got {}", jitter.cap_ms));
  switch (jitter.kind) {
    case JitterKind::kNone: break;
    case JitterKind::kConstant:
      if (!(jitter.scale_ms >= 0 && jitter.scale_ms <= jitter.cap_ms))
        throw std::invalid_argument("constant jitter must lie in [0, cap_ms]");
      break;
    case JitterKind::kExponential:
      if (!(jitter.scale_ms > 0)) throw std::invalid_argument("exponential jitter mean must be > 0");
      break;
    case JitterKind::kLognormal:
      if (!(jitter.scale_ms > 0)) throw std::invalid_argument("lognormal jitter median must be > 0");
      if (!(jitter.sigma > 0)) throw std::invalid_argument("lognormal jitter sigma must be > 0");
      // keeps rejection sampling acceptance >= 1/2
      if (jitter.cap_ms < jitter.scale_ms) throw std::invalid_argument("lognormal jitter cap_ms must be >= median");
      break;
  }
}

double sample_jitter_ms(const JitterSpec& j, Rng& rng) {
  switch (j.kind) {
    case JitterKind::kNone: return 0.0;
    case JitterKind::kConstant: return j.scale_ms;
    case JitterKind::kExponential: {
      // inverse CDF of the exponential truncated to [0, cap]
      const double mass = -std::expm1(-j.cap_ms / j.scale_ms);
      return -j.scale_ms * std::log1p(-uniform01(rng) * mass);
    }
    case JitterKind::kLognormal: {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (;;) {
        const double x = j.scale_ms * std::exp(j.sigma * normal(rng));
        if (x <= j.cap_ms) return x;
      }
    }
  }
  return 0.0;
}

double transit_delay_ms(std::size_t len_bytes, const ChannelParams& p, Rng& rng) {
  if (len_bytes == 0) throw std::invalid_argument("transit_delay requires len_bytes > 0");
  const double serialization_ms = 8.0 * static_cast<double>(len_bytes) / p.rate_bps * 1000.0;
  return p.t_p_ms + serialization_ms + sample_jitter_ms(p.jitter, rng);
}

SimTime transit_delay_us(std::size_t len_bytes, const ChannelParams& p, Rng& rng) {
  return static_cast<SimTime>(std::llround(transit_delay_ms(len_bytes, p, rng) * kUsPerMs));
}

bool should_drop(const ChannelParams& p, Rng& rng) {
  if (p.p_loss <= 0) return false;
  if (p.p_loss >= 1) return true;
  return uniform01(rng) < p.p_loss;
}

}  // namespace wams::sim
