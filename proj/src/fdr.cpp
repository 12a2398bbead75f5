#include "wams/fdr.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

namespace wams::fdr {

void SignalModel::validate() const {
  if (!(f_nominal_hz > 0)) throw std::invalid_argument("signal.f_nominal must be > 0");
  if (!(noise_sigma_hz >= 0)) throw std::invalid_argument("signal.noise_sigma must be >= 0");
  if (!(v_noise_sigma_pu >= 0)) throw std::invalid_argument("signal.v_noise_sigma must be >= 0");
  if (!(v_nominal_pu >= 0)) throw std::invalid_argument("signal.v_nominal must be >= 0");
  if (f_wander_amp_hz != 0 && !(f_wander_period_s > 0))
    throw std::invalid_argument("signal.f_wander_period_s must be > 0");
  for (const auto& d : disturbances)
    if (!(d.tau_s > 0)) throw std::invalid_argument("disturbance time constant must be > 0");
}

double deterministic_frequency(const SignalModel& m, std::int64_t t_utc_ms) {
  double f = m.f_nominal_hz;
  if (m.f_wander_amp_hz != 0) {
    const double period_ms = m.f_wander_period_s * 1000.0;
    const double phase = std::fmod(static_cast<double>(t_utc_ms), period_ms) / period_ms;
    f += m.f_wander_amp_hz * std::sin(2.0 * std::numbers::pi * phase);
  }
  for (const auto& d : m.disturbances) {
    if (t_utc_ms < d.start_utc_ms) continue;
    const double elapsed_s = static_cast<double>(t_utc_ms - d.start_utc_ms) / 1000.0;
    f += d.step_hz * std::exp(-elapsed_s / d.tau_s);
  }
  return f;
}

MeasurementSynth::MeasurementSynth(SignalModel model, std::uint16_t device_id, sim::Rng rng)
    : model_(std::move(model)), device_id_(device_id), rng_(std::move(rng)) {
  model_.validate();
}

FdrFrame MeasurementSynth::next_measurement(std::int64_t t_utc_ms) {
  FdrFrame f;
  f.device_id = device_id_;
  f.frame_seq = next_seq_++;
  f.utc_timestamp_ms = t_utc_ms;
  double freq = deterministic_frequency(model_, t_utc_ms);
  if (model_.noise_sigma_hz > 0) freq += std::normal_distribution<double>(0.0, model_.noise_sigma_hz)(rng_);
  f.frequency_hz = freq;
  double v = model_.v_nominal_pu;
  if (model_.v_noise_sigma_pu > 0) v += std::normal_distribution<double>(0.0, model_.v_noise_sigma_pu)(rng_);
  f.voltage_mag_pu = std::max(0.0, v);
  if (last_t_ms_) {
    const double dt_s = static_cast<double>(t_utc_ms - *last_t_ms_) / 1000.0;
    angle_deg_ = normalize_angle_deg(angle_deg_ + 360.0 * (freq - model_.f_nominal_hz) * dt_s);
  }
  last_t_ms_ = t_utc_ms;
  f.voltage_angle_deg = angle_deg_;
  return f;
}

void FdrConfig::validate() const {
  if (!(t_fdr_ms >= 0)) throw std::invalid_argument(fmt::format("device {}: t_fdr_ms must be >= 0", device_id));
  if (!(p_seg >= 0 && p_seg <= 1)) throw std::invalid_argument(fmt::format("device {}: p_seg must lie in [0, 1]", device_id));
  if (!(reconnect_initial_ms > 0) || reconnect_max_ms < reconnect_initial_ms)
    throw std::invalid_argument(fmt::format("device {}: bad reconnect backoff", device_id));
  if (max_connect_attempts < 1) throw std::invalid_argument(fmt::format("device {}: max_connect_attempts must be >= 1", device_id));
  signal.validate();
}

SimDevice::SimDevice(FdrConfig config, tcplite::TransportConfig transport, sim::EventLoop& loop, Transmit transmit,
                     ConnIdSource next_conn_id, std::int64_t epoch_utc_ms, std::uint64_t seed)
    : config_(std::move(config)),
      transport_(transport),
      loop_(loop),
      transmit_(std::move(transmit)),
      next_conn_id_(std::move(next_conn_id)),
      epoch_utc_ms_(epoch_utc_ms),
      synth_(config_.signal, config_.device_id, sim::make_rng(seed, config_.device_id, 1)),
      rng_(sim::make_rng(seed, config_.device_id, 2)),
      backoff_ms_(config_.reconnect_initial_ms) {
  config_.validate();
}

tcplite::ConnectionStats SimDevice::transport_totals() const {
  auto total = retired_;
  if (conn_) total += conn_->stats();
  return total;
}

void SimDevice::start(sim::SimTime stream_begin, sim::SimTime stream_end) {
  stream_end_ = stream_end;
  connect();
  if (stream_begin < stream_end)
    loop_.schedule(stream_begin, [this, stream_begin] { on_frame_tick(stream_begin); });
}

void SimDevice::connect() {
  if (conn_) retired_ += conn_->stats();
  conn_id_ = next_conn_id_();
  const std::uint64_t isn = rng_() & 0xFFFFFFFFu;
  conn_ = std::make_unique<tcplite::Connection>(transport_, isn);
  apply(conn_->open(loop_.now()));
}

void SimDevice::schedule_reconnect() {
  if (stats_.offline) return;
  if (consecutive_failures_ >= config_.max_connect_attempts) {
    stats_.offline = true;
    return;
  }
  const auto delay = sim::ms_to_us(backoff_ms_);
  backoff_ms_ = std::min(backoff_ms_ * 2.0, config_.reconnect_max_ms);
  loop_.schedule_in(delay, [this] {
    if (loop_.now() < stream_end_) connect();
  });
}

void SimDevice::apply(const tcplite::Actions& a) {
  for (const auto& seg : a.transmit) transmit_(config_.device_id, conn_id_, seg);
  switch (a.timer) {
    case tcplite::Actions::Timer::kUnchanged: break;
    case tcplite::Actions::Timer::kDisarm:
      if (timer_event_) loop_.cancel(*timer_event_);
      timer_event_.reset();
      break;
    case tcplite::Actions::Timer::kArm: {
      if (timer_event_) loop_.cancel(*timer_event_);
      auto* conn = conn_.get();
      timer_event_ = loop_.schedule(a.timer_deadline, [this, conn] {
        timer_event_.reset();
        if (conn_.get() == conn) apply(conn->on_rto(loop_.now()));
      });
      break;
    }
  }
  if (a.established) {
    ++stats_.connections_opened;
    consecutive_failures_ = 0;
    backoff_ms_ = config_.reconnect_initial_ms;
  }
  if (a.failed) {
    ++stats_.connect_failures;
    ++consecutive_failures_;
    schedule_reconnect();
  }
  if (a.reset) {
    ++stats_.resets;
    ++consecutive_failures_;
    schedule_reconnect();
  }
}

void SimDevice::deliver(std::uint64_t conn_id, const tcplite::Segment& seg) {
  if (!conn_ || conn_id != conn_id_) return;
  apply(conn_->on_segment(seg, loop_.now()));
}

void SimDevice::on_frame_tick(sim::SimTime t) {
  const std::int64_t utc_ms = epoch_utc_ms_ + t / sim::kUsPerMs;
  const FdrFrame frame = synth_.next_measurement(utc_ms);
  ++stats_.frames_generated;
  if (config_.t_fdr_ms > 0) loop_.schedule_in(sim::ms_to_us(config_.t_fdr_ms), [this, frame] { send_frame(frame); });
  else send_frame(frame);

  const sim::SimTime next = t + kReportingIntervalMs * sim::kUsPerMs;
  if (next < stream_end_) loop_.schedule(next, [this, next] { on_frame_tick(next); });
}

void SimDevice::send_frame(const FdrFrame& frame) {
  if (!conn_ || conn_->state() != tcplite::State::kEstablished) {
    ++stats_.frames_dropped;
    return;
  }
  const auto bytes = encode_frame(frame);
  const bool split = sim::uniform01(rng_) < config_.p_seg;
  ++stats_.frames_offered;
  apply(conn_->send(bytes, split, loop_.now()));
}

}  // namespace wams::fdr
