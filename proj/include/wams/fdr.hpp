#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "wams/frame.hpp"
#include "wams/simnet.hpp"
#include "wams/tcplite.hpp"

namespace wams::fdr {

inline constexpr std::int64_t kReportingIntervalMs = 100;  // 10 frames per second

struct Disturbance {
  std::int64_t start_utc_ms = 0;
  double step_hz = 0.0;
  double tau_s = 1.0;
};

struct SignalModel {
  double f_nominal_hz = 50.0;
  double f_wander_amp_hz = 0.0;
  double f_wander_period_s = 600.0;
  double noise_sigma_hz = 0.0;
  double v_nominal_pu = 1.0;
  double v_noise_sigma_pu = 0.0;
  std::vector<Disturbance> disturbances;

  void validate() const;
};

/// Noise-free frequency: nominal + wander + decaying disturbance steps.
double deterministic_frequency(const SignalModel& model, std::int64_t t_utc_ms);

/// Stateful measurement synthesizer for one device. The voltage angle
/// integrates the frequency deviation between consecutive reports.
class MeasurementSynth {
 public:
  MeasurementSynth(SignalModel model, std::uint16_t device_id, sim::Rng rng);

  /// `t_utc_ms` must lie on the 100 ms grid; frame_seq increments per call.
  FdrFrame next_measurement(std::int64_t t_utc_ms);

  std::uint32_t frames_generated() const noexcept { return next_seq_; }

 private:
  SignalModel model_;
  std::uint16_t device_id_;
  sim::Rng rng_;
  std::uint32_t next_seq_ = 0;
  double angle_deg_ = 0.0;
  std::optional<std::int64_t> last_t_ms_;
};

struct FdrConfig {
  std::uint16_t device_id = 1;
  double t_fdr_ms = 0.0;  // fixed processing delay before a frame hits the wire
  double p_seg = 0.15;    // probability a frame is split over two segments
  SignalModel signal;
  double reconnect_initial_ms = 1000.0;
  double reconnect_max_ms = 8000.0;
  int max_connect_attempts = 10;  // consecutive failures before going offline

  void validate() const;
};

struct DeviceStats {
  std::uint64_t frames_generated = 0;
  std::uint64_t frames_offered = 0;  // handed to the transport
  std::uint64_t frames_dropped = 0;  // generated while not connected
  std::uint64_t connections_opened = 0;
  std::uint64_t connect_failures = 0;
  std::uint64_t resets = 0;
  bool offline = false;
};

/// Simulated FDR client. Streams frames on the UTC 100 ms grid over a
/// tcplite connection and reconnects with exponential backoff. Frames
/// generated while disconnected are dropped, never buffered.
class SimDevice {
 public:
  /// Puts a segment on the uplink for connection `conn_id`.
  using Transmit = std::function<void(std::uint16_t device_id, std::uint64_t conn_id, const tcplite::Segment&)>;
  using ConnIdSource = std::function<std::uint64_t()>;

  SimDevice(FdrConfig config, tcplite::TransportConfig transport, sim::EventLoop& loop, Transmit transmit,
            ConnIdSource next_conn_id, std::int64_t epoch_utc_ms, std::uint64_t seed);

  /// Opens the connection now and schedules frame instants in
  /// [stream_begin, stream_end), both on the 100 ms grid.
  void start(sim::SimTime stream_begin, sim::SimTime stream_end);

  /// Inbound segment from the downlink.
  void deliver(std::uint64_t conn_id, const tcplite::Segment& seg);

  const DeviceStats& stats() const noexcept { return stats_; }
  const FdrConfig& config() const noexcept { return config_; }
  const tcplite::Connection* connection() const noexcept { return conn_.get(); }
  /// Per-class transport totals across every connection this device used.
  tcplite::ConnectionStats transport_totals() const;

 private:
  void connect();
  void schedule_reconnect();
  void on_frame_tick(sim::SimTime t);
  void send_frame(const FdrFrame& frame);
  void apply(const tcplite::Actions& actions);

  FdrConfig config_;
  tcplite::TransportConfig transport_;
  sim::EventLoop& loop_;
  Transmit transmit_;
  ConnIdSource next_conn_id_;
  std::int64_t epoch_utc_ms_;
  MeasurementSynth synth_;
  sim::Rng rng_;
  std::unique_ptr<tcplite::Connection> conn_;
  std::uint64_t conn_id_ = 0;
  std::optional<sim::EventId> timer_event_;
  double backoff_ms_;
  int consecutive_failures_ = 0;
  sim::SimTime stream_end_ = 0;
  DeviceStats stats_;
  tcplite::ConnectionStats retired_;
};

}  // namespace wams::fdr
