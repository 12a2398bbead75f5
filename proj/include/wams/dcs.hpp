#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "wams/capture.hpp"
#include "wams/frame.hpp"
#include "wams/simnet.hpp"
#include "wams/tcplite.hpp"

namespace wams::dcs {

struct IntegrityStats {
  std::uint64_t crc_failures = 0;
  std::uint64_t framing_errors = 0;  // bytes skipped while resynchronizing
  std::uint64_t duplicate_frames = 0;
  std::uint64_t rsts_sent = 0;
  std::uint64_t refused_connections = 0;

  IntegrityStats& operator+=(const IntegrityStats& o);
};

/// Reassembles 55-byte frames from an in-order byte stream. A frame's
/// arrival time is the `now` of the ingest call that supplied its last byte.
class FrameAssembler {
 public:
  struct Completed {
    FdrFrame frame;
    std::int64_t arrival_time_us;
  };

  std::vector<Completed> ingest_bytes(std::span<const std::uint8_t> bytes, std::int64_t now_us);

  std::size_t buffered() const noexcept { return buffer_.size(); }
  const IntegrityStats& integrity() const noexcept { return integrity_; }
  std::optional<std::uint16_t> last_device_id() const noexcept { return last_device_; }

 private:
  std::vector<std::uint8_t> buffer_;
  IntegrityStats integrity_;
  std::optional<std::uint16_t> last_device_;
};

/// Keeps the first copy of every (device_id, frame_seq).
class MeasurementStore {
 public:
  /// Returns false for a duplicate, which is counted and discarded.
  bool add(const MeasurementRow& row);

  const std::vector<MeasurementRow>& rows() const noexcept { return rows_; }
  std::uint64_t duplicates() const noexcept { return duplicates_; }

 private:
  std::vector<MeasurementRow> rows_;
  std::set<std::pair<std::uint16_t, std::uint32_t>> seen_;
  std::uint64_t duplicates_ = 0;
};

MeasurementRow make_row(const FdrFrame& frame, std::uint64_t conn_id, std::int64_t arrival_time_us);

/// Simulated data concentrator: one passive tcplite endpoint per device
/// connection, frame reassembly, and the DCS-side capture log.
class SimDcs {
 public:
  using Transmit = std::function<void(std::uint16_t device_id, std::uint64_t conn_id, const tcplite::Segment&)>;

  SimDcs(tcplite::TransportConfig transport, sim::EventLoop& loop, Transmit downlink, std::int64_t epoch_utc_ms,
         std::uint64_t seed, double clock_skew_ms = 0.0);

  /// Uplink segment arriving at the DCS interface.
  void receive(std::uint16_t device_id, std::uint64_t conn_id, const tcplite::Segment& seg);

  /// While down, arriving segments vanish; going down discards all
  /// connection state so peers get RST once service resumes.
  void set_down(bool down);
  bool down() const noexcept { return down_; }

  const std::vector<CaptureRecord>& capture() const noexcept { return capture_; }
  const MeasurementStore& store() const noexcept { return store_; }
  IntegrityStats integrity() const;
  std::size_t open_connections() const noexcept { return conns_.size(); }

 private:
  struct Peer {
    std::uint16_t device_id;
    std::unique_ptr<tcplite::Connection> conn;
    FrameAssembler assembler;
    std::optional<sim::EventId> timer;
  };

  std::int64_t wall_us() const;
  void apply(std::uint64_t conn_id, Peer& peer, const tcplite::Actions& actions, CaptureRecord* uplink);
  void send_down(std::uint16_t device_id, std::uint64_t conn_id, const tcplite::Segment& seg);

  tcplite::TransportConfig transport_;
  sim::EventLoop& loop_;
  Transmit downlink_;
  std::int64_t epoch_utc_ms_;
  sim::Rng rng_;
  sim::SimTime skew_us_;
  bool down_ = false;
  std::map<std::uint64_t, Peer> conns_;
  std::vector<CaptureRecord> capture_;
  MeasurementStore store_;
  IntegrityStats integrity_;
};

}  // namespace wams::dcs
