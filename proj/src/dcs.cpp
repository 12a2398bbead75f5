#include "wams/dcs.hpp"

#include <algorithm>

namespace wams::dcs {

IntegrityStats& IntegrityStats::operator+=(const IntegrityStats& o) {
  crc_failures += o.crc_failures;
  framing_errors += o.framing_errors;
  duplicate_frames += o.duplicate_frames;
  rsts_sent += o.rsts_sent;
  refused_connections += o.refused_connections;
  return *this;
}

std::vector<FrameAssembler::Completed> FrameAssembler::ingest_bytes(std::span<const std::uint8_t> bytes,
                                                                    std::int64_t now_us) {
  std::vector<Completed> out;
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());

  std::size_t pos = 0;
  while (buffer_.size() - pos >= wire::kFrameBytes) {
    try {
      FdrFrame frame = decode_frame(std::span(buffer_).subspan(pos, wire::kFrameBytes));
      last_device_ = frame.device_id;
      out.push_back(Completed{frame, now_us});
      pos += wire::kFrameBytes;
      continue;
    } catch (const DecodeError& e) {
      if (e.kind() == DecodeError::Kind::kChecksum) ++integrity_.crc_failures;
    }
    // resynchronize on the next magic prefix
    std::size_t next = pos + 1;
    while (next < buffer_.size()) {
      if (buffer_[next] == (wire::kMagic >> 8) &&
          (next + 1 == buffer_.size() || buffer_[next + 1] == (wire::kMagic & 0xFF)))
        break;
      ++next;
    }
    integrity_.framing_errors += next - pos;
    pos = next;
  }
  buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(pos));
  return out;
}

bool MeasurementStore::add(const MeasurementRow& row) {
  if (!seen_.emplace(row.device_id, row.frame_seq).second) {
    ++duplicates_;
    return false;
  }
  rows_.push_back(row);
  return true;
}

MeasurementRow make_row(const FdrFrame& f, std::uint64_t conn_id, std::int64_t arrival_time_us) {
  MeasurementRow r;
  r.device_id = f.device_id;
  r.conn_id = conn_id;
  r.frame_seq = f.frame_seq;
  r.frame_timestamp_ms = f.utc_timestamp_ms;
  r.arrival_time_us = arrival_time_us;
  r.frequency_hz = f.frequency_hz;
  r.voltage_mag_pu = f.voltage_mag_pu;
  r.voltage_angle_deg = f.voltage_angle_deg;
  r.status = f.status;
  return r;
}

SimDcs::SimDcs(tcplite::TransportConfig transport, sim::EventLoop& loop, Transmit downlink, std::int64_t epoch_utc_ms,
               std::uint64_t seed, double clock_skew_ms)
    : transport_(transport),
      loop_(loop),
      downlink_(std::move(downlink)),
      epoch_utc_ms_(epoch_utc_ms),
      rng_(sim::make_rng(seed, 0xDC5, 0)),
      skew_us_(sim::ms_to_us(clock_skew_ms)) {
  transport_.validate();
}

std::int64_t SimDcs::wall_us() const { return epoch_utc_ms_ * sim::kUsPerMs + loop_.now() + skew_us_; }

IntegrityStats SimDcs::integrity() const {
  IntegrityStats total = integrity_;
  for (const auto& [id, peer] : conns_) total += peer.assembler.integrity();
  total.duplicate_frames = store_.duplicates();
  return total;
}

void SimDcs::set_down(bool down) {
  if (down && !down_) {
    for (auto& [id, peer] : conns_) {
      if (peer.timer) loop_.cancel(*peer.timer);
      integrity_ += peer.assembler.integrity();
    }
    conns_.clear();
  }
  down_ = down;
}

void SimDcs::send_down(std::uint16_t device_id, std::uint64_t conn_id, const tcplite::Segment& seg) {
  CaptureRecord rec;
  rec.wall_time_us = wall_us();
  rec.device_id = device_id;
  rec.conn_id = conn_id;
  rec.direction = Direction::kAck;
  rec.seq_begin = seg.seq;
  rec.seq_end = seg.seq + seg.seq_len();
  rec.payload_bytes = static_cast<std::uint32_t>(seg.payload.size());
  rec.retx = seg.retx;
  capture_.push_back(std::move(rec));
  downlink_(device_id, conn_id, seg);
}

void SimDcs::apply(std::uint64_t conn_id, Peer& peer, const tcplite::Actions& a, CaptureRecord* uplink) {
  if (!a.delivered.empty()) {
    const auto now = wall_us();
    for (const auto& done : peer.assembler.ingest_bytes(a.delivered, now)) {
      if (uplink)
        uplink->frame_complete.push_back(
            FrameCompletion{done.frame.frame_seq, done.frame.utc_timestamp_ms, done.arrival_time_us});
      store_.add(make_row(done.frame, conn_id, done.arrival_time_us));
    }
  }
  if (uplink) capture_.push_back(std::move(*uplink));
  const auto device_id = peer.device_id;
  for (const auto& seg : a.transmit) send_down(device_id, conn_id, seg);

  switch (a.timer) {
    case tcplite::Actions::Timer::kUnchanged: break;
    case tcplite::Actions::Timer::kDisarm:
      if (peer.timer) loop_.cancel(*peer.timer);
      peer.timer.reset();
      break;
    case tcplite::Actions::Timer::kArm:
      if (peer.timer) loop_.cancel(*peer.timer);
      peer.timer = loop_.schedule(a.timer_deadline, [this, conn_id] {
        auto it = conns_.find(conn_id);
        if (it == conns_.end()) return;
        it->second.timer.reset();
        apply(conn_id, it->second, it->second.conn->on_rto(loop_.now()), nullptr);
      });
      break;
  }
  if (a.reset || a.failed) {
    auto it = conns_.find(conn_id);
    if (it != conns_.end()) {
      if (it->second.timer) loop_.cancel(*it->second.timer);
      integrity_ += it->second.assembler.integrity();
      conns_.erase(it);
    }
  }
}

void SimDcs::receive(std::uint16_t device_id, std::uint64_t conn_id, const tcplite::Segment& seg) {
  if (down_) return;

  CaptureRecord rec;
  rec.wall_time_us = wall_us();
  rec.device_id = device_id;
  rec.conn_id = conn_id;
  rec.direction = Direction::kUplink;
  rec.seq_begin = seg.seq;
  rec.seq_end = seg.seq + seg.seq_len();
  rec.payload_bytes = static_cast<std::uint32_t>(seg.payload.size());
  rec.retx = seg.retx;

  auto it = conns_.find(conn_id);
  if (it == conns_.end()) {
    capture_.push_back(rec);
    if (seg.has(tcplite::flag::kSyn) && !seg.has(tcplite::flag::kAck)) {
      const std::uint64_t isn = rng_() & 0xFFFFFFFFu;
      Peer peer{device_id, std::make_unique<tcplite::Connection>(transport_, isn), {}, {}};
      auto [pos, _] = conns_.emplace(conn_id, std::move(peer));
      apply(conn_id, pos->second, pos->second.conn->accept(seg, loop_.now()), nullptr);
    } else if (!seg.has(tcplite::flag::kRst)) {
      tcplite::Segment rst;
      rst.seq = seg.ack;
      rst.flags = tcplite::flag::kRst;
      ++integrity_.rsts_sent;
      send_down(device_id, conn_id, rst);
    }
    return;
  }
  apply(conn_id, it->second, it->second.conn->on_segment(seg, loop_.now()), &rec);
}

}  // namespace wams::dcs
