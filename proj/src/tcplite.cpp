#include "wams/tcplite.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace wams::tcplite {

std::string_view to_string(State s) {
  switch (s) {
    case State::kClosed: return "CLOSED";
    case State::kSynSent: return "SYN_SENT";
    case State::kSynRcvd: return "SYN_RCVD";
    case State::kEstablished: return "ESTABLISHED";
  }
  return "CLOSED";
}

std::string_view to_string(RetxClass c) {
  switch (c) {
    case RetxClass::kFirst: return "FIRST";
    case RetxClass::kRtoRetx: return "RTO_RETX";
    case RetxClass::kFastRetx: return "FAST_RETX";
  }
  return "FIRST";
}

std::optional<RetxClass> retx_class_from_string(std::string_view s) {
  if (s == "FIRST") return RetxClass::kFirst;
  if (s == "RTO_RETX") return RetxClass::kRtoRetx;
  if (s == "FAST_RETX") return RetxClass::kFastRetx;
  return std::nullopt;
}

void TransportConfig::validate() const {
  if (!(min_rto_ms > 0)) throw std::invalid_argument("min_rto_ms must be > 0");
  if (!(max_rto_ms >= min_rto_ms)) throw std::invalid_argument("max_rto_ms must be >= min_rto_ms");
  if (!(initial_rto_ms > 0)) throw std::invalid_argument("initial_rto_ms must be > 0");
  if (!(alpha > 0 && alpha <= 1) || !(beta > 0 && beta <= 1))
    throw std::invalid_argument("alpha and beta must lie in (0, 1]");
  if (mss == 0) throw std::invalid_argument("mss must be > 0");
  if (split_at == 0) throw std::invalid_argument("split_at must be > 0");
  if (max_retransmits < 0 || syn_retries < 0) throw std::invalid_argument("retry limits must be >= 0");
}

Connection::Connection(TransportConfig config, std::uint64_t isn)
    : config_(config), isn_(isn), snd_una_(isn), snd_next_(isn), recover_(isn) {
  config_.validate();
  rto_ = std::clamp(config_.initial_rto_ms, config_.min_rto_ms, config_.max_rto_ms);
}

void Connection::emit(Actions& out, Segment seg) {
  ++stats_.segments_sent;
  out.transmit.push_back(std::move(seg));
}

void Connection::emit_pure_ack(Actions& out) {
  Segment ack;
  ack.seq = snd_next_;
  ack.ack = rcv_next_;
  ack.flags = flag::kAck;
  emit(out, std::move(ack));
}

void Connection::arm(Actions& out, SimTime deadline) {
  timer_deadline_ = deadline;
  out.timer = Actions::Timer::kArm;
  out.timer_deadline = deadline;
}

void Connection::disarm(Actions& out) {
  if (timer_deadline_) out.timer = Actions::Timer::kDisarm;
  timer_deadline_.reset();
}

void Connection::close(Actions& out) {
  state_ = State::kClosed;
  unacked_.clear();
  out_of_order_.clear();
  dup_ack_count_ = 0;
  disarm(out);
}

void Connection::queue_segment(Actions& out, Segment seg, SimTime now) {
  snd_next_ += seg.seq_len();
  unacked_.push_back(InFlight{seg, now});
  emit(out, std::move(seg));
  if (!timer_deadline_) arm(out, now + sim::ms_to_us(rto_));
}

Actions Connection::open(SimTime now) {
  if (state_ != State::kClosed) throw TransportError(fmt::format("open() in state {}", to_string(state_)));
  Actions out;
  state_ = State::kSynSent;
  Segment syn;
  syn.seq = isn_;
  syn.flags = flag::kSyn;
  queue_segment(out, std::move(syn), now);
  return out;
}

Actions Connection::accept(const Segment& syn, SimTime now) {
  if (state_ != State::kClosed) throw TransportError(fmt::format("accept() in state {}", to_string(state_)));
  if (!syn.has(flag::kSyn) || syn.has(flag::kAck)) throw TransportError("accept() requires a bare SYN");
  Actions out;
  state_ = State::kSynRcvd;
  rcv_next_ = syn.seq + 1;
  Segment synack;
  synack.seq = isn_;
  synack.ack = rcv_next_;
  synack.flags = flag::kSyn | flag::kAck;
  queue_segment(out, std::move(synack), now);
  return out;
}

Actions Connection::send(std::span<const std::uint8_t> payload, bool split, SimTime now) {
  if (state_ != State::kEstablished) throw TransportError(fmt::format("send() in state {}", to_string(state_)));
  if (payload.empty()) throw TransportError("send() with empty payload");
  Actions out;

  std::vector<std::span<const std::uint8_t>> parts;
  if (split && payload.size() > config_.split_at) {
    parts.push_back(payload.first(config_.split_at));
    parts.push_back(payload.subspan(config_.split_at));
  } else {
    parts.push_back(payload);
  }
  for (auto part : parts) {
    while (!part.empty()) {
      const auto n = std::min(part.size(), config_.mss);
      Segment seg;
      seg.seq = snd_next_;
      seg.ack = rcv_next_;
      seg.flags = flag::kAck | flag::kPsh;
      seg.payload.assign(part.begin(), part.begin() + static_cast<std::ptrdiff_t>(n));
      queue_segment(out, std::move(seg), now);
      part = part.subspan(n);
    }
  }
  return out;
}

double Connection::rto_update(double sample) {
  if (!srtt_) {
    srtt_ = sample;
    rttvar_ = sample / 2.0;
  } else {
    rttvar_ = (1.0 - config_.beta) * rttvar_ + config_.beta * std::abs(*srtt_ - sample);
    srtt_ = (1.0 - config_.alpha) * *srtt_ + config_.alpha * sample;
  }
  rto_ = std::clamp(*srtt_ + 4.0 * rttvar_, config_.min_rto_ms, config_.max_rto_ms);
  return rto_;
}

void Connection::retransmit_front(Actions& out, RetxClass cls) {
  auto& entry = unacked_.front();
  entry.retransmitted = true;
  ++entry.retx_count;
  Segment copy = entry.seg;
  copy.retx = cls;
  if (copy.has(flag::kAck)) copy.ack = rcv_next_;
  if (cls == RetxClass::kRtoRetx) ++stats_.rto_retransmits;
  else ++stats_.fast_retransmits;
  emit(out, std::move(copy));
}

void Connection::process_ack(Actions& out, std::uint64_t ack, bool pure, SimTime now) {
  if (ack > snd_next_) {
    ++stats_.protocol_errors;
    out.protocol_error = true;
    return;
  }
  if (ack > snd_una_) {
    bool karn_clean = true;
    std::optional<SimTime> newest_sent;
    while (!unacked_.empty()) {
      auto& front = unacked_.front();
      const auto end = front.seg.seq + front.seg.seq_len();
      if (end <= ack) {
        karn_clean = karn_clean && !front.retransmitted;
        newest_sent = front.sent_at;
        unacked_.pop_front();
        continue;
      }
      if (front.seg.seq < ack) {
        // partial coverage; trim the acknowledged prefix
        const auto covered = ack - front.seg.seq;
        front.seg.payload.erase(front.seg.payload.begin(),
                                front.seg.payload.begin() + static_cast<std::ptrdiff_t>(covered));
        front.seg.seq = ack;
        karn_clean = false;
      }
      break;
    }
    snd_una_ = ack;
    dup_ack_count_ = 0;
    if (karn_clean && newest_sent) rto_update(static_cast<double>(now - *newest_sent) / sim::kUsPerMs);
    if (recovery_ && ack >= recover_) recovery_.reset();
    // partial ACK while recovering: the next hole goes out now
    if (recovery_ && !unacked_.empty() && !unacked_.front().retransmitted) retransmit_front(out, *recovery_);
    if (unacked_.empty()) disarm(out);
    else arm(out, now + sim::ms_to_us(rto_));
    return;
  }
  if (ack == snd_una_ && pure && !unacked_.empty()) {
    ++stats_.dup_acks;
    if (++dup_ack_count_ == 3) {
      dup_ack_count_ = 0;
      // one fast retransmit per loss episode; an RTO already covering this
      // window also suppresses it
      if (snd_una_ > recover_) {
        retransmit_front(out, RetxClass::kFastRetx);
        recover_ = snd_next_;
        recovery_ = RetxClass::kFastRetx;
      }
    }
  }
}

void Connection::receive_data(Actions& out, const Segment& seg) {
  const auto len = seg.payload.size();
  const auto seg_end = seg.seq + len;
  if (seg_end <= rcv_next_) {
    ++stats_.duplicate_segments_received;
  } else if (seg.seq <= rcv_next_) {
    const auto skip = rcv_next_ - seg.seq;
    out.delivered.insert(out.delivered.end(), seg.payload.begin() + static_cast<std::ptrdiff_t>(skip),
                         seg.payload.end());
    rcv_next_ = seg_end;
    // drain any buffered segments that are now contiguous
    while (!out_of_order_.empty()) {
      auto it = out_of_order_.begin();
      const auto start = it->first;
      const auto end = start + it->second.size();
      if (start > rcv_next_) break;
      if (end > rcv_next_) {
        out.delivered.insert(out.delivered.end(),
                             it->second.begin() + static_cast<std::ptrdiff_t>(rcv_next_ - start), it->second.end());
        rcv_next_ = end;
      }
      out_of_order_.erase(it);
    }
  } else {
    auto [it, inserted] = out_of_order_.try_emplace(seg.seq, seg.payload);
    if (!inserted) {
      ++stats_.duplicate_segments_received;
      if (it->second.size() < len) it->second = seg.payload;
    }
  }
  emit_pure_ack(out);
}

Actions Connection::on_segment(const Segment& seg, SimTime now) {
  Actions out;
  if (seg.has(flag::kRst)) {
    if (state_ != State::kClosed) {
      close(out);
      out.reset = true;
    }
    return out;
  }
  switch (state_) {
    case State::kClosed:
      break;
    case State::kSynSent:
      if (seg.has(flag::kSyn) && seg.has(flag::kAck) && seg.ack == isn_ + 1) {
        rcv_next_ = seg.seq + 1;
        process_ack(out, seg.ack, false, now);
        state_ = State::kEstablished;
        out.established = true;
        emit_pure_ack(out);
      }
      break;
    case State::kSynRcvd:
      if (seg.has(flag::kSyn) && !seg.has(flag::kAck)) {
        // peer retransmitted its SYN; our SYN+ACK was probably lost
        if (!unacked_.empty()) retransmit_front(out, RetxClass::kRtoRetx);
        break;
      }
      if (seg.has(flag::kAck) && seg.ack == isn_ + 1) {
        process_ack(out, seg.ack, false, now);
        state_ = State::kEstablished;
        out.established = true;
        if (!seg.payload.empty()) receive_data(out, seg);
      }
      break;
    case State::kEstablished:
      if (seg.has(flag::kSyn)) {
        // duplicate SYN+ACK: our handshake ACK was lost
        if (seg.has(flag::kAck)) emit_pure_ack(out);
        break;
      }
      if (seg.has(flag::kAck)) process_ack(out, seg.ack, seg.payload.empty(), now);
      if (!seg.payload.empty()) receive_data(out, seg);
      break;
  }
  return out;
}

Actions Connection::on_ack(std::uint64_t ack_seq, SimTime now) {
  Actions out;
  if (state_ != State::kEstablished) return out;
  process_ack(out, ack_seq, true, now);
  return out;
}

Actions Connection::on_rto(SimTime now) {
  Actions out;
  if (!timer_deadline_ || now < *timer_deadline_) return out;
  if (unacked_.empty()) {
    disarm(out);
    return out;
  }
  const bool handshake = unacked_.front().seg.has(flag::kSyn);
  const int limit = handshake ? config_.syn_retries : config_.max_retransmits;
  if (unacked_.front().retx_count >= limit) {
    const bool was_opening = state_ == State::kSynSent;
    close(out);
    if (was_opening) out.failed = true;
    else out.reset = true;
    return out;
  }
  retransmit_front(out, RetxClass::kRtoRetx);
  rto_ = std::min(rto_ * 2.0, config_.max_rto_ms);
  recover_ = snd_next_;
  recovery_ = RetxClass::kRtoRetx;
  dup_ack_count_ = 0;
  arm(out, now + sim::ms_to_us(rto_));
  return out;
}

}  // namespace wams::tcplite
