#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "wams/simnet.hpp"

namespace wams::tcplite {

using sim::SimTime;

enum class State { kClosed, kSynSent, kSynRcvd, kEstablished };
std::string_view to_string(State s);

enum class RetxClass : std::uint8_t { kFirst, kRtoRetx, kFastRetx };
std::string_view to_string(RetxClass c);
/// Accepts the capture-log spelling: FIRST, RTO_RETX, FAST_RETX.
std::optional<RetxClass> retx_class_from_string(std::string_view s);

namespace flag {
inline constexpr std::uint8_t kSyn = 0x01;
inline constexpr std::uint8_t kAck = 0x02;
inline constexpr std::uint8_t kPsh = 0x04;
inline constexpr std::uint8_t kRst = 0x08;
}  // namespace flag

struct Segment {
  static constexpr std::size_t kHeaderBytes = 40;  // 20 IP + 20 TCP, no options

  std::uint64_t seq = 0;
  std::uint64_t ack = 0;
  std::uint8_t flags = 0;
  std::vector<std::uint8_t> payload;
  RetxClass retx = RetxClass::kFirst;

  bool has(std::uint8_t f) const noexcept { return (flags & f) != 0; }
  /// Sequence space consumed: payload plus one for SYN.
  std::uint64_t seq_len() const noexcept { return payload.size() + (has(flag::kSyn) ? 1 : 0); }
  std::size_t wire_bytes() const noexcept { return payload.size() + kHeaderBytes; }
};

struct TransportConfig {
  double min_rto_ms = 200.0;
  double max_rto_ms = 60000.0;
  double initial_rto_ms = 1000.0;
  double alpha = 1.0 / 8.0;
  double beta = 1.0 / 4.0;
  std::size_t mss = 1460;
  std::size_t split_at = 27;
  int max_retransmits = 8;  // per segment, before the connection resets
  int syn_retries = 5;

  void validate() const;
};

class TransportError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// What the owner of a connection has to do after feeding it one input.
struct Actions {
  enum class Timer { kUnchanged, kArm, kDisarm };

  std::vector<Segment> transmit;
  std::vector<std::uint8_t> delivered;  // newly in-order bytes for the application
  Timer timer = Timer::kUnchanged;
  SimTime timer_deadline = 0;
  bool established = false;
  bool failed = false;  // handshake gave up
  bool reset = false;   // RST received or retransmit limit exceeded
  bool protocol_error = false;
};

struct ConnectionStats {
  std::uint64_t segments_sent = 0;
  std::uint64_t rto_retransmits = 0;
  std::uint64_t fast_retransmits = 0;
  std::uint64_t dup_acks = 0;
  std::uint64_t protocol_errors = 0;
  std::uint64_t duplicate_segments_received = 0;

  ConnectionStats& operator+=(const ConnectionStats& o) {
    segments_sent += o.segments_sent;
    rto_retransmits += o.rto_retransmits;
    fast_retransmits += o.fast_retransmits;
    dup_acks += o.dup_acks;
    protocol_errors += o.protocol_errors;
    duplicate_segments_received += o.duplicate_segments_received;
    return *this;
  }
};

/// Reliable byte stream with cumulative ACKs, Jacobson RTO, Karn's rule,
/// fast retransmit on three duplicate ACKs and out-of-order buffering.
/// No congestion window. Owned by exactly one driver; not thread-safe.
class Connection {
 public:
  Connection(TransportConfig config, std::uint64_t isn);

  /// Active open: emits SYN.
  Actions open(SimTime now);
  /// Passive open in response to a received SYN: emits SYN+ACK.
  Actions accept(const Segment& syn, SimTime now);

  /// Queues `payload` as one segment, or two when `split` is set, each also
  /// bounded by the MSS.
  Actions send(std::span<const std::uint8_t> payload, bool split, SimTime now);

  /// Any inbound segment (handshake, ACK, data or RST).
  Actions on_segment(const Segment& seg, SimTime now);

  /// Pure cumulative ACK.
  Actions on_ack(std::uint64_t ack_seq, SimTime now);

  /// Retransmission timer expiry. Stale or early calls are ignored.
  Actions on_rto(SimTime now);

  /// Feeds one RTT sample into the estimator and returns the new RTO in ms.
  double rto_update(double rtt_sample_ms);

  State state() const noexcept { return state_; }
  std::uint64_t snd_una() const noexcept { return snd_una_; }
  std::uint64_t snd_next() const noexcept { return snd_next_; }
  std::uint64_t rcv_next() const noexcept { return rcv_next_; }
  int dup_ack_count() const noexcept { return dup_ack_count_; }
  std::optional<double> srtt_ms() const noexcept { return srtt_; }
  double rttvar_ms() const noexcept { return rttvar_; }
  double rto_ms() const noexcept { return rto_; }
  std::size_t in_flight() const noexcept { return unacked_.size(); }
  std::optional<SimTime> timer_deadline() const noexcept { return timer_deadline_; }
  const ConnectionStats& stats() const noexcept { return stats_; }
  const TransportConfig& config() const noexcept { return config_; }

 private:
  struct InFlight {
    Segment seg;
    SimTime sent_at;
    bool retransmitted = false;
    int retx_count = 0;
  };

  void emit(Actions& out, Segment seg);
  void emit_pure_ack(Actions& out);
  void queue_segment(Actions& out, Segment seg, SimTime now);
  void retransmit_front(Actions& out, RetxClass cls);
  void process_ack(Actions& out, std::uint64_t ack, bool pure, SimTime now);
  void receive_data(Actions& out, const Segment& seg);
  void arm(Actions& out, SimTime deadline);
  void disarm(Actions& out);
  void close(Actions& out);

  TransportConfig config_;
  State state_ = State::kClosed;
  std::uint64_t isn_;
  std::uint64_t snd_una_;
  std::uint64_t snd_next_;
  std::uint64_t rcv_next_ = 0;
  std::uint64_t recover_;
  std::optional<RetxClass> recovery_;  // set between a retransmit and the ACK covering recover_
  int dup_ack_count_ = 0;
  std::optional<double> srtt_;
  double rttvar_ = 0.0;
  double rto_;
  std::deque<InFlight> unacked_;
  std::map<std::uint64_t, std::vector<std::uint8_t>> out_of_order_;
  std::optional<SimTime> timer_deadline_;
  ConnectionStats stats_;
};

}  // namespace wams::tcplite
