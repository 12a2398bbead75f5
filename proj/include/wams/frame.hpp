#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace wams {

/// One synchrophasor measurement record as reported by an FDR at 10 Hz.
struct FdrFrame {
  std::uint16_t device_id = 0;
  std::uint32_t frame_seq = 0;
  std::int64_t utc_timestamp_ms = 0;
  double frequency_hz = 0.0;
  double voltage_mag_pu = 0.0;
  double voltage_angle_deg = 0.0;  // [-180, 180)
  std::uint8_t status = 0;

  friend bool operator==(const FdrFrame&, const FdrFrame&) = default;
};

namespace wire {
inline constexpr std::size_t kFrameBytes = 55;
inline constexpr std::uint16_t kMagic = 0xAA01;

inline constexpr std::size_t kOffMagic = 0;
inline constexpr std::size_t kOffDeviceId = 2;
inline constexpr std::size_t kOffFrameSeq = 4;
inline constexpr std::size_t kOffTimestamp = 8;
inline constexpr std::size_t kOffFrequency = 16;
inline constexpr std::size_t kOffVoltageMag = 24;
inline constexpr std::size_t kOffVoltageAngle = 32;
inline constexpr std::size_t kOffStatus = 40;
inline constexpr std::size_t kOffReserved = 41;
inline constexpr std::size_t kReservedBytes = 12;
inline constexpr std::size_t kOffCrc = 53;
}  // namespace wire

using FrameBytes = std::array<std::uint8_t, wire::kFrameBytes>;

class EncodeError : public std::invalid_argument {
 public:
  EncodeError(std::string field, const std::string& what)
      : std::invalid_argument(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DecodeError : public std::runtime_error {
 public:
  enum class Kind { kShortInput, kFraming, kChecksum };
  DecodeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, no xorout).
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) noexcept;

/// Serializes to the fixed 55-byte big-endian layout; throws EncodeError on a
/// field outside its declared range.
FrameBytes encode_frame(const FdrFrame& frame);

/// Decodes the first 55 bytes. Verifies magic, then CRC.
FdrFrame decode_frame(std::span<const std::uint8_t> bytes);

/// Wraps an angle in degrees into [-180, 180).
double normalize_angle_deg(double deg) noexcept;

}  // namespace wams
