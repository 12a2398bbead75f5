#include "wams/frame.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include <fmt/format.h>

namespace wams {
namespace {

constexpr std::array<std::uint16_t, 256> make_crc_table() {
  std::array<std::uint16_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
    for (int b = 0; b < 8; ++b)
      crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                           : static_cast<std::uint16_t>(crc << 1);
    table[i] = crc;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

template <typename T>
void put_be(std::uint8_t* out, T value) {
  using U = std::make_unsigned_t<T>;
  U u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out[i] = static_cast<std::uint8_t>(u >> (8 * (sizeof(T) - 1 - i)));
}

template <typename T>
T get_be(const std::uint8_t* in) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u = static_cast<U>((u << 8) | in[i]);
  return static_cast<T>(u);
}

void put_double(std::uint8_t* out, double v) { put_be(out, std::bit_cast<std::uint64_t>(v)); }
double get_double(const std::uint8_t* in) { return std::bit_cast<double>(get_be<std::uint64_t>(in)); }

void require_finite(const char* field, double v) {
  if (!std::isfinite(v)) throw EncodeError(field, fmt::format("{} must be finite, got {}", field, v));
}

}  // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) noexcept {
  std::uint16_t crc = 0xFFFF;
  for (std::uint8_t byte : data)
    crc = static_cast<std::uint16_t>((crc << 8) ^ kCrcTable[((crc >> 8) ^ byte) & 0xFF]);
  return crc;
}

double normalize_angle_deg(double deg) noexcept {
  double r = std::fmod(deg + 180.0, 360.0);
  if (r < 0) r += 360.0;
  r -= 180.0;
  return r >= 180.0 ? -180.0 : r;
}

FrameBytes encode_frame(const FdrFrame& f) {
  if (f.utc_timestamp_ms < 0)
    throw EncodeError("utc_timestamp", fmt::format("utc_timestamp must be >= 0, got {}", f.utc_timestamp_ms));
  require_finite("frequency", f.frequency_hz);
  if (f.frequency_hz < 0) throw EncodeError("frequency", fmt::format("frequency must be >= 0, got {}", f.frequency_hz));
  require_finite("voltage_mag", f.voltage_mag_pu);
  if (f.voltage_mag_pu < 0)
    throw EncodeError("voltage_mag", fmt::format("voltage_mag must be >= 0, got {}", f.voltage_mag_pu));
  require_finite("voltage_angle", f.voltage_angle_deg);
  if (f.voltage_angle_deg < -180.0 || f.voltage_angle_deg >= 180.0)
    throw EncodeError("voltage_angle",
                      fmt::format("voltage_angle must lie in [-180, 180), got {}", f.voltage_angle_deg));

  FrameBytes out{};
  auto* p = out.data();
  put_be(p + wire::kOffMagic, wire::kMagic);
  put_be(p + wire::kOffDeviceId, f.device_id);
  put_be(p + wire::kOffFrameSeq, f.frame_seq);
  put_be(p + wire::kOffTimestamp, f.utc_timestamp_ms);
  put_double(p + wire::kOffFrequency, f.frequency_hz);
  put_double(p + wire::kOffVoltageMag, f.voltage_mag_pu);
  put_double(p + wire::kOffVoltageAngle, f.voltage_angle_deg);
  p[wire::kOffStatus] = f.status;
  // reserved bytes stay zero
  put_be(p + wire::kOffCrc, crc16_ccitt_false(std::span(out).first(wire::kOffCrc)));
  return out;
}

FdrFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < wire::kFrameBytes)
    throw DecodeError(DecodeError::Kind::kShortInput,
                      fmt::format("need {} bytes, got {}", wire::kFrameBytes, bytes.size()));
  const auto* p = bytes.data();
  if (get_be<std::uint16_t>(p + wire::kOffMagic) != wire::kMagic)
    throw DecodeError(DecodeError::Kind::kFraming, "bad magic");
  const auto expected = get_be<std::uint16_t>(p + wire::kOffCrc);
  const auto actual = crc16_ccitt_false(bytes.first(wire::kOffCrc));
  if (expected != actual)
    throw DecodeError(DecodeError::Kind::kChecksum,
                      fmt::format("crc mismatch: stored {:04x}, computed {:04x}", expected, actual));

  FdrFrame f;
  f.device_id = get_be<std::uint16_t>(p + wire::kOffDeviceId);
  f.frame_seq = get_be<std::uint32_t>(p + wire::kOffFrameSeq);
  f.utc_timestamp_ms = get_be<std::int64_t>(p + wire::kOffTimestamp);
  f.frequency_hz = get_double(p + wire::kOffFrequency);
  f.voltage_mag_pu = get_double(p + wire::kOffVoltageMag);
  f.voltage_angle_deg = get_double(p + wire::kOffVoltageAngle);
  f.status = p[wire::kOffStatus];
  return f;
}

}  // namespace wams
