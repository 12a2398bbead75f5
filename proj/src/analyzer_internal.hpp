#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "wams/analyzer.hpp"

namespace wams::analyzer::detail {

inline constexpr std::int64_t kSlotUs = 1'000'000;

struct Selection {
  std::int64_t start_us = 0;
  std::size_t n_slots = 0;
  std::vector<char> selected;
  std::size_t n_selected = 0;

  /// Slot index of an absolute microsecond time, or nullopt outside the population.
  std::optional<std::size_t> slot_of(std::int64_t t_us) const {
    if (t_us < start_us) return std::nullopt;
    const auto s = static_cast<std::size_t>((t_us - start_us) / kSlotUs);
    if (s >= n_slots) return std::nullopt;
    return s;
  }
};

/// Validates sample indices; throws AnalysisError listing every offender.
Selection make_selection(const CaptureHeader& header, const std::optional<std::vector<std::size_t>>& indices);

double t_fdr_for(const CaptureHeader& header, const DelayOptions& options, std::uint16_t device);
double t_dcs_for(const CaptureHeader& header, const DelayOptions& options);

inline double pct(std::uint64_t part, std::uint64_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(total);
}

}  // namespace wams::analyzer::detail
