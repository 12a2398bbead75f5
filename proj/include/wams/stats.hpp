#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

namespace wams::stats {

class StatsError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Pre-sample standard deviation with divisor N (population form), not N-1.
double presample_std(std::span<const double> samples);

struct SampleSizeInputs {
  double s = 0.0;  // pre-sample standard deviation, metric units
  double z = 0.0;  // Z-score
  double e = 0.0;  // acceptable standard error, metric units
  double n_t = 0.0;  // population size

  void validate() const;
};

/// Z^2 S^2 / (e^2 + Z^2 S^2 / N_T), unrounded.
double min_sample_size(const SampleSizeInputs& in);

/// min_sample_size rounded up and capped at the population.
std::uint64_t min_sample_count(const SampleSizeInputs& in);

/// Joint requirement across metrics: the largest individual requirement.
double combined_min(std::span<const double> sizes);

/// `n` distinct indices in [0, n_t), uniform without replacement, sorted.
std::vector<std::uint64_t> random_sample(std::uint64_t n_t, std::uint64_t n, std::uint64_t seed);

/// Lookup table of Z-scores. 0.95 maps to 1.959.
const std::map<double, double>& z_table();
double z_for_confidence(double level);

}  // namespace wams::stats
