#include "wams/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include <fmt/format.h>

namespace wams::stats {

double presample_std(std::span<const double> samples) {
  if (samples.empty()) throw StatsError("presample_std needs at least one sample");
  const double n = static_cast<double>(samples.size());
  // shifted by the first sample so a constant series gives exactly zero
  const double k = samples.front();
  double sum = 0.0;
  for (double x : samples) sum += x - k;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : samples) ss += (x - k - mean) * (x - k - mean);
  return std::sqrt(ss / n);
}

void SampleSizeInputs::validate() const {
  if (!(s >= 0)) throw StatsError(fmt::format("s must be >= 0, got {}", s));
  if (!(z > 0)) throw StatsError(fmt::format("z must be > 0, got {}", z));
  if (!(e > 0)) throw StatsError(fmt::format("e must be > 0, got {}", e));
  if (!(n_t >= 1)) throw StatsError(fmt::format("population must be >= 1, got {}", n_t));
}

double min_sample_size(const SampleSizeInputs& in) {
  in.validate();
  const double zs2 = in.z * in.z * in.s * in.s;
  return zs2 / (in.e * in.e + zs2 / in.n_t);
}

std::uint64_t min_sample_count(const SampleSizeInputs& in) {
  const double n = std::ceil(min_sample_size(in) - 1e-9);
  return static_cast<std::uint64_t>(std::min(n, std::floor(in.n_t)));
}

double combined_min(std::span<const double> sizes) {
  if (sizes.empty()) throw StatsError("combined_min needs at least one sample size");
  return *std::max_element(sizes.begin(), sizes.end());
}

std::vector<std::uint64_t> random_sample(std::uint64_t n_t, std::uint64_t n, std::uint64_t seed) {
  if (n > n_t) throw StatsError(fmt::format("sample size {} exceeds population {}", n, n_t));
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> out;
  out.reserve(n);
  if (n * 2 > n_t) {
    // dense: partial Fisher-Yates
    std::vector<std::uint64_t> all(n_t);
    std::iota(all.begin(), all.end(), 0);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::uint64_t> pick(i, n_t - 1);
      std::swap(all[i], all[pick(rng)]);
    }
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  } else {
    // sparse: Floyd's algorithm
    std::unordered_set<std::uint64_t> chosen;
    for (std::uint64_t j = n_t - n; j < n_t; ++j) {
      std::uniform_int_distribution<std::uint64_t> pick(0, j);
      const auto t = pick(rng);
      const auto v = chosen.insert(t).second ? t : j;
      if (v == j) chosen.insert(j);
      out.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

const std::map<double, double>& z_table() {
  static const std::map<double, double> table{{0.90, 1.645}, {0.95, 1.959}, {0.99, 2.576}};
  return table;
}

double z_for_confidence(double level) {
  for (const auto& [lvl, z] : z_table())
    if (std::abs(lvl - level) < 1e-9) return z;
  throw StatsError(fmt::format("unsupported confidence level {}; supported: 0.90, 0.95, 0.99", level));
}

}  // namespace wams::stats
