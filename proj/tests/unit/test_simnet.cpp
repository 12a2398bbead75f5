#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "wams/simnet.hpp"

using namespace wams::sim;

namespace {

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Closed-form mean of a lognormal(ln m, s) truncated to [0, c].
double truncated_lognormal_mean(double m, double s, double c) {
  const double z = (std::log(c) - std::log(m)) / s;
  return m * std::exp(s * s / 2) * norm_cdf(z - s) / norm_cdf(z);
}

// Closed-form mean of an exponential with mean m truncated to [0, c].
double truncated_exponential_mean(double m, double c) {
  const double q = std::exp(-c / m);
  return m - c * q / (1 - q);
}

}  // namespace

TEST_CASE("event loop ordering and ties") {
  EventLoop loop;
  std::vector<int> order;
  loop.schedule(20, [&] { order.push_back(3); });
  loop.schedule(10, [&] { order.push_back(1); });
  loop.schedule(10, [&] { order.push_back(2); });
  CHECK(loop.run_until(100) == 3);
  CHECK(order == std::vector<int>{1, 2, 3});
  CHECK(loop.now() == 100);
}

TEST_CASE("schedule at now fires on the next step; past is an error") {
  EventLoop loop;
  loop.run_until(50);
  bool fired = false;
  loop.schedule(50, [&] { fired = true; });
  CHECK_THROWS_AS(loop.schedule(49, [] {}), SchedulingError);
  loop.run_until(50);
  CHECK(fired);
}

TEST_CASE("canceled events never fire") {
  EventLoop loop;
  int n = 0;
  const auto a = loop.schedule(5, [&] { ++n; });
  loop.schedule(6, [&] { n += 10; });
  CHECK(loop.cancel(a));
  CHECK_FALSE(loop.cancel(a));
  CHECK(loop.pending() == 1);
  CHECK(loop.run_until(10) == 1);
  CHECK(n == 10);
  CHECK_FALSE(loop.cancel(12345));
}

TEST_CASE("empty run advances the clock") {
  EventLoop loop;
  CHECK(loop.run_until(1000) == 0);
  CHECK(loop.now() == 1000);
}

TEST_CASE("events scheduled during dispatch respect order") {
  EventLoop loop;
  std::vector<SimTime> times;
  loop.schedule(0, [&] {
    times.push_back(loop.now());
    loop.schedule_in(5, [&] { times.push_back(loop.now()); });
    loop.schedule_in(0, [&] { times.push_back(loop.now()); });
  });
  loop.run_until(10);
  CHECK(times == std::vector<SimTime>{0, 0, 5});
}

TEST_CASE("serialization term") {
  ChannelParams p;
  p.rate_bps = 384000;
  Rng rng = make_rng(1, 0);
  const double d = transit_delay_ms(55, p, rng);
  CHECK(std::abs(d - 440.0 / 384000.0 * 1000.0) < 1e-3);
  CHECK(std::abs(d - 1.1458) < 1e-3);
  CHECK(transit_delay_us(55, p, rng) == 1146);
}

TEST_CASE("zero jitter delay is exact and constant") {
  ChannelParams p;
  p.t_p_ms = 100;
  Rng rng = make_rng(2, 0);
  for (int i = 0; i < 100; ++i) CHECK(transit_delay_ms(95, p, rng) == 100.0 + 760.0 / 384000.0 * 1000.0);
  CHECK_THROWS(transit_delay_ms(0, p, rng));
}

TEST_CASE("jitter means match closed forms") {
  constexpr int kN = 1'000'000;
  SUBCASE("lognormal") {
    ChannelParams p;
    p.t_p_ms = 100;
    p.jitter = {JitterKind::kLognormal, 22.0, 0.6, 75.0};
    Rng rng = make_rng(3, 0);
    double sum = 0, sq = 0, lo = 1e9, hi = -1e9;
    for (int i = 0; i < kN; ++i) {
      const double j = transit_delay_ms(55, p, rng) - 100.0 - 440.0 / 384.0;
      sum += j;
      sq += j * j;
      lo = std::min(lo, j);
      hi = std::max(hi, j);
    }
    const double mean = sum / kN;
    const double se = std::sqrt((sq / kN - mean * mean) / kN);
    CHECK(std::abs(mean - truncated_lognormal_mean(22.0, 0.6, 75.0)) < 3 * se);
    CHECK(lo >= -1e-9);
    CHECK(hi <= 75.0 + 1e-9);
  }
  SUBCASE("exponential") {
    JitterSpec j{JitterKind::kExponential, 10.0, 0.0, 60.0};
    Rng rng = make_rng(4, 0);
    double sum = 0, sq = 0;
    for (int i = 0; i < kN; ++i) {
      const double x = sample_jitter_ms(j, rng);
      REQUIRE(x >= 0);
      REQUIRE(x <= 60.0);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / kN;
    const double se = std::sqrt((sq / kN - mean * mean) / kN);
    CHECK(std::abs(mean - truncated_exponential_mean(10.0, 60.0)) < 3 * se);
  }
  SUBCASE("constant") {
    JitterSpec j{JitterKind::kConstant, 7.5, 0.0, 1000.0};
    Rng rng = make_rng(5, 0);
    CHECK(sample_jitter_ms(j, rng) == 7.5);
  }
}

TEST_CASE("loss probability") {
  ChannelParams p;
  Rng rng = make_rng(6, 0);
  p.p_loss = 0;
  for (int i = 0; i < 10000; ++i) REQUIRE_FALSE(should_drop(p, rng));
  p.p_loss = 1;
  for (int i = 0; i < 10000; ++i) REQUIRE(should_drop(p, rng));
  p.p_loss = 0.003;
  int drops = 0;
  for (int i = 0; i < 1'000'000; ++i) drops += should_drop(p, rng);
  CHECK(drops >= 2500);
  CHECK(drops <= 3500);
}

TEST_CASE("uniform01 bins pass a chi-square test") {
  Rng rng = make_rng(7, 0);
  constexpr int kBins = 100, kN = 1'000'000;
  std::vector<int> counts(kBins);
  for (int i = 0; i < kN; ++i) {
    const double u = uniform01(rng);
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    ++counts[static_cast<std::size_t>(u * kBins)];
  }
  double chi2 = 0;
  const double expect = static_cast<double>(kN) / kBins;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < 134.64);  // 99th percentile, 99 degrees of freedom
}

TEST_CASE("rng streams are deterministic and distinct") {
  auto a = make_rng(42, 1, 2), b = make_rng(42, 1, 2), c = make_rng(42, 2, 1);
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
}

TEST_CASE("channel parameter validation") {
  ChannelParams p;
  CHECK_NOTHROW(p.validate());
  p.rate_bps = 0;
  CHECK_THROWS(p.validate());
  p = {};
  p.p_loss = 1.5;
  CHECK_THROWS(p.validate());
  p = {};
  p.t_p_ms = -1;
  CHECK_THROWS(p.validate());
  p = {};
  p.jitter = {JitterKind::kLognormal, 50.0, 0.5, 20.0};
  CHECK_THROWS(p.validate());
  CHECK(jitter_kind_from_string("lognormal") == JitterKind::kLognormal);
  CHECK(to_string(JitterKind::kExponential) == "exponential");
  CHECK_THROWS(jitter_kind_from_string("pareto"));
}
