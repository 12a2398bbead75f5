#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <unistd.h>

#include "wams/simulation.hpp"

using namespace wams;
namespace fs = std::filesystem;

namespace {

Scenario small(std::uint64_t seed, double p_loss) {
  std::istringstream in(
      "seed = " + std::to_string(seed) +
      "\nduration_s = 20\ndrain_s = 5\ndevices = 3\np_seg = 0.3\nt_fdr_ms = 2\n"
      "[channel]\nt_p_ms = 100\np_loss = " + std::to_string(p_loss) +
      "\njitter.kind = exponential\njitter.mean_ms = 10\njitter.cap_ms = 60\n");
  return parse_scenario(in, "small");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& tag) {
  auto d = fs::temp_directory_path() / ("wams_sim_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("same seed gives byte-identical outputs") {
  const auto a = temp_dir("a"), b = temp_dir("b");
  simulate_to_dir(small(5, 0.02), a);
  simulate_to_dir(small(5, 0.02), b);
  for (const char* f : {"capture.jsonl", "measurements.jsonl", "measurements.csv", "summary.csv", "delays.csv",
                        "throughput.csv"}) {
    CAPTURE(f);
    const auto x = slurp(a / f);
    CHECK(!x.empty());
    CHECK(x == slurp(b / f));
  }
  const auto c = temp_dir("c");
  simulate_to_dir(small(6, 0.02), c);
  CHECK(slurp(a / "capture.jsonl") != slurp(c / "capture.jsonl"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("analysis of the written capture equals the in-memory analysis") {
  const auto dir = temp_dir("rt");
  const auto out = simulate_to_dir(small(9, 0.05), dir);
  CaptureLog mem;
  mem.header = out.result.header;
  mem.records = out.result.capture;
  const auto inline_summary = analyzer::summarize(mem);
  CHECK(analyzer::summary_csv(inline_summary) == slurp(dir / "summary.csv"));
  CHECK(analyzer::summary_csv(out.analysis.summary) == slurp(dir / "summary.csv"));
  fs::remove_all(dir);
}

TEST_CASE("lossless delays match the closed form") {
  std::istringstream in("duration_s = 10\ndevices = 2\np_seg = 0\n[channel]\nt_p_ms = 100\n");
  const auto res = run_simulation(parse_scenario(in));
  CHECK(res.rows.size() == 200);
  CaptureLog log{res.header, res.capture, 0};
  const auto series = analyzer::one_way_delays(log);
  REQUIRE(series.samples.size() == 200);
  const double closed = 100.0 + 55.0 * 8.0 / 384000.0 * 1000.0;
  for (const auto& s : series.samples) CHECK(std::abs(s.t_ci_ms - closed) <= 0.001);
  for (const auto& d : res.devices) {
    CHECK(d.stats.frames_offered == 100);
    CHECK(d.stats.frames_dropped == 0);
  }
}

TEST_CASE("outage drops frames and devices reconnect") {
  std::istringstream in("duration_s = 30\ndevices = 2\ndcs_outage_s = 5, 8\n[channel]\nt_p_ms = 50\n");
  const auto res = run_simulation(parse_scenario(in));
  for (const auto& d : res.devices) {
    CHECK(d.stats.connections_opened >= 2);
    CHECK(!d.stats.offline);
  }
  CHECK(res.rows.size() < 600);
  CHECK(res.rows.size() > 500);
}
