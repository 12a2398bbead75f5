// Parallel summarize against the serial reference on a simulated capture.

#include <benchmark/benchmark.h>

#include <string>

#include "wams/analyzer.hpp"
#include "wams/log.hpp"
#include "wams/simulation.hpp"

namespace {

const wams::CaptureLog& capture() {
  static const wams::CaptureLog log = [] {
    wams::log::get()->set_level(spdlog::level::err);
    const auto res = wams::run_simulation(wams::load_scenario_file(std::string(WAMS_SCENARIO_DIR) + "/paper_like.scenario"));
    return wams::CaptureLog{res.header, res.capture, 0};
  }();
  return log;
}

void BM_SummarizeParallel(benchmark::State& state) {
  const auto& log = capture();
  for (auto _ : state) benchmark::DoNotOptimize(wams::analyzer::summarize(log));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * log.records.size()));
}

void BM_SummarizeSerial(benchmark::State& state) {
  const auto& log = capture();
  for (auto _ : state) benchmark::DoNotOptimize(wams::analyzer::reference::summarize_serial(log));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * log.records.size()));
}

}  // namespace

BENCHMARK(BM_SummarizeParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SummarizeSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
