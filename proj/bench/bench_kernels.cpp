// Serial reference vs OpenMP path of the parallel kernels.
// Run with OMP_NUM_THREADS set to the number of cores to compare.

#include <benchmark/benchmark.h>

#include "qgprobe/detection/spectrum.hpp"
#include "qgprobe/detection/synthesis.hpp"
#include "qgprobe/estimation/ringdown.hpp"
#include "qgprobe/protocol/campaign.hpp"

using namespace qgprobe;

namespace {

Execution exec_of(const benchmark::State& st) { return st.range(0) ? Execution::Parallel : Execution::Serial; }

protocol::CampaignConfig small_config() {
  protocol::CampaignConfig cfg;
  cfg.sync_detection();
  cfg.schedule.cycles_per_series = 100;
  cfg.schedule.series_duration = 4.0;
  cfg.storage.stationary_spectrum = 0.0;
  return cfg;
}

void BM_Welch(benchmark::State& st) {
  protocol::CampaignConfig cfg;
  cfg.sync_detection();
  const auto plan = protocol::plan_series(cfg, 0);
  const auto ts = detection::synthesize_bhd(plan.pump_state, cfg.mode, cfg.cavity, cfg.detection, 0.5, 7);
  const auto opt = detection::WelchOptions::for_resolution(50.0, cfg.detection.sample_rate);
  for (auto _ : st) {
    if (st.range(0)) benchmark::DoNotOptimize(detection::welch_psd(ts, opt, Execution::Parallel));
    else benchmark::DoNotOptimize(detection::welch_psd_reference(ts, opt));
  }
}

void BM_Synthesis(benchmark::State& st) {
  protocol::CampaignConfig cfg;
  cfg.sync_detection();
  const auto plan = protocol::plan_series(cfg, 0);
  for (auto _ : st) {
    if (st.range(0))
      benchmark::DoNotOptimize(
          detection::synthesize_bhd(plan.pump_state, cfg.mode, cfg.cavity, cfg.detection, 0.25, 7, Execution::Parallel));
    else
      benchmark::DoNotOptimize(
          detection::synthesize_bhd_reference(plan.pump_state, cfg.mode, cfg.cavity, cfg.detection, 0.25, 7));
  }
}

void BM_RunSeries(benchmark::State& st) {
  const auto cfg = small_config();
  for (auto _ : st) benchmark::DoNotOptimize(protocol::run_series(cfg, 0, exec_of(st)));
}

void BM_FitRingdowns(benchmark::State& st) {
  const auto cfg = small_config();
  const auto ds = protocol::run_series(cfg, 0);
  estimation::RingdownOptions opt;
  opt.lines = {cfg.detection.antistokes_line_hz(), cfg.detection.stokes_line_hz()};
  for (auto _ : st) benchmark::DoNotOptimize(estimation::fit_ringdowns(ds.records, opt, exec_of(st)));
}

}  // namespace

BENCHMARK(BM_Welch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Synthesis)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunSeries)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FitRingdowns)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
