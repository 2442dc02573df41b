#include "qgprobe/protocol/campaign.hpp"

#include <exception>

#include "qgprobe/detection/synthesis.hpp"
#include "qgprobe/error.hpp"

namespace qgprobe::protocol {

void Dataset::validate(std::int64_t records_per_series) const {
  if (static_cast<std::int64_t>(records.size()) != records_per_series)
    throw Error(ErrorCode::InvalidArgument, "dataset record count does not match the schedule");
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].validate();
    if (records[i].cycle_index != static_cast<std::int64_t>(i) * group_size)
      throw Error(ErrorCode::InvalidArgument, "records are not in cycle order");
  }
}

Dataset run_series(const CampaignConfig& cfg, std::int64_t series, Execution exec) {
  Dataset ds;
  ds.plan = plan_series(cfg, series);
  ds.group_size = cfg.schedule.group_size;
  ds.config_snapshot = cfg.to_json();
  ds.provenance = {cfg.seed, ds.plan.config_hash, QGPROBE_VERSION};

  const std::int64_t n_groups = cfg.schedule.records_per_series();
  const std::int64_t gs = cfg.schedule.group_size;
  const std::int64_t raw_cycles = cfg.storage.raw_cycles;
  ds.records.resize(static_cast<std::size_t>(n_groups));
  std::vector<std::vector<detection::TimeSeries>> raw(static_cast<std::size_t>(n_groups));
  std::exception_ptr failure;

#pragma omp parallel for schedule(dynamic) if (exec == Execution::Parallel)
  for (std::int64_t g = 0; g < n_groups; ++g) {
    try {
      std::vector<detection::QuadratureRecord> cycles;
      cycles.reserve(static_cast<std::size_t>(gs));
      for (std::int64_t k = 0; k < gs; ++k) {
        const std::int64_t c = g * gs + k;
        CycleOutput out = run_cycle(cfg, ds.plan, c, cycle_seed(cfg, series, c), c < raw_cycles);
        if (out.raw) raw[static_cast<std::size_t>(g)].push_back(std::move(*out.raw));
        cycles.push_back(std::move(out.record));
      }
      auto& rec = ds.records[static_cast<std::size_t>(g)];
      rec = detection::average_records(cycles);
      rec.cycle_index = g * gs;
      rec.x.provenance = rec.y.provenance = {cfg.seed, ds.plan.config_hash, QGPROBE_VERSION};
    } catch (...) {
#pragma omp critical(qgprobe_series_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  for (auto& r : raw)
    for (auto& ts : r) ds.raw.push_back(std::move(ts));

  if (cfg.storage.stationary_spectrum > 0.0)
    ds.stationary = stationary_spectrum(cfg, ds.plan, cfg.storage.stationary_spectrum, exec);
  return ds;
}

detection::SpectrumEstimate stationary_spectrum(const CampaignConfig& cfg, const SeriesPlan& plan, double duration,
                                                Execution exec) {
  const auto welch = detection::WelchOptions::for_resolution(cfg.storage.spectrum_resolution, cfg.detection.sample_rate);
  const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(plan.series), 0x57a7105a4bULL});
  auto s = detection::synthesize_bhd_spectrum(plan.pump_state, cfg.mode, cfg.cavity, cfg.detection, duration, seed,
                                              welch, exec);
  s.provenance.config_hash = plan.config_hash;
  return s;
}

std::vector<Dataset> run_campaign(const CampaignConfig& cfg, Execution exec) {
  if (cfg.n_series < 1) throw Error(ErrorCode::InvalidConfig, "n_series must be >= 1");
  std::vector<Dataset> out;
  out.reserve(static_cast<std::size_t>(cfg.n_series));
  for (std::int64_t s = 0; s < cfg.n_series; ++s) out.push_back(run_series(cfg, s, exec));
  return out;
}

}  // namespace qgprobe::protocol
