#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "qgprobe/detection/spectrum.hpp"
#include "qgprobe/detection/timeseries.hpp"
#include "qgprobe/parallel.hpp"
#include "qgprobe/protocol/config.hpp"
#include "qgprobe/protocol/cycle.hpp"

namespace qgprobe::protocol {

/// One series: group-averaged quadrature records in cycle order.
struct Dataset {
  SeriesPlan plan;
  std::int64_t group_size = 1;
  std::vector<detection::QuadratureRecord> records;  // cycle_index = first cycle of the group
  std::vector<detection::TimeSeries> raw;            // first storage.raw_cycles cycles, if requested
  std::optional<detection::SpectrumEstimate> stationary;  // pump-on heterodyne spectrum
  nlohmann::json config_snapshot;
  detection::Provenance provenance;

  std::int64_t series() const { return plan.series; }
  double alpha2() const { return plan.pump_state.alpha2(); }
  /// Throws InvalidArgument unless there is one record per group with consecutive cycle indices.
  void validate(std::int64_t records_per_series) const;
};

/// Runs all cycles of a series. Groups are distributed over threads; every
/// cycle draws from its own derived seed, so the output does not depend on the
/// thread count and matches the serial path bit for bit.
Dataset run_series(const CampaignConfig& cfg, std::int64_t series, Execution exec = Execution::Parallel);

/// Pump-on heterodyne spectrum for thermometry, streamed through the Welch estimator.
detection::SpectrumEstimate stationary_spectrum(const CampaignConfig& cfg, const SeriesPlan& plan, double duration,
                                                Execution exec = Execution::Parallel);

/// cfg.n_series series in order. Throws InvalidConfig for n_series < 1.
std::vector<Dataset> run_campaign(const CampaignConfig& cfg, Execution exec = Execution::Parallel);

}  // namespace qgprobe::protocol
