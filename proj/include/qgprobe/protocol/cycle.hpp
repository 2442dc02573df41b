#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>

#include "qgprobe/detection/timeseries.hpp"
#include "qgprobe/optomech.hpp"
#include "qgprobe/protocol/config.hpp"

namespace qgprobe::protocol {

/// Everything that is fixed for one series: operating point and post-switch dynamics.
struct SeriesPlan {
  std::int64_t series = 0;
  double probe_detuning = 0.0;  // rad/s
  optomech::CooledState pump_state;     // stationary state with the pump on
  optomech::OpticalResponse probe;      // probe-only optical damping and spring
  double post_gamma = 0.0;              // rad/s, energy decay rate after switch-off
  double post_diffusion = 0.0;          // phonons / s fed by the bath after switch-off
  double post_frequency_offset = 0.0;   // Hz, f_m = (Omega_post - Omega_exc) / 2 pi
  double excitation_phase = 0.0;        // rad, held for every cycle of the series
  std::string config_hash;
};

/// Throws InvalidConfig for an invalid configuration or series index.
SeriesPlan plan_series(const CampaignConfig& cfg, std::int64_t series);

/// Mean occupancy after switch-off: n0 e^{-G t} + D (1 - e^{-G t}) / G (D t for G = 0).
double post_switch_occupancy(const SeriesPlan& plan, double t);

/// Deformation frequency shift (rad/s) at time t >= 0 after switch-off. The amplitude model
/// follows the ensemble amplitude; the purity-gated model scales the switch-off shift by
/// purity(t) / purity(0), so it fades as the mode re-thermalizes.
double deformation_shift(const CampaignConfig& cfg, const SeriesPlan& plan, double t);

struct CycleOutput {
  detection::QuadratureRecord record;  // t = 0 at switch-off, spans schedule.measure
  std::optional<detection::TimeSeries> raw;  // heterodyne output including the preroll
};

/// One measurement cycle: the last `preroll` of the pump-on stage followed by the
/// switch-off and the measurement segment, synthesized at the detector sample rate
/// and demodulated by the lock-in.
CycleOutput run_cycle(const CampaignConfig& cfg, const SeriesPlan& plan, std::int64_t cycle_index,
                      std::uint64_t seed, bool keep_raw = false);

/// Seed of a cycle inside a campaign.
std::uint64_t cycle_seed(const CampaignConfig& cfg, std::int64_t series, std::int64_t cycle_index);

}  // namespace qgprobe::protocol
