#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgprobe/detection/detection_config.hpp"
#include "qgprobe/dynamics.hpp"
#include "qgprobe/estimation/bound.hpp"
#include "qgprobe/estimation/ringdown.hpp"
#include "qgprobe/estimation/shift.hpp"
#include "qgprobe/optomech.hpp"

namespace qgprobe::protocol {

enum class Scenario {
  Protocol1Decay,   // excitation off, cooling stays on: decay at Gamma_eff, constant occupancy
  Protocol2Pulsed,  // cooling and excitation off: probe-only damping, re-thermalization
};

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& name);

/// Time dependence of the deformation shift after switch-off.
enum class ShiftModel {
  ScenarioDefault,   // Amplitude for protocol 1, PurityGated for protocol 2
  Amplitude,         // classical amplitude law with the ensemble amplitude at time t
  PurityGated,       // shift at switch-off scaled by purity(t) / purity(0)
};

std::string to_string(ShiftModel m);
ShiftModel parse_shift_model(const std::string& name);

struct ProtocolSchedule {
  double pump_on = 30e-3;  // s
  double measure = 10e-3;  // s
  double cycle = 40e-3;    // s
  std::int64_t cycles_per_series = 1250;
  double series_duration = 50.0;  // s
  std::int64_t group_size = 10;
  double preroll = 1e-3;  // s of the pump-on segment simulated before switch-off

  std::int64_t records_per_series() const { return cycles_per_series / group_size; }
  /// Throws InvalidConfig for broken bookkeeping: cycle != pump_on + measure,
  /// cycles_per_series != series_duration / cycle, group size not dividing the cycles,
  /// preroll outside (0, pump_on].
  void validate() const;
  /// Soft checks: pump_on Gamma_eff >> 1 and measure Gamma_m << 1.
  std::vector<std::string> warnings(double gamma_eff, double gamma_m) const;
};

struct OperatingTargets {
  double n_bar = 5.0;
  double gamma_eff = 2.0 * 3.14159265358979323846 * 6e3;  // rad/s
  double alpha2 = 35.0;
  double pump_frequency_offset = 0.0;  // Hz, (Omega_eff - Omega_exc) / 2 pi with the pump on
};

/// Burst of other membrane modes rung up by the switching; far outside the lock-in band.
struct SwitchOffTones {
  std::vector<double> frequencies{350e3, 760e3, 1.1e6};  // Hz
  double amplitude = 3.0;  // detector units
  double decay = 2e-3;     // s
};

struct StorageOptions {
  std::int64_t raw_cycles = 0;     // raw heterodyne series kept for the first cycles of each series
  double stationary_spectrum = 2.0;  // s of pump-on record synthesized for thermometry; 0 disables
  double spectrum_resolution = 50.0;  // Hz
};

struct AnalysisOptions {
  estimation::FitWindow base_window{1e-4, 1e-3};
  estimation::FitWindow early_window{0.0, 50e-6};
  double f_search_hz = 1000.0;
  bool fix_b_zero = false;
  int histogram_bins = 0;
  estimation::AmplitudeConvention convention = estimation::AmplitudeConvention::MeanSquareDisplacement;

  estimation::RingdownOptions ringdown() const;
  estimation::ShiftOptions shift() const;
};

struct CampaignConfig {
  dynamics::MechanicalMode mode;
  optomech::OpticalCavity cavity;
  dynamics::PhysicalConstants constants;
  double beta0 = 0.0;
  ShiftModel shift_model = ShiftModel::ScenarioDefault;
  detection::DetectionConfig detection;
  double excitation_offset = 0.0;  // Hz, (Omega_exc - Omega_m) / 2 pi
  double lockin_offset = -4e3;     // Hz, lock-in reference relative to the excitation
  ProtocolSchedule schedule;
  OperatingTargets targets;
  Scenario scenario = Scenario::Protocol2Pulsed;
  std::uint64_t seed = 1;
  std::int64_t n_series = 2;
  std::vector<double> detuning_sweep;    // Hz, probe detuning / 2 pi per series
  std::vector<double> excitation_sweep;  // dB per series
  SwitchOffTones switch_off;
  StorageOptions storage;
  AnalysisOptions analysis;

  /// Recomputes the excitation and reference frequencies of `detection` from the offsets.
  void sync_detection();
  dynamics::DeformationParams deformation() const { return dynamics::DeformationParams(beta0, constants); }
  /// Throws InvalidConfig (wrapping the underlying message) on any inconsistency.
  void validate() const;
  std::vector<std::string> warnings() const;
  ShiftModel effective_shift_model() const;

  nlohmann::json to_json() const;
  static CampaignConfig from_json(const nlohmann::json& j);
  /// FNV-1a 64 of the canonical JSON dump, 16 hex digits.
  std::string hash() const;
};

CampaignConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const CampaignConfig& cfg);

std::string fnv1a_hex(const std::string& data);

}  // namespace qgprobe::protocol
