#pragma once

#include <cstdint>

#include "qgprobe/detection/detection_config.hpp"
#include "qgprobe/detection/spectrum.hpp"
#include "qgprobe/detection/timeseries.hpp"
#include "qgprobe/optomech.hpp"
#include "qgprobe/parallel.hpp"

namespace qgprobe::detection {

/// Spectral content of the stationary heterodyne signal, before detuning correction.
/// Areas are in detector units^2, positions in Hz.
struct BhdLines {
  double stokes_hz = 0.0;      // (Omega_eff + Delta_LO) / 2 pi
  double antistokes_hz = 0.0;  // (Omega_eff - Delta_LO) / 2 pi
  double width_hz = 0.0;       // Gamma_eff / 2 pi, FWHM
  double stokes_area = 0.0;    // g (n + 1) / c_s
  double antistokes_area = 0.0;  // g n / c_as
  double coherent_stokes_hz = 0.0;      // (Omega_exc + Delta_LO) / 2 pi
  double coherent_antistokes_hz = 0.0;  // (Omega_exc - Delta_LO) / 2 pi
  double coherent_stokes_power = 0.0;   // g |alpha|^2 / c_s
  double coherent_antistokes_power = 0.0;
  double background_psd = 0.0;  // one-sided, flat

  /// Expected one-sided PSD of the continuous part at f.
  double continuum_psd(double f_hz) const;
};

BhdLines bhd_lines(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                   const DetectionConfig& det);

/// Samples per independently seeded synthesis block.
inline constexpr std::size_t kSynthesisBlock = 65536;

/// Stationary heterodyne output: two complex Ornstein-Uhlenbeck envelopes
/// (Stokes, anti-Stokes) with exact discretization, two coherent tones and white
/// background. Blocks are generated in parallel from zero state and the true
/// initial condition of each block is propagated afterwards, so the result
/// matches the serial recursion to rounding.
/// Throws NyquistViolation and DurationTooShort (duration * Gamma_eff < 10).
TimeSeries synthesize_bhd(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                          const optomech::OpticalCavity& cavity, const DetectionConfig& det, double duration,
                          std::uint64_t seed, Execution exec = Execution::Parallel);

/// Sample-by-sample recursion with the same random streams.
TimeSeries synthesize_bhd_reference(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                                    const optomech::OpticalCavity& cavity, const DetectionConfig& det,
                                    double duration, std::uint64_t seed);

/// Streams the synthesis straight into a Welch estimator, for records too long to hold in memory.
SpectrumEstimate synthesize_bhd_spectrum(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                                         const optomech::OpticalCavity& cavity, const DetectionConfig& det,
                                         double duration, std::uint64_t seed, const WelchOptions& welch,
                                         Execution exec = Execution::Parallel);

}  // namespace qgprobe::detection
