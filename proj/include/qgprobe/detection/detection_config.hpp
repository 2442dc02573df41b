#pragma once

#include <numbers>

namespace qgprobe::detection {

/// Balanced heterodyne detection followed by a lock-in amplifier.
///
/// The local oscillator sits Delta_LO above the probe, so the Stokes sideband
/// of a motion at Omega lands at Omega + Delta_LO and the anti-Stokes one at
/// Omega - Delta_LO. The lock-in reference sits 4 kHz below the excitation, so
/// a motion at Omega_exc + 2 pi f_m shows up at 8 kHz - f_m (anti-Stokes) and
/// 16 kHz + f_m (Stokes) in the demodulated quadratures.
struct DetectionConfig {
  double delta_lo = 2.0 * std::numbers::pi * 12e3;         // rad/s
  double omega_exc = 2.0 * std::numbers::pi * 525.8e3;     // rad/s
  double lockin_ref = 2.0 * std::numbers::pi * 521.8e3;    // rad/s
  double lockin_bandwidth = 20e3;                          // Hz, -3 dB
  int lockin_filter_order = 4;
  int decimation = 8;
  double sample_rate = 2.56e6;   // Hz
  double background_psd = 1e-5;  // detector units^2 / Hz, one-sided
  double phonon_gain = 1.0;      // sideband power per phonon, detector units^2
  double c_stokes = 1.0;         // detuning-correction area factors
  double c_antistokes = 1.0;

  /// Demodulated line positions for f_m = 0, in Hz.
  double antistokes_line_hz() const;
  double stokes_line_hz() const;
  double output_rate() const { return sample_rate / decimation; }

  /// NyquistViolation unless sample_rate > 4 (Omega_m / 2 pi + 16 kHz);
  /// InvalidArgument for Delta_LO not well below Omega_m or non-positive corrections.
  void validate(double omega_m) const;
};

}  // namespace qgprobe::detection
