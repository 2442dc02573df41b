#pragma once

// Statistical model of the cavity-oscillator interaction: optical damping and
// spring, cold-damping occupancy, re-thermalization after the cooling beam is
// switched off, sideband weights and the coherent excitation amplitude.

#include <complex>
#include <string>

#include "json.hpp"
#include "qgprobe/dynamics.hpp"

namespace qgprobe::optomech {

using dynamics::MechanicalMode;
using dynamics::PhysicalConstants;

struct OpticalCavity {
  double kappa = 2.0 * 3.14159265358979323846 * 2.1e6;           // rad/s
  double probe_detuning = 0.0;                                    // rad/s
  double cool_detuning = -2.0 * 3.14159265358979323846 * 700e3;  // rad/s
  double coupling_rate = 2.0 * 3.14159265358979323846 * 6e3;     // rad/s, effective probe coupling

  void validate() const;
};

struct CooledState {
  double n_bar = 0.0;
  double gamma_eff = 0.0;  // rad/s
  double omega_eff = 0.0;  // rad/s
  std::complex<double> alpha{0.0, 0.0};

  double alpha2() const { return std::norm(alpha); }
  void validate(const MechanicalMode& mode) const;
};

struct OpticalResponse {
  double gamma_opt = 0.0;    // rad/s
  double delta_omega = 0.0;  // rad/s
};

/// 2 kappa Omega_m / [(kappa/2)^2 - Omega_m^2]: ratio gamma_opt / delta_omega for small detuning.
double spring_damping_slope(double kappa, double omega_m);

/// Small-detuning optical damping and spring of a beam with the cavity's coupling rate.
/// gamma_opt = -4 g^2 kappa Omega Delta / (Omega^2 + kappa^2/4)^2 (red detuning damps);
/// delta_omega is gamma_opt / spring_damping_slope, so the pair obeys the proportionality exactly.
/// Throws OutsideLinearRegime for |detuning| > 0.2 kappa.
OpticalResponse optical_damping_and_spring(const OpticalCavity& cavity, const MechanicalMode& mode, double detuning);

inline constexpr double kMaxLinearDetuning = 0.2;  // in units of kappa

/// Coupling rate that produces the requested optical damping at `detuning`.
double coupling_for_damping(const OpticalCavity& cavity, const MechanicalMode& mode, double detuning,
                            double gamma_opt);

/// n_th Gamma_m / Gamma_eff + n_backaction. Throws InvalidDamping for gamma_eff < gamma_m.
double cooled_occupancy(const MechanicalMode& mode, double gamma_eff, double n_backaction,
                        const PhysicalConstants& c = {});

/// Back-action occupancy that makes cooled_occupancy hit `n_target`; InvalidArgument if unreachable.
double backaction_for_target(const MechanicalMode& mode, double gamma_eff, double n_target,
                             const PhysicalConstants& c = {});

/// n(0) e^{-Gamma_m t} + n_th (1 - e^{-Gamma_m t})
double rethermalize(double n0, const MechanicalMode& mode, double t, const PhysicalConstants& c = {});

/// n(0) + (k_B T / hbar Q) t
double rethermalize_short_time(double n0, const MechanicalMode& mode, double t, const PhysicalConstants& c = {});

/// k_B T / (hbar Q), phonons per second gained right after the cooling is removed.
double rethermalization_rate(const MechanicalMode& mode, const PhysicalConstants& c = {});

struct SidebandWeights {
  double stokes = 0.0;
  double antistokes = 0.0;

  /// (n+1)/n. Throws RatioUndefined when the anti-Stokes weight is zero.
  double ratio() const;
};

SidebandWeights sideband_weights(double n_bar);

/// n = 1 / (R - 1). Throws RatioUndefined for R <= 1.
double occupancy_from_ratio(double ratio);

struct CoherentCalibration {
  double reference_db = -60.0;
  double reference_alpha2 = 35.0;
  double max_db = -30.0;
};

/// |alpha|^2 for an excitation tone `power_ratio_db` below the cooling tone, linear in power.
/// Throws ExcitationTooStrong above cal.max_db.
double coherent_amplitude(double power_ratio_db, const CoherentCalibration& cal = {});

/// Copy of `reference` with |alpha|^2 set from the excitation level; keeps the phase of alpha.
CooledState with_excitation(const CooledState& reference, double power_ratio_db, const CoherentCalibration& cal = {});

/// Key/value export of (n_bar, Gamma_eff, Omega_eff, |alpha|^2, purity), SI units.
nlohmann::json operating_point_report(const CooledState& state);

}  // namespace qgprobe::optomech
