#include "qgprobe/optomech.hpp"

#include <cmath>
#include <numbers>

#include "qgprobe/error.hpp"

namespace qgprobe::optomech {

void OpticalCavity::validate() const {
  if (!(kappa > 0.0)) throw Error(ErrorCode::InvalidArgument, "cavity linewidth must be > 0");
  if (!(coupling_rate >= 0.0)) throw Error(ErrorCode::InvalidArgument, "coupling rate must be >= 0");
}

void CooledState::validate(const MechanicalMode& mode) const {
  if (!(n_bar >= 0.0)) throw Error(ErrorCode::NegativeOccupancy, "n_bar must be >= 0");
  if (!(gamma_eff >= mode.gamma_m)) throw Error(ErrorCode::InvalidDamping, "gamma_eff must be >= gamma_m");
}

double spring_damping_slope(double kappa, double omega_m) {
  const double half = 0.5 * kappa;
  return 2.0 * kappa * omega_m / (half * half - omega_m * omega_m);
}

OpticalResponse optical_damping_and_spring(const OpticalCavity& cavity, const MechanicalMode& mode, double detuning) {
  cavity.validate();
  if (std::abs(detuning) > kMaxLinearDetuning * cavity.kappa)
    throw Error(ErrorCode::OutsideLinearRegime, "|detuning| exceeds 0.2 kappa");
  const double g2 = cavity.coupling_rate * cavity.coupling_rate;
  const double w = mode.omega_m;
  const double denom = w * w + 0.25 * cavity.kappa * cavity.kappa;
  OpticalResponse r;
  r.gamma_opt = -4.0 * g2 * cavity.kappa * w * detuning / (denom * denom);
  r.delta_omega = r.gamma_opt / spring_damping_slope(cavity.kappa, w);
  return r;
}

double coupling_for_damping(const OpticalCavity& cavity, const MechanicalMode& mode, double detuning,
                            double gamma_opt) {
  OpticalCavity unit = cavity;
  unit.coupling_rate = 1.0;
  const double per_g2 = optical_damping_and_spring(unit, mode, detuning).gamma_opt;
  if (per_g2 == 0.0 || gamma_opt / per_g2 < 0.0)
    throw Error(ErrorCode::InvalidArgument, "requested damping has the wrong sign for this detuning");
  return std::sqrt(gamma_opt / per_g2);
}

double cooled_occupancy(const MechanicalMode& mode, double gamma_eff, double n_backaction,
                        const PhysicalConstants& c) {
  if (!(gamma_eff >= mode.gamma_m)) throw Error(ErrorCode::InvalidDamping, "gamma_eff must be >= gamma_m");
  if (!(n_backaction >= 0.0)) throw Error(ErrorCode::NegativeOccupancy, "back-action occupancy must be >= 0");
  return mode.thermal_occupancy(c) * mode.gamma_m / gamma_eff + n_backaction;
}

double backaction_for_target(const MechanicalMode& mode, double gamma_eff, double n_target,
                             const PhysicalConstants& c) {
  const double residual = cooled_occupancy(mode, gamma_eff, 0.0, c);
  if (n_target < residual)
    throw Error(ErrorCode::InvalidArgument, "target occupancy " + std::to_string(n_target) +
                                                " is below the thermal floor " + std::to_string(residual));
  return n_target - residual;
}

double rethermalize(double n0, const MechanicalMode& mode, double t, const PhysicalConstants& c) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t must be >= 0");
  const double decay = std::exp(-mode.gamma_m * t);
  return n0 * decay + mode.thermal_occupancy(c) * (1.0 - decay);
}

double rethermalize_short_time(double n0, const MechanicalMode& mode, double t, const PhysicalConstants& c) {
  if (!(t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t must be >= 0");
  return n0 + rethermalization_rate(mode, c) * t;
}

double rethermalization_rate(const MechanicalMode& mode, const PhysicalConstants& c) {
  return c.k_B * mode.T_bath / (c.hbar * mode.quality());
}

double SidebandWeights::ratio() const {
  if (antistokes <= 0.0) throw Error(ErrorCode::RatioUndefined, "anti-Stokes weight is zero");
  return stokes / antistokes;
}

SidebandWeights sideband_weights(double n_bar) {
  if (!(n_bar >= 0.0)) throw Error(ErrorCode::NegativeOccupancy, "n_bar must be >= 0");
  return {n_bar + 1.0, n_bar};
}

double occupancy_from_ratio(double ratio) {
  if (!(ratio > 1.0)) throw Error(ErrorCode::RatioUndefined, "sideband ratio must exceed 1");
  return 1.0 / (ratio - 1.0);
}

double coherent_amplitude(double power_ratio_db, const CoherentCalibration& cal) {
  if (power_ratio_db > cal.max_db)
    throw Error(ErrorCode::ExcitationTooStrong, "excitation above " + std::to_string(cal.max_db) + " dB");
  if (std::isinf(power_ratio_db) && power_ratio_db < 0.0) return 0.0;
  return cal.reference_alpha2 * std::pow(10.0, (power_ratio_db - cal.reference_db) / 10.0);
}

CooledState with_excitation(const CooledState& reference, double power_ratio_db, const CoherentCalibration& cal) {
  CooledState out = reference;
  const double mag = std::sqrt(coherent_amplitude(power_ratio_db, cal));
  const double phase = std::abs(reference.alpha) > 0.0 ? std::arg(reference.alpha) : 0.0;
  out.alpha = std::polar(mag, phase);
  return out;
}

nlohmann::json operating_point_report(const CooledState& s) {
  nlohmann::json j;
  j["n_bar"] = s.n_bar;
  j["gamma_eff_rad_per_s"] = s.gamma_eff;
  j["gamma_eff_over_2pi_Hz"] = s.gamma_eff / (2.0 * std::numbers::pi);
  j["omega_eff_rad_per_s"] = s.omega_eff;
  j["omega_eff_over_2pi_Hz"] = s.omega_eff / (2.0 * std::numbers::pi);
  j["alpha2_phonons"] = s.alpha2();
  j["purity"] = dynamics::purity(s.n_bar);
  return j;
}

}  // namespace qgprobe::optomech
