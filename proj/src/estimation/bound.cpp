#include "qgprobe/estimation/bound.hpp"

#include <cmath>

#include "qgprobe/error.hpp"

namespace qgprobe::estimation {

std::string to_string(AmplitudeConvention c) {
  return c == AmplitudeConvention::MeanSquareDisplacement ? "mean-square-displacement" : "coherent-only";
}

AmplitudeConvention parse_convention(const std::string& name) {
  if (name == "mean-square-displacement" || name == "msd") return AmplitudeConvention::MeanSquareDisplacement;
  if (name == "coherent-only" || name == "coherent") return AmplitudeConvention::CoherentOnly;
  throw Error(ErrorCode::InvalidArgument, "unknown amplitude convention '" + name + "'");
}

double amplitude_squared(AmplitudeConvention conv, const dynamics::MechanicalMode& mode, double n_bar, double alpha2,
                         const dynamics::PhysicalConstants& c) {
  const double x2 = std::pow(mode.x_zpf(c), 2);
  if (conv == AmplitudeConvention::CoherentOnly) return 4.0 * x2 * alpha2;
  return 2.0 * x2 * (2.0 * alpha2 + 2.0 * n_bar + 1.0);
}

double epsilon_for(double beta0, AmplitudeConvention conv, const dynamics::MechanicalMode& mode, double n_bar,
                   double alpha2, const dynamics::PhysicalConstants& c) {
  const dynamics::DeformationParams d(beta0, c);
  return dynamics::amplitude_parameter(mode, d, std::sqrt(amplitude_squared(conv, mode, n_bar, alpha2, c)));
}

double predicted_shift_hz(double beta0, AmplitudeConvention conv, const dynamics::MechanicalMode& mode, double n_bar,
                          double alpha2, const dynamics::PhysicalConstants& c) {
  const double eps = epsilon_for(beta0, conv, mode, n_bar, alpha2, c);
  return mode.frequency_hz() * std::expm1(0.5 * std::log1p(eps));
}

double beta_for_shift(double shift_hz, AmplitudeConvention conv, const dynamics::MechanicalMode& mode, double n_bar,
                      double alpha2, const dynamics::PhysicalConstants& c) {
  const double ratio = shift_hz / mode.frequency_hz();
  const double eps = ratio * (2.0 + ratio);
  if (eps < 0.0) throw Error(ErrorCode::InvalidArgument, "a negative shift has no beta0 >= 0");
  if (eps > dynamics::kMaxPerturbativeEpsilon)
    throw Error(ErrorCode::OutsidePerturbativeRegime, "requested shift needs epsilon > 0.1");
  const double per_beta = epsilon_for(1.0, conv, mode, n_bar, alpha2, c);
  return eps / per_beta;
}

BetaBound beta_bound(const ShiftStatistics& stats, const BoundInputs& in) {
  if (!in.calibrated || !(in.alpha2 > 0.0))
    throw Error(ErrorCode::UncalibratedCampaign, "bound needs a calibrated campaign with |alpha|^2 > 0");
  if (stats.n_samples < 2) throw Error(ErrorCode::TooFewSamples, "need at least two shift estimates");
  BetaBound b;
  b.convention = in.convention;
  b.delta_f_max_hz = std::abs(stats.mean) + 2.0 * stats.sem();
  b.epsilon_max = 2.0 * b.delta_f_max_hz / in.mode.frequency_hz();
  if (b.epsilon_max > dynamics::kMaxPerturbativeEpsilon)
    throw Error(ErrorCode::OutsidePerturbativeRegime, "shift limit corresponds to epsilon > 0.1");
  b.amplitude_m2 = amplitude_squared(in.convention, in.mode, in.operating.n_bar, in.alpha2, in.constants);
  const double hbar = in.constants.hbar, lp = in.constants.L_p;
  const double m = in.mode.mass, w = in.mode.omega_m;
  b.beta0_max = b.epsilon_max * hbar * hbar / (lp * lp * m * m * w * w * b.amplitude_m2);
  b.degenerate = b.delta_f_max_hz == 0.0;
  return b;
}

nlohmann::json to_json(const BetaBound& b) {
  return {{"beta0_max", b.beta0_max},       {"delta_f_max_Hz", b.delta_f_max_hz},
          {"epsilon_max", b.epsilon_max},   {"amplitude_squared_m2", b.amplitude_m2},
          {"convention", to_string(b.convention)}, {"degenerate", b.degenerate}};
}

}  // namespace qgprobe::estimation
