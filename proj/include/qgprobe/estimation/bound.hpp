#pragma once

#include <string>

#include "json.hpp"
#include "qgprobe/dynamics.hpp"
#include "qgprobe/estimation/statistics.hpp"
#include "qgprobe/optomech.hpp"

namespace qgprobe::estimation {

/// How the oscillation amplitude entering epsilon = beta_tilde m^2 Omega^2 A^2 is defined.
enum class AmplitudeConvention {
  /// A^2 = 2 x_zpf^2 (2 |alpha|^2 + 2 n + 1): twice the mean-square displacement.
  MeanSquareDisplacement,
  /// A^2 = 4 x_zpf^2 |alpha|^2: peak displacement of the coherent part only.
  CoherentOnly,
};

std::string to_string(AmplitudeConvention c);
/// Accepts "mean-square-displacement" and "coherent-only". Throws InvalidArgument.
AmplitudeConvention parse_convention(const std::string& name);

/// Displacement amplitude squared, m^2.
double amplitude_squared(AmplitudeConvention conv, const dynamics::MechanicalMode& mode, double n_bar, double alpha2,
                         const dynamics::PhysicalConstants& c = {});

/// epsilon for a given beta0.
double epsilon_for(double beta0, AmplitudeConvention conv, const dynamics::MechanicalMode& mode, double n_bar,
                   double alpha2, const dynamics::PhysicalConstants& c = {});

/// Frequency shift f_m (sqrt(1 + eps) - 1) in Hz predicted for beta0.
double predicted_shift_hz(double beta0, AmplitudeConvention conv, const dynamics::MechanicalMode& mode, double n_bar,
                          double alpha2, const dynamics::PhysicalConstants& c = {});

/// Inverse of predicted_shift_hz. Throws OutsidePerturbativeRegime when the shift needs eps > 0.1.
double beta_for_shift(double shift_hz, AmplitudeConvention conv, const dynamics::MechanicalMode& mode, double n_bar,
                      double alpha2, const dynamics::PhysicalConstants& c = {});

struct BoundInputs {
  optomech::CooledState operating;
  dynamics::MechanicalMode mode;
  dynamics::PhysicalConstants constants;
  double alpha2 = 0.0;
  bool calibrated = true;
  AmplitudeConvention convention = AmplitudeConvention::MeanSquareDisplacement;
};

struct BetaBound {
  double beta0_max = 0.0;
  double delta_f_max_hz = 0.0;  // |mean| + 2 std / sqrt(n)
  double epsilon_max = 0.0;     // 2 delta_f_max / f_m
  double amplitude_m2 = 0.0;
  AmplitudeConvention convention = AmplitudeConvention::MeanSquareDisplacement;
  bool degenerate = false;      // zero shift limit, bound is 0
};

/// Throws UncalibratedCampaign when the campaign is not calibrated or |alpha|^2 <= 0,
/// OutsidePerturbativeRegime when epsilon_max > 0.1.
BetaBound beta_bound(const ShiftStatistics& stats, const BoundInputs& in);

nlohmann::json to_json(const BetaBound& b);

}  // namespace qgprobe::estimation
