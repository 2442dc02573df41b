#pragma once

#include <Eigen/Dense>

#include "json.hpp"
#include "qgprobe/detection/detection_config.hpp"
#include "qgprobe/detection/spectrum.hpp"

namespace qgprobe::detection {

struct LorentzianLine {
  double center = 0.0;  // Hz
  double width = 0.0;   // Hz, FWHM
  double area = 0.0;    // units^2
  double center_err = 0.0;
  double width_err = 0.0;
  double area_err = 0.0;

  double density(double f_hz) const;
};

struct LorentzianFitOptions {
  double half_span_hz = 40e3;        // fit band around the midpoint of the two sidebands
  double coherent_mask_hz = 600.0;   // excluded half-width around each coherent line
  double initial_width_hz = 6e3;
  bool weighted_second_pass = true;  // reweight by 1/model^2 after an unweighted pass
};

/// Joint fit of two Lorentzians on a flat background. Parameter order in the
/// covariance: stokes (area, center, width), anti-Stokes (area, center, width), background.
struct LorentzianPairFit {
  LorentzianLine stokes;
  LorentzianLine antistokes;
  double background = 0.0;
  double background_err = 0.0;
  Eigen::MatrixXd covariance;
  double corrected_stokes_area = 0.0;
  double corrected_antistokes_area = 0.0;
  double ratio = 0.0;
  double ratio_err = 0.0;
  bool ratio_defined = false;  // R > 1, so n_bar = 1 / (R - 1) exists
  double n_bar = 0.0;
  double n_bar_err = 0.0;
  double reduced_chi2 = 0.0;
  int iterations = 0;
  std::size_t n_points = 0;
  std::vector<std::size_t> masked_bins;  // bins left out for the coherent lines

  /// corrected Stokes area minus corrected anti-Stokes area, with its standard error.
  double area_difference() const { return corrected_stokes_area - corrected_antistokes_area; }
  double area_difference_err() const;
  double model(double f_hz) const;
};

/// Throws WindowOutOfRange if the fit band leaves the spectrum, FitDiverged on solver failure.
LorentzianPairFit fit_lorentzian_pair(const SpectrumEstimate& spec, const DetectionConfig& det,
                                      const LorentzianFitOptions& opt = {});

struct CoherentPeak {
  double alpha2 = 0.0;
  double alpha2_err = 0.0;
  double peak_area = 0.0;     // corrected sum over both coherent lines, units^2
  double peak_area_err = 0.0;
  double lorentzian_area = 0.0;  // corrected Stokes + anti-Stokes areas
  bool resolved = false;         // peak area above 3 sigma of the background fluctuation
};

/// |alpha|^2 = (n + 1/2) * coherent peak area / Lorentzian area, with n from the fitted ratio.
/// With require_resolved, throws PeakNotResolved when the peak does not clear the noise.
CoherentPeak coherent_peak_analysis(const SpectrumEstimate& spec, const LorentzianPairFit& fit,
                                    const DetectionConfig& det, bool require_resolved = false);

nlohmann::json to_json(const LorentzianPairFit& fit);
nlohmann::json to_json(const CoherentPeak& peak);

}  // namespace qgprobe::detection
