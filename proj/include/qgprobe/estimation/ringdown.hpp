#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "json.hpp"
#include "qgprobe/detection/timeseries.hpp"
#include "qgprobe/error.hpp"
#include "qgprobe/fit/levmar.hpp"
#include "qgprobe/parallel.hpp"

namespace qgprobe::estimation {

using detection::QuadratureRecord;

struct FitWindow {
  double t_start = 0.0;  // s
  double t_end = 0.0;    // s
};

/// Parameters of the two-line ring-down model of the demodulated quadratures:
///   X = A e^{-t/tau} [cos th1 + B cos th2]
///   Y = A e^{-t/tau} [sin th1 - B sin th2]
///   th1 = 2 pi (f_as - f_m) t + phi,  th2 = 2 pi (f_s + f_m) t + phi + delta_phi
/// with f_as = 8 kHz and f_s = 16 kHz the demodulated sideband positions.
struct RingdownParams {
  double A = 1.0;
  double tau = 1e-3;  // s; negative for an anti-damped oscillation
  double f_m = 0.0;   // Hz
  double phi = 0.0;
  double B = 1.0;
  double delta_phi = 0.0;
};

struct LineFrequencies {
  double antistokes_hz = 8000.0;
  double stokes_hz = 16000.0;
};

void ringdown_model(const RingdownParams& p, double t, double& x, double& y, const LineFrequencies& lines = {});

/// d(X, Y) / d(f_m t): the sensitivity of the model to a phase advance of f_m t.
void ringdown_phase_derivative(const RingdownParams& p, double t, double& dx, double& dy,
                               const LineFrequencies& lines = {});

/// Noiseless record sampled at t0 + i dt.
QuadratureRecord generate_ringdown(const RingdownParams& p, double t0, double dt, std::size_t n,
                                   const LineFrequencies& lines = {});

struct RingdownOptions {
  FitWindow window{1e-4, 1e-3};
  bool fix_b_zero = false;       // single-line model, B = delta_phi = 0
  double f_search_hz = 1000.0;   // |f_m| range scanned for the initial guess
  LineFrequencies lines;
  fit::LmOptions lm;
};

/// Parameter order of the covariance: A, tau, f_m, phi, B, delta_phi.
struct RingdownFit {
  RingdownParams params;
  Eigen::MatrixXd covariance;  // 6x6; rows of parameters held fixed are zero
  FitWindow window;
  double gamma_internal = 0.0;  // 1/tau, the fitted rate
  double gamma_internal_err = 0.0;
  double cost = 0.0;
  double reduced_chi2 = 0.0;
  std::size_t n_samples = 0;
  int iterations = 0;
  bool converged = false;
  bool b_fixed = false;
  std::string stop_reason;

  /// 2 / tau, rad/s.
  double gamma_eff() const { return 2.0 * gamma_internal; }
  double gamma_eff_err() const { return 2.0 * gamma_internal_err; }
  /// Gamma_eff / 2 pi in Hz.
  double gamma_eff_hz() const;
  double gamma_eff_hz_err() const;
  double err(int i) const;
};

/// Joint least squares of both quadratures inside the window. Initial guess:
/// log-envelope regression for the decay rate, a variable-projection scan over
/// f_m, golden-section refinement, then Levenberg-Marquardt on all parameters.
/// Throws WindowOutOfRange and FitDiverged.
RingdownFit fit_ringdown(const QuadratureRecord& rec, const RingdownOptions& opt = {});

struct RingdownOutcome {
  bool ok = false;
  RingdownFit fit;
  ErrorCode code = ErrorCode::FitDiverged;
  std::string message;
};

/// Independent fits of many records; the parallel path distributes records over threads.
std::vector<RingdownOutcome> fit_ringdowns(const std::vector<QuadratureRecord>& records, const RingdownOptions& opt,
                                           Execution exec = Execution::Parallel);

nlohmann::json to_json(const RingdownFit& fit);

}  // namespace qgprobe::estimation
