#include "qgprobe/detection/lorentzian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "qgprobe/error.hpp"
#include "qgprobe/fit/levmar.hpp"

namespace qgprobe::detection {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// p = [A_s, df_s, w_s, A_as, df_as, w_as, bg], centers as offsets from the nominal positions.
struct PairModel {
  double nominal_s = 0.0;
  double nominal_as = 0.0;

  static double lor(double area, double d, double w) { return area * w / (kTwoPi * (d * d + 0.25 * w * w)); }

  double value(const Eigen::VectorXd& p, double f) const {
    return lor(p[0], f - nominal_s - p[1], p[2]) + lor(p[3], f - nominal_as - p[4], p[5]) + p[6];
  }

  void gradient(const Eigen::VectorXd& p, double f, double* g) const {
    for (int line = 0; line < 2; ++line) {
      const int o = 3 * line;
      const double a = p[o], w = p[o + 2];
      const double d = f - (line == 0 ? nominal_s : nominal_as) - p[o + 1];
      const double den = d * d + 0.25 * w * w;
      g[o] = w / (kTwoPi * den);
      g[o + 1] = a * w * 2.0 * d / (kTwoPi * den * den);
      g[o + 2] = a * (den - 0.5 * w * w) / (kTwoPi * den * den);
    }
    g[6] = 1.0;
  }
};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

double coherent_stokes_hz(const DetectionConfig& det) { return (det.omega_exc + det.delta_lo) / kTwoPi; }
double coherent_antistokes_hz(const DetectionConfig& det) { return (det.omega_exc - det.delta_lo) / kTwoPi; }

}  // namespace

double LorentzianLine::density(double f_hz) const {
  const double d = f_hz - center;
  return area * width / (kTwoPi * (d * d + 0.25 * width * width));
}

double LorentzianPairFit::model(double f_hz) const {
  return stokes.density(f_hz) + antistokes.density(f_hz) + background;
}

double LorentzianPairFit::area_difference_err() const {
  if (covariance.rows() < 7) return 0.0;
  const double cs = stokes.area != 0.0 ? corrected_stokes_area / stokes.area : 1.0;
  const double ca = antistokes.area != 0.0 ? corrected_antistokes_area / antistokes.area : 1.0;
  const double v = cs * cs * covariance(0, 0) + ca * ca * covariance(3, 3) - 2.0 * cs * ca * covariance(0, 3);
  return std::sqrt(std::max(v, 0.0));
}

LorentzianPairFit fit_lorentzian_pair(const SpectrumEstimate& spec, const DetectionConfig& det,
                                      const LorentzianFitOptions& opt) {
  if (spec.size() < 16) throw Error(ErrorCode::InsufficientData, "spectrum too short to fit");
  const double f_s = coherent_stokes_hz(det);
  const double f_as = coherent_antistokes_hz(det);
  const double mid = 0.5 * (f_s + f_as);
  const double lo = mid - opt.half_span_hz, hi = mid + opt.half_span_hz;
  if (lo < spec.freqs.front() || hi > spec.freqs.back())
    throw Error(ErrorCode::WindowOutOfRange, "sideband fit band lies outside the spectrum");

  LorentzianPairFit out;
  std::vector<double> f, y;
  for (std::size_t k = spec.bin(lo); k <= spec.bin(hi); ++k) {
    const double fk = spec.freqs[k];
    if (std::abs(fk - f_s) <= opt.coherent_mask_hz || std::abs(fk - f_as) <= opt.coherent_mask_hz) {
      out.masked_bins.push_back(k);
      continue;
    }
    f.push_back(fk);
    y.push_back(spec.psd[k]);
  }
  const auto n = static_cast<Eigen::Index>(f.size());
  if (n < 20) throw Error(ErrorCode::InsufficientData, "too few unmasked bins in the fit band");

  // Background from the outer fifth of the band on both sides, heights near the nominal lines.
  std::vector<double> edge;
  const double edge_width = 0.2 * opt.half_span_hz;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] < lo + edge_width || f[i] > hi - edge_width) edge.push_back(y[i]);
  const double bg0 = median(edge);
  auto height_near = [&](double fc) {
    std::vector<double> v;
    for (std::size_t i = 0; i < f.size(); ++i)
      if (std::abs(f[i] - fc) < 0.25 * opt.initial_width_hz) v.push_back(y[i]);
    return std::max(median(v) - bg0, 0.0);
  };
  const double w0 = opt.initial_width_hz;
  Eigen::VectorXd p0(7);
  p0 << height_near(f_s) * std::numbers::pi * w0 / 2.0, 0.0, w0, height_near(f_as) * std::numbers::pi * w0 / 2.0, 0.0,
      w0, bg0;
  if (p0[0] <= 0.0) p0[0] = bg0 * w0;
  if (p0[3] <= 0.0) p0[3] = 0.1 * p0[0];

  PairModel model{f_s, f_as};
  Eigen::VectorXd weight = Eigen::VectorXd::Constant(n, 1.0 / std::max(median(y), 1e-300));

  fit::LeastSquaresProblem prob;
  prob.n_residuals = n;
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (Eigen::Index i = 0; i < n; ++i) r[i] = (y[static_cast<std::size_t>(i)] - model.value(p, f[static_cast<std::size_t>(i)])) * weight[i];
  };
  prob.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& jac) {
    double g[7];
    for (Eigen::Index i = 0; i < n; ++i) {
      model.gradient(p, f[static_cast<std::size_t>(i)], g);
      for (int c = 0; c < 7; ++c) jac(i, c) = -g[c] * weight[i];
    }
  };

  fit::LmResult res = fit::levenberg_marquardt(prob, p0);
  int iterations = res.iterations;
  if (opt.weighted_second_pass) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = model.value(res.params, f[static_cast<std::size_t>(i)]);
      if (!(m > 0.0)) throw Error(ErrorCode::FitDiverged, "sideband model is non-positive inside the fit band");
      weight[i] = 1.0 / m;
    }
    res = fit::levenberg_marquardt(prob, res.params);
    iterations += res.iterations;
  }
  const Eigen::VectorXd& p = res.params;
  if (!p.allFinite() || !(std::abs(p[2]) > 0.0) || !(std::abs(p[5]) > 0.0))
    throw Error(ErrorCode::FitDiverged, "Lorentzian pair fit did not converge to finite widths");

  // The model is invariant under (A, w) -> (-A, -w); report the positive-width branch.
  Eigen::VectorXd q = p;
  Eigen::MatrixXd cov = res.covariance;
  for (int line = 0; line < 2; ++line) {
    const int o = 3 * line;
    if (q[o + 2] < 0.0) {
      q[o] = -q[o];
      q[o + 2] = -q[o + 2];
      for (int idx : {o, o + 2}) {
        cov.row(idx) *= -1.0;
        cov.col(idx) *= -1.0;
      }
    }
  }
  auto err = [&](int i) { return std::sqrt(std::max(cov(i, i), 0.0)); };
  out.stokes = {f_s + q[1], q[2], q[0], err(1), err(2), err(0)};
  out.antistokes = {f_as + q[4], q[5], q[3], err(4), err(5), err(3)};
  out.background = q[6];
  out.background_err = err(6);
  out.covariance = cov;
  out.iterations = iterations;
  out.n_points = static_cast<std::size_t>(n);
  out.reduced_chi2 = res.residual_variance;

  out.corrected_stokes_area = det.c_stokes * out.stokes.area;
  out.corrected_antistokes_area = det.c_antistokes * out.antistokes.area;
  if (out.corrected_antistokes_area > 0.0) {
    out.ratio = out.corrected_stokes_area / out.corrected_antistokes_area;
    const double rel2 = cov(0, 0) / (q[0] * q[0]) + cov(3, 3) / (q[3] * q[3]) - 2.0 * cov(0, 3) / (q[0] * q[3]);
    out.ratio_err = std::abs(out.ratio) * std::sqrt(std::max(rel2, 0.0));
  } else {
    out.ratio = std::numeric_limits<double>::infinity();
    out.ratio_err = std::numeric_limits<double>::infinity();
  }
  out.ratio_defined = std::isfinite(out.ratio) && out.ratio > 1.0;
  if (out.ratio_defined) {
    out.n_bar = 1.0 / (out.ratio - 1.0);
    out.n_bar_err = out.ratio_err / ((out.ratio - 1.0) * (out.ratio - 1.0));
  } else {
    out.n_bar = std::numeric_limits<double>::quiet_NaN();
    out.n_bar_err = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

CoherentPeak coherent_peak_analysis(const SpectrumEstimate& spec, const LorentzianPairFit& fit,
                                    const DetectionConfig& det, bool require_resolved) {
  if (!fit.ratio_defined)
    throw Error(ErrorCode::RatioUndefined, "sideband ratio <= 1, occupancy needed for the peak ratio is undefined");
  if (fit.masked_bins.empty()) throw Error(ErrorCode::PeakNotResolved, "no bins around the coherent lines");
  const double f_s = coherent_stokes_hz(det);
  const double rel_sigma = std::sqrt(std::max(fit.reduced_chi2, 0.0));

  double area_s = 0.0, area_as = 0.0, var_s = 0.0, var_as = 0.0;
  for (std::size_t k : fit.masked_bins) {
    const double m = fit.model(spec.freqs[k]);
    const double excess = (spec.psd[k] - m) * spec.resolution;
    const double var = std::pow(rel_sigma * m * spec.resolution, 2);
    if (std::abs(spec.freqs[k] - f_s) < std::abs(spec.freqs[k] - (det.omega_exc - det.delta_lo) / kTwoPi)) {
      area_s += excess;
      var_s += var;
    } else {
      area_as += excess;
      var_as += var;
    }
  }
  CoherentPeak out;
  out.peak_area = det.c_stokes * area_s + det.c_antistokes * area_as;
  out.peak_area_err =
      std::sqrt(det.c_stokes * det.c_stokes * var_s + det.c_antistokes * det.c_antistokes * var_as);
  out.lorentzian_area = fit.corrected_stokes_area + fit.corrected_antistokes_area;
  out.resolved = out.peak_area > 3.0 * out.peak_area_err;
  if (require_resolved && !out.resolved)
    throw Error(ErrorCode::PeakNotResolved, "coherent peak does not exceed 3 sigma of the background");
  const double ratio = out.peak_area / out.lorentzian_area;
  out.alpha2 = (fit.n_bar + 0.5) * ratio;
  const double d_peak = (fit.n_bar + 0.5) * out.peak_area_err / out.lorentzian_area;
  const double d_n = ratio * fit.n_bar_err;
  out.alpha2_err = std::hypot(d_peak, d_n);
  return out;
}

nlohmann::json to_json(const LorentzianPairFit& fit) {
  auto line = [](const LorentzianLine& l) {
    return nlohmann::json{{"center_Hz", l.center}, {"center_err_Hz", l.center_err}, {"width_Hz", l.width},
                          {"width_err_Hz", l.width_err}, {"area", l.area}, {"area_err", l.area_err}};
  };
  nlohmann::json j;
  j["stokes"] = line(fit.stokes);
  j["antistokes"] = line(fit.antistokes);
  j["background_per_Hz"] = fit.background;
  j["background_err_per_Hz"] = fit.background_err;
  j["corrected_stokes_area"] = fit.corrected_stokes_area;
  j["corrected_antistokes_area"] = fit.corrected_antistokes_area;
  j["ratio"] = std::isfinite(fit.ratio) ? nlohmann::json(fit.ratio) : nlohmann::json(nullptr);
  j["ratio_err"] = std::isfinite(fit.ratio_err) ? nlohmann::json(fit.ratio_err) : nlohmann::json(nullptr);
  j["ratio_defined"] = fit.ratio_defined;
  j["n_bar"] = fit.ratio_defined ? nlohmann::json(fit.n_bar) : nlohmann::json(nullptr);
  j["n_bar_err"] = fit.ratio_defined ? nlohmann::json(fit.n_bar_err) : nlohmann::json(nullptr);
  j["area_difference"] = fit.area_difference();
  j["area_difference_err"] = fit.area_difference_err();
  j["reduced_chi2"] = fit.reduced_chi2;
  j["iterations"] = fit.iterations;
  j["n_points"] = fit.n_points;
  return j;
}

nlohmann::json to_json(const CoherentPeak& peak) {
  return {{"alpha2_phonons", peak.alpha2}, {"alpha2_err_phonons", peak.alpha2_err},
          {"peak_area", peak.peak_area},   {"peak_area_err", peak.peak_area_err},
          {"lorentzian_area", peak.lorentzian_area}, {"resolved", peak.resolved}};
}

}  // namespace qgprobe::detection
