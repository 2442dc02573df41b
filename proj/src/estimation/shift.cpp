#include "qgprobe/estimation/shift.hpp"

#include <cmath>

#include "qgprobe/error.hpp"

namespace qgprobe::estimation {

ShiftPair fit_transient_shift(const QuadratureRecord& rec, const RingdownFit& base, const ShiftOptions& opt) {
  const RingdownParams& p = base.params;
  if (!std::isfinite(p.A) || !(p.A > 0.0) || !std::isfinite(p.f_m) || !std::isfinite(p.phi) ||
      !std::isfinite(p.B) || !std::isfinite(p.delta_phi) || p.tau == 0.0 || std::isnan(p.tau))
    throw Error(ErrorCode::BaseFitInvalid, "base ring-down fit is not usable");
  const FitWindow& w = opt.early;
  if (!(w.t_end > w.t_start)) throw Error(ErrorCode::WindowOutOfRange, "early window is empty");
  if (w.t_end > base.window.t_start)
    throw Error(ErrorCode::WindowOverlap, "early window must end before the base fit window starts");
  rec.validate();
  if (rec.size() == 0 || w.t_start < rec.time(0) - 0.5 * rec.x.dt ||
      w.t_end > rec.time(rec.size() - 1) + 0.5 * rec.x.dt)
    throw Error(ErrorCode::WindowOutOfRange, "early window lies outside the record");

  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double t = rec.time(i);
    if (t >= w.t_start && t <= w.t_end) idx.push_back(i);
  }
  if (idx.size() < 3) throw Error(ErrorCode::WindowOutOfRange, "fewer than 3 samples in the early window");

  const auto n = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd ax(n, 2), ay(n, 2);
  Eigen::VectorXd rx(n), ry(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t i = idx[static_cast<std::size_t>(k)];
    const double t = rec.time(i);
    double mx, my, dx, dy;
    ringdown_model(p, t, mx, my, opt.lines);
    ringdown_phase_derivative(p, t, dx, dy, opt.lines);
    rx[k] = rec.x.samples[i] - mx;
    ry[k] = rec.y.samples[i] - my;
    ax(k, 0) = dx * t;
    ax(k, 1) = dx;
    ay(k, 0) = dy * t;
    ay(k, 1) = dy;
  }

  auto solve = [&](const Eigen::MatrixXd& a, const Eigen::VectorXd& r, Quadrature q) {
    const fit::LinearFit lf = fit::linear_least_squares(a, r);
    ShiftFit s;
    s.delta_fm0 = lf.params[0];
    s.c = lf.params[1];
    s.covariance = lf.covariance;
    s.delta_fm0_err = std::sqrt(std::max(lf.covariance(0, 0), 0.0));
    s.c_err = std::sqrt(std::max(lf.covariance(1, 1), 0.0));
    s.window = w;
    s.quadrature = q;
    s.cost = lf.cost;
    s.n_samples = idx.size();
    return s;
  };
  return {solve(ax, rx, Quadrature::X), solve(ay, ry, Quadrature::Y)};
}

nlohmann::json to_json(const ShiftFit& fit) {
  return {{"quadrature", fit.quadrature == Quadrature::X ? "X" : "Y"},
          {"delta_fm0_Hz", fit.delta_fm0},
          {"delta_fm0_err_Hz", fit.delta_fm0_err},
          {"c_cycles", fit.c},
          {"c_err_cycles", fit.c_err},
          {"window_s", {fit.window.t_start, fit.window.t_end}},
          {"n_samples", fit.n_samples},
          {"cost", fit.cost}};
}

}  // namespace qgprobe::estimation
