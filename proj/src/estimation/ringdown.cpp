#include "qgprobe/estimation/ringdown.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace qgprobe::estimation {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_phase(double a) {
  a = std::remainder(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  return a;
}

struct Samples {
  std::vector<double> t;
  std::vector<cd> z;
};

Samples window_samples(const QuadratureRecord& rec, const FitWindow& w) {
  rec.validate();
  if (!(w.t_end > w.t_start)) throw Error(ErrorCode::WindowOutOfRange, "fit window is empty");
  if (rec.size() == 0 || w.t_start < rec.time(0) - 1e-12 * std::abs(rec.x.dt) ||
      w.t_end > rec.time(rec.size() - 1) + 0.5 * rec.x.dt)
    throw Error(ErrorCode::WindowOutOfRange, "fit window lies outside the record");
  Samples s;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double t = rec.time(i);
    if (t >= w.t_start && t <= w.t_end) {
      s.t.push_back(t);
      s.z.emplace_back(rec.x.samples[i], rec.y.samples[i]);
    }
  }
  if (s.t.size() < 8) throw Error(ErrorCode::WindowOutOfRange, "fewer than 8 samples inside the fit window");
  return s;
}

// Linear part of the model for fixed (f, gamma): z = a1 u1 + a2 u2.
struct Projection {
  cd a1, a2;
  double residual = 0.0;
};

Projection project(const Samples& s, double f, double gamma, bool single, const LineFrequencies& lines) {
  const std::size_t n = s.t.size();
  std::vector<cd> u1(n), u2(n);
  double g11 = 0.0, g22 = 0.0;
  cd g12{}, r1{}, r2{};
  for (std::size_t i = 0; i < n; ++i) {
    const double t = s.t[i];
    const double e = std::exp(-gamma * t);
    u1[i] = std::polar(e, kTwoPi * (lines.antistokes_hz - f) * t);
    u2[i] = std::polar(e, -kTwoPi * (lines.stokes_hz + f) * t);
    g11 += std::norm(u1[i]);
    g22 += std::norm(u2[i]);
    g12 += std::conj(u1[i]) * u2[i];
    r1 += std::conj(u1[i]) * s.z[i];
    r2 += std::conj(u2[i]) * s.z[i];
  }
  Projection p;
  if (single) {
    p.a1 = r1 / g11;
    p.a2 = 0.0;
  } else {
    const double det = g11 * g22 - std::norm(g12);
    p.a1 = (g22 * r1 - g12 * r2) / det;
    p.a2 = (g11 * r2 - std::conj(g12) * r1) / det;
  }
  for (std::size_t i = 0; i < n; ++i) p.residual += std::norm(s.z[i] - p.a1 * u1[i] - p.a2 * u2[i]);
  return p;
}

template <class F>
double golden_min(F&& fn, double a, double b, int iterations) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = fn(c), fd = fn(d);
  for (int k = 0; k < iterations; ++k) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = fn(d);
    }
  }
  return fc < fd ? c : d;
}

double log_envelope_rate(const Samples& s) {
  double zmax = 0.0;
  for (const cd& z : s.z) zmax = std::max(zmax, std::abs(z));
  if (!(zmax > 0.0)) return 0.0;
  double sw = 0.0, st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < s.t.size(); ++i) {
    const double a = std::abs(s.z[i]);
    if (a < 0.05 * zmax) continue;
    const double y = std::log(a);
    sw += 1.0;
    st += s.t[i];
    sy += y;
    stt += s.t[i] * s.t[i];
    sty += s.t[i] * y;
  }
  const double den = sw * stt - st * st;
  if (sw < 3.0 || !(std::abs(den) > 0.0)) return 0.0;
  return -(sw * sty - st * sy) / den;
}

// Full parameter vector: [A, gamma, f, phi, B, delta_phi]; the first four when B is fixed at 0.
RingdownParams unpack(const Eigen::VectorXd& p) {
  RingdownParams r;
  r.A = p[0];
  r.tau = 1.0 / p[1];
  r.f_m = p[2];
  r.phi = p[3];
  if (p.size() > 4) {
    r.B = p[4];
    r.delta_phi = p[5];
  } else {
    r.B = 0.0;
    r.delta_phi = 0.0;
  }
  return r;
}

}  // namespace

void ringdown_model(const RingdownParams& p, double t, double& x, double& y, const LineFrequencies& lines) {
  const double e = p.A * std::exp(-t / p.tau);
  const double th1 = kTwoPi * (lines.antistokes_hz - p.f_m) * t + p.phi;
  const double th2 = kTwoPi * (lines.stokes_hz + p.f_m) * t + p.phi + p.delta_phi;
  x = e * (std::cos(th1) + p.B * std::cos(th2));
  y = e * (std::sin(th1) - p.B * std::sin(th2));
}

void ringdown_phase_derivative(const RingdownParams& p, double t, double& dx, double& dy,
                               const LineFrequencies& lines) {
  const double e = p.A * std::exp(-t / p.tau);
  const double th1 = kTwoPi * (lines.antistokes_hz - p.f_m) * t + p.phi;
  const double th2 = kTwoPi * (lines.stokes_hz + p.f_m) * t + p.phi + p.delta_phi;
  dx = kTwoPi * e * (std::sin(th1) - p.B * std::sin(th2));
  dy = -kTwoPi * e * (std::cos(th1) + p.B * std::cos(th2));
}

QuadratureRecord generate_ringdown(const RingdownParams& p, double t0, double dt, std::size_t n,
                                   const LineFrequencies& lines) {
  QuadratureRecord rec;
  rec.x.t0 = rec.y.t0 = t0;
  rec.x.dt = rec.y.dt = dt;
  rec.x.samples.resize(n);
  rec.y.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) ringdown_model(p, rec.time(i), rec.x.samples[i], rec.y.samples[i], lines);
  return rec;
}

double RingdownFit::gamma_eff_hz() const { return gamma_eff() / kTwoPi; }
double RingdownFit::gamma_eff_hz_err() const { return gamma_eff_err() / kTwoPi; }

double RingdownFit::err(int i) const {
  if (covariance.rows() <= i) return 0.0;
  return std::sqrt(std::max(covariance(i, i), 0.0));
}

RingdownFit fit_ringdown(const QuadratureRecord& rec, const RingdownOptions& opt) {
  const Samples s = window_samples(rec, opt.window);
  const bool single = opt.fix_b_zero;
  const LineFrequencies& lines = opt.lines;
  const double span = s.t.back() - s.t.front();

  // Initial guess.
  const double g0 = log_envelope_rate(s);
  const double g_half = 3.0 / span + 0.5 * std::abs(g0);
  const double f_step = 0.125 / span;
  auto best_gamma = [&](double f, double& res) {
    const double g = golden_min([&](double gg) { return project(s, f, gg, single, lines).residual; }, g0 - g_half,
                                g0 + g_half, 30);
    res = project(s, f, g, single, lines).residual;
    return g;
  };
  double f_best = 0.0, g_best = g0, r_best = std::numeric_limits<double>::infinity();
  const int n_grid = static_cast<int>(std::ceil(opt.f_search_hz / f_step));
  for (int k = -n_grid; k <= n_grid; ++k) {
    const double f = k * f_step;
    double r;
    const double g = best_gamma(f, r);
    if (r < r_best) {
      r_best = r;
      f_best = f;
      g_best = g;
    }
  }
  for (int pass = 0; pass < 2; ++pass) {
    f_best = golden_min([&](double f) { return project(s, f, g_best, single, lines).residual; }, f_best - f_step,
                        f_best + f_step, 40);
    g_best = golden_min([&](double g) { return project(s, f_best, g, single, lines).residual; },
                        g_best - 0.5 * g_half, g_best + 0.5 * g_half, 40);
  }
  const Projection pr = project(s, f_best, g_best, single, lines);

  const int np = single ? 4 : 6;
  Eigen::VectorXd p0(np);
  p0[0] = std::abs(pr.a1);
  p0[1] = g_best;
  p0[2] = f_best;
  p0[3] = std::arg(pr.a1);
  if (!single) {
    p0[4] = p0[0] > 0.0 ? std::abs(pr.a2) / p0[0] : 0.0;
    p0[5] = -std::arg(pr.a2) - p0[3];
  }

  const auto n = static_cast<Eigen::Index>(s.t.size());
  fit::LeastSquaresProblem prob;
  prob.n_residuals = 2 * n;
  prob.residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    const RingdownParams q = unpack(p);
    for (Eigen::Index i = 0; i < n; ++i) {
      double x, y;
      const auto ii = static_cast<std::size_t>(i);
      ringdown_model(q, s.t[ii], x, y, lines);
      r[2 * i] = s.z[ii].real() - x;
      r[2 * i + 1] = s.z[ii].imag() - y;
    }
  };
  prob.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& jac) {
    const double A = p[0], g = p[1], f = p[2], phi = p[3];
    const double B = single ? 0.0 : p[4], dphi = single ? 0.0 : p[5];
    for (Eigen::Index i = 0; i < n; ++i) {
      const double t = s.t[static_cast<std::size_t>(i)];
      const double e = std::exp(-g * t);
      const double th1 = kTwoPi * (lines.antistokes_hz - f) * t + phi;
      const double th2 = kTwoPi * (lines.stokes_hz + f) * t + phi + dphi;
      const double c1 = std::cos(th1), s1 = std::sin(th1), c2 = std::cos(th2), s2 = std::sin(th2);
      const double x = A * e * (c1 + B * c2), y = A * e * (s1 - B * s2);
      // residual = data - model
      jac(2 * i, 0) = -e * (c1 + B * c2);
      jac(2 * i + 1, 0) = -e * (s1 - B * s2);
      jac(2 * i, 1) = t * x;
      jac(2 * i + 1, 1) = t * y;
      jac(2 * i, 2) = -kTwoPi * t * A * e * (s1 - B * s2);
      jac(2 * i + 1, 2) = kTwoPi * t * A * e * (c1 + B * c2);
      jac(2 * i, 3) = A * e * (s1 + B * s2);
      jac(2 * i + 1, 3) = -A * e * (c1 - B * c2);
      if (!single) {
        jac(2 * i, 4) = -A * e * c2;
        jac(2 * i + 1, 4) = A * e * s2;
        jac(2 * i, 5) = A * e * B * s2;
        jac(2 * i + 1, 5) = A * e * B * c2;
      }
    }
  };

  const fit::LmResult res = fit::levenberg_marquardt(prob, p0, opt.lm);
  Eigen::VectorXd p = res.params;
  Eigen::MatrixXd cov = res.covariance;

  // Canonical branch: A > 0, B >= 0, phases wrapped.
  auto flip = [&](int idx) {
    p[idx] = -p[idx];
    cov.row(idx) *= -1.0;
    cov.col(idx) *= -1.0;
  };
  if (p[0] < 0.0) {
    flip(0);
    p[3] += std::numbers::pi;
  }
  if (!single && p[4] < 0.0) {
    flip(4);
    p[5] += std::numbers::pi;
  }
  p[3] = wrap_phase(p[3]);
  if (!single) p[5] = wrap_phase(p[5]);

  RingdownFit out;
  out.params = unpack(p);
  out.gamma_internal = p[1];
  out.gamma_internal_err = std::sqrt(std::max(cov(1, 1), 0.0));
  // Reported covariance in (A, tau, f_m, phi, B, delta_phi); tau = 1/gamma.
  Eigen::MatrixXd jt = Eigen::MatrixXd::Zero(6, np);
  for (int i = 0; i < np; ++i) jt(i, i) = 1.0;
  jt(1, 1) = -1.0 / (p[1] * p[1]);
  out.covariance = jt * cov * jt.transpose();
  out.window = opt.window;
  out.cost = res.cost;
  out.reduced_chi2 = res.residual_variance;
  out.n_samples = s.t.size();
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.b_fixed = single;
  out.stop_reason = res.stop_reason;
  return out;
}

std::vector<RingdownOutcome> fit_ringdowns(const std::vector<QuadratureRecord>& records, const RingdownOptions& opt,
                                           Execution exec) {
  std::vector<RingdownOutcome> out(records.size());
  const long long n = static_cast<long long>(records.size());
#pragma omp parallel for schedule(dynamic) if (exec == Execution::Parallel)
  for (long long i = 0; i < n; ++i) {
    auto& o = out[static_cast<std::size_t>(i)];
    try {
      o.fit = fit_ringdown(records[static_cast<std::size_t>(i)], opt);
      o.ok = true;
    } catch (const Error& e) {
      o.code = e.code();
      o.message = e.what();
    }
  }
  return out;
}

nlohmann::json to_json(const RingdownFit& fit) {
  const auto& p = fit.params;
  auto finite_or_null = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["A"] = p.A;
  j["A_err"] = fit.err(0);
  j["tau_s"] = finite_or_null(p.tau);
  j["tau_err_s"] = finite_or_null(fit.err(1));
  j["f_m_Hz"] = p.f_m;
  j["f_m_err_Hz"] = fit.err(2);
  j["phi_rad"] = p.phi;
  j["phi_err_rad"] = fit.err(3);
  j["B"] = p.B;
  j["B_err"] = fit.err(4);
  j["delta_phi_rad"] = p.delta_phi;
  j["delta_phi_err_rad"] = fit.err(5);
  j["gamma_eff_over_2pi_Hz"] = fit.gamma_eff_hz();
  j["gamma_eff_over_2pi_err_Hz"] = fit.gamma_eff_hz_err();
  j["window_s"] = {fit.window.t_start, fit.window.t_end};
  j["n_samples"] = fit.n_samples;
  j["cost"] = fit.cost;
  j["reduced_chi2"] = fit.reduced_chi2;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["b_fixed"] = fit.b_fixed;
  j["stop_reason"] = fit.stop_reason;
  return j;
}

}  // namespace qgprobe::estimation
