#include "qgprobe/dynamics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <ostream>

#include "qgprobe/error.hpp"

namespace qgprobe::dynamics {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool finite(const PhaseState& s) { return std::isfinite(s.x) && std::isfinite(s.p) && std::isfinite(s.t); }

// Root of the cubic Hermite interpolant on one step, u in [0, 1].
double hermite_root(double x0, double x1, double m0, double m1) {
  auto eval = [&](double u) {
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * x0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * x1 + (u3 - u2) * m1;
  };
  auto deriv = [&](double u) {
    const double u2 = u * u;
    return (6 * u2 - 6 * u) * x0 + (3 * u2 - 4 * u + 1) * m0 + (-6 * u2 + 6 * u) * x1 + (3 * u2 - 2 * u) * m1;
  };
  double lo = 0.0, hi = 1.0;
  double u = x0 / (x0 - x1);
  for (int it = 0; it < 60; ++it) {
    const double f = eval(u);
    if (f < 0.0) lo = u; else hi = u;
    const double df = deriv(u);
    double next = (df != 0.0) ? u - f / df : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - u) < 1e-16) return next;
    u = next;
  }
  return u;
}

}  // namespace

void PhysicalConstants::validate() const {
  if (!(hbar > 0.0) || !(k_B > 0.0) || !(L_p > 0.0))
    throw Error(ErrorCode::InvalidArgument, "physical constants must be strictly positive");
}

DeformationParams::DeformationParams(double beta0, const PhysicalConstants& c) : beta0_(beta0), L_p_(c.L_p) {
  c.validate();
  if (!(beta0 >= 0.0) || !std::isfinite(beta0))
    throw Error(ErrorCode::InvalidArgument, "beta0 must be finite and >= 0");
  const double ratio = c.L_p / c.hbar;
  beta_tilde_ = beta0 * ratio * ratio;
}

double DeformationParams::minimal_length() const { return std::sqrt(beta0_) * L_p_; }

DeformationParams deformation_from_beta_tilde(double beta_tilde, const PhysicalConstants& c) {
  const double ratio = c.L_p / c.hbar;
  return DeformationParams(beta_tilde / (ratio * ratio), c);
}

MechanicalMode MechanicalMode::from_frequency(double f_hz, double quality, double mass_kg, double temperature) {
  MechanicalMode m;
  m.omega_m = kTwoPi * f_hz;
  m.gamma_m = m.omega_m / quality;
  m.mass = mass_kg;
  m.T_bath = temperature;
  m.validate();
  return m;
}

double MechanicalMode::frequency_hz() const { return omega_m / kTwoPi; }

double MechanicalMode::thermal_occupancy(const PhysicalConstants& c) const {
  return 1.0 / std::expm1(c.hbar * omega_m / (c.k_B * T_bath));
}

double MechanicalMode::x_zpf(const PhysicalConstants& c) const { return std::sqrt(c.hbar / (2.0 * mass * omega_m)); }

double MechanicalMode::p_zpf(const PhysicalConstants& c) const { return std::sqrt(c.hbar * mass * omega_m / 2.0); }

void MechanicalMode::validate() const {
  if (!(omega_m > 0.0) || !(gamma_m > 0.0) || !(mass > 0.0) || !(T_bath > 0.0))
    throw Error(ErrorCode::InvalidArgument, "mechanical mode parameters must be strictly positive");
}

double quadrature_X(const PhaseState& s, const MechanicalMode& mode, const PhysicalConstants& c) {
  return s.x / (std::numbers::sqrt2 * mode.x_zpf(c));
}

double quadrature_Y(const PhaseState& s, const MechanicalMode& mode, const PhysicalConstants& c) {
  return s.p / (std::numbers::sqrt2 * mode.p_zpf(c));
}

double deformed_factor(const PhaseState& s, const DeformationParams& d) { return 1.0 + d.beta_tilde() * s.p * s.p; }

PhaseDerivative equations_of_motion(const PhaseState& s, const MechanicalMode& mode, const DeformationParams& d) {
  const double f = deformed_factor(s, d);
  return {f * s.p / mode.mass, -f * mode.mass * mode.omega_m * mode.omega_m * s.x};
}

double energy(const PhaseState& s, const MechanicalMode& mode) {
  return 0.5 * s.p * s.p / mode.mass + 0.5 * mode.mass * mode.omega_m * mode.omega_m * s.x * s.x;
}

double default_time_step(const MechanicalMode& mode) { return kTwoPi / mode.omega_m / 200.0; }

Trajectory integrate_trajectory(const PhaseState& s0, const MechanicalMode& mode, const DeformationParams& d,
                                const IntegrationOptions& opt) {
  if (!(opt.dt > 0.0) || opt.dt > kTwoPi / (50.0 * mode.omega_m))
    throw Error(ErrorCode::StepTooLarge, "dt must be in (0, 2 pi / (50 Omega_m)]");
  if (opt.n_steps < 1) throw Error(ErrorCode::InvalidArgument, "n_steps must be >= 1");
  if (opt.record_every < 1) throw Error(ErrorCode::InvalidArgument, "record_every must be >= 1");

  auto rhs = [&](const PhaseState& s) {
    PhaseDerivative r = equations_of_motion(s, mode, d);
    r.dp -= opt.damping * s.p;
    if (opt.drive) r.dp += opt.drive->force * std::cos(opt.drive->omega * s.t + opt.drive->phase);
    return r;
  };

  Trajectory traj;
  traj.reserve(opt.n_steps / opt.record_every + 2);
  traj.push_back(s0);
  PhaseState s = s0;
  const double h = opt.dt;
  for (std::size_t step = 1; step <= opt.n_steps; ++step) {
    const PhaseDerivative k1 = rhs(s);
    const PhaseDerivative k2 = rhs({s.x + 0.5 * h * k1.dx, s.p + 0.5 * h * k1.dp, s.t + 0.5 * h});
    const PhaseDerivative k3 = rhs({s.x + 0.5 * h * k2.dx, s.p + 0.5 * h * k2.dp, s.t + 0.5 * h});
    const PhaseDerivative k4 = rhs({s.x + h * k3.dx, s.p + h * k3.dp, s.t + h});
    s.x += h / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
    s.p += h / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
    // keeps t exact on long runs instead of accumulating h
    s.t = s0.t + static_cast<double>(step) * h;
    if (!finite(s)) throw Error(ErrorCode::NonFinite, "trajectory diverged at step " + std::to_string(step));
    if (step % opt.record_every == 0) traj.push_back(s);
  }
  return traj;
}

double amplitude_parameter(const MechanicalMode& mode, const DeformationParams& d, double amplitude) {
  const double p_amp = mode.mass * mode.omega_m * amplitude;
  return d.beta_tilde() * p_amp * p_amp;
}

double frequency_vs_amplitude(const MechanicalMode& mode, const DeformationParams& d, double amplitude) {
  if (!(amplitude >= 0.0)) throw Error(ErrorCode::InvalidArgument, "amplitude must be >= 0");
  return mode.omega_m * std::sqrt(1.0 + amplitude_parameter(mode, d, amplitude));
}

double frequency_vs_amplitude_bounded(const MechanicalMode& mode, const DeformationParams& d, double amplitude) {
  if (!(amplitude >= 0.0)) throw Error(ErrorCode::InvalidArgument, "amplitude must be >= 0");
  const double eps = amplitude_parameter(mode, d, amplitude);
  if (eps > kMaxPerturbativeEpsilon)
    throw Error(ErrorCode::OutsidePerturbativeRegime, "eps = " + std::to_string(eps) + " exceeds 0.1");
  return mode.omega_m * std::sqrt(1.0 + eps);
}

std::vector<double> upward_zero_crossings(const Trajectory& traj, const MechanicalMode& mode,
                                          const DeformationParams& d) {
  std::vector<double> out;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const PhaseState& a = traj[k];
    const PhaseState& b = traj[k + 1];
    if (!(a.x < 0.0 && b.x >= 0.0)) continue;
    const double h = b.t - a.t;
    const double va = equations_of_motion(a, mode, d).dx;
    const double vb = equations_of_motion(b, mode, d).dx;
    const double u = hermite_root(a.x, b.x, h * va, h * vb);
    out.push_back(a.t + u * h);
  }
  return out;
}

double measured_period(const Trajectory& traj, const MechanicalMode& mode, const DeformationParams& d) {
  const auto c = upward_zero_crossings(traj, mode, d);
  if (c.size() < 2) throw Error(ErrorCode::InsufficientData, "fewer than two upward zero crossings");
  return (c.back() - c.front()) / static_cast<double>(c.size() - 1);
}

double third_harmonic_fraction(const Trajectory& traj, const MechanicalMode& mode, const DeformationParams& d) {
  constexpr std::size_t kMinPeriods = 32;
  constexpr int kHarmonics = 7;
  const auto c = upward_zero_crossings(traj, mode, d);
  if (c.size() < kMinPeriods + 1)
    throw Error(ErrorCode::InsufficientData, "third harmonic analysis needs at least 32 full periods");
  const double t0 = c.front();
  const double t1 = c.back();
  const double omega = kTwoPi * static_cast<double>(c.size() - 1) / (t1 - t0);

  std::vector<const PhaseState*> used;
  for (const auto& s : traj)
    if (s.t >= t0 && s.t < t1) used.push_back(&s);

  const int n_par = 1 + 2 * kHarmonics;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(used.size()), n_par);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(used.size()));
  for (std::size_t i = 0; i < used.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double ph = omega * (used[i]->t - t0);
    design(row, 0) = 1.0;
    for (int k = 1; k <= kHarmonics; ++k) {
      design(row, 2 * k - 1) = std::cos(k * ph);
      design(row, 2 * k) = std::sin(k * ph);
    }
    rhs(row) = used[i]->x;
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);
  const double h1 = std::hypot(coef(1), coef(2));
  const double h3 = std::hypot(coef(5), coef(6));
  if (!(h1 > 0.0)) throw Error(ErrorCode::InsufficientData, "no fundamental component");
  return h3 / h1;
}

double purity(double n_bar) {
  if (!(n_bar >= 0.0)) throw Error(ErrorCode::NegativeOccupancy, "mean phonon number must be >= 0");
  return 1.0 / (1.0 + 2.0 * n_bar);
}

void write_trajectory(std::ostream& out, const Trajectory& traj, const TrajectoryMetadata& meta) {
  const auto old_precision = out.precision(17);
  out << "# format: qgprobe-trajectory 1\n"
      << "# omega_m_rad_per_s: " << meta.mode.omega_m << "\n"
      << "# gamma_m_rad_per_s: " << meta.mode.gamma_m << "\n"
      << "# mass_kg: " << meta.mode.mass << "\n"
      << "# T_bath_K: " << meta.mode.T_bath << "\n"
      << "# beta0: " << meta.beta0 << "\n"
      << "# dt_s: " << meta.dt << "\n"
      << "# record_every: " << meta.record_every << "\n"
      << "# seed: " << meta.seed << "\n"
      << "# columns: t_s x_m p_kg_m_per_s\n";
  for (const auto& s : traj) out << s.t << ' ' << s.x << ' ' << s.p << '\n';
  out.precision(old_precision);
}

}  // namespace qgprobe::dynamics
