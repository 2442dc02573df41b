#pragma once

// Classical phase-space dynamics of a harmonic oscillator whose Poisson
// bracket is deformed to {x, p} = 1 + beta_tilde * p^2.
//
// Hamilton's equations for H = p^2/2m + m Omega^2 x^2/2 become
//
//   dx/dt =  (1 + beta_tilde p^2) p / m
//   dp/dt = -(1 + beta_tilde p^2) m Omega^2 x
//
// The deformation only reparametrizes time along the energy ellipse, so the
// period of an orbit of displacement amplitude A is 2 pi / (Omega sqrt(1 + eps))
// with eps = beta_tilde m^2 Omega^2 A^2.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace qgprobe::dynamics {

struct PhysicalConstants {
  double hbar = 1.054571817e-34;  // J s
  double k_B = 1.380649e-23;      // J / K
  double L_p = 1.6e-35;           // m

  void validate() const;
};

class DeformationParams {
 public:
  DeformationParams() = default;
  explicit DeformationParams(double beta0, const PhysicalConstants& constants = {});

  double beta0() const { return beta0_; }
  /// beta0 (L_p / hbar)^2, in (kg m / s)^-2.
  double beta_tilde() const { return beta_tilde_; }
  /// sqrt(beta0) L_p
  double minimal_length() const;

 private:
  double beta0_ = 0.0;
  double beta_tilde_ = 0.0;
  double L_p_ = PhysicalConstants{}.L_p;
};

/// Deformation with beta_tilde given directly, for dimensionless test units.
DeformationParams deformation_from_beta_tilde(double beta_tilde, const PhysicalConstants& constants = {});

struct MechanicalMode {
  double omega_m = 2.0 * 3.14159265358979323846 * 525.8e3;  // rad/s
  double gamma_m = 2.0 * 3.14159265358979323846 * 525.8e3 / 6.4e6;
  double mass = 1e-10;  // kg
  double T_bath = 9.0;  // K

  static MechanicalMode from_frequency(double f_hz, double quality, double mass_kg, double temperature);

  double quality() const { return omega_m / gamma_m; }
  double frequency_hz() const;
  /// Bose occupation [exp(hbar Omega / k_B T) - 1]^-1.
  double thermal_occupancy(const PhysicalConstants& c = {}) const;
  double x_zpf(const PhysicalConstants& c = {}) const;
  double p_zpf(const PhysicalConstants& c = {}) const;
  void validate() const;
};

struct PhaseState {
  double x = 0.0;
  double p = 0.0;
  double t = 0.0;
};

double quadrature_X(const PhaseState& s, const MechanicalMode& mode, const PhysicalConstants& c = {});
double quadrature_Y(const PhaseState& s, const MechanicalMode& mode, const PhysicalConstants& c = {});

struct PhaseDerivative {
  double dx = 0.0;
  double dp = 0.0;
};

/// 1 + beta_tilde p^2
double deformed_factor(const PhaseState& s, const DeformationParams& d);

PhaseDerivative equations_of_motion(const PhaseState& s, const MechanicalMode& mode, const DeformationParams& d);

/// Undeformed Hamiltonian p^2/2m + m Omega^2 x^2 / 2 (conserved by the deformed flow too).
double energy(const PhaseState& s, const MechanicalMode& mode);

struct SinusoidalDrive {
  double force = 0.0;  // N
  double omega = 0.0;  // rad/s
  double phase = 0.0;  // rad
};

struct IntegrationOptions {
  double dt = 0.0;
  std::size_t n_steps = 0;
  double damping = 0.0;  // adds -damping * p to dp/dt
  std::optional<SinusoidalDrive> drive;
  std::size_t record_every = 1;
};

using Trajectory = std::vector<PhaseState>;

/// T_m / 200
double default_time_step(const MechanicalMode& mode);

/// Fixed-step RK4. Records s0 and every `record_every`-th state.
/// Throws StepTooLarge when dt > 2 pi / (50 Omega_m), NonFinite on divergence.
Trajectory integrate_trajectory(const PhaseState& s0, const MechanicalMode& mode, const DeformationParams& d,
                                const IntegrationOptions& options);

/// eps = beta_tilde m^2 Omega^2 A^2
double amplitude_parameter(const MechanicalMode& mode, const DeformationParams& d, double amplitude);

/// Omega_m sqrt(1 + eps). Throws InvalidArgument for A < 0.
double frequency_vs_amplitude(const MechanicalMode& mode, const DeformationParams& d, double amplitude);

/// Largest eps accepted when the amplitude law is used to set bounds.
inline constexpr double kMaxPerturbativeEpsilon = 0.1;

/// Same as frequency_vs_amplitude but refuses eps > kMaxPerturbativeEpsilon.
double frequency_vs_amplitude_bounded(const MechanicalMode& mode, const DeformationParams& d, double amplitude);

/// Upward zero crossings of x(t), located by cubic Hermite interpolation using dx/dt from the equations of motion.
std::vector<double> upward_zero_crossings(const Trajectory& traj, const MechanicalMode& mode,
                                          const DeformationParams& d);

/// Mean spacing of upward zero crossings. Throws InsufficientData with fewer than two crossings.
double measured_period(const Trajectory& traj, const MechanicalMode& mode, const DeformationParams& d);

/// |x_3| / |x_1| where x_k is the k-th harmonic amplitude of x(t) over an integer number of periods.
/// Needs at least 32 full periods (InsufficientData otherwise).
double third_harmonic_fraction(const Trajectory& traj, const MechanicalMode& mode, const DeformationParams& d);

/// 1 / (1 + 2 n_bar). Throws NegativeOccupancy for n_bar < 0.
double purity(double n_bar);

struct TrajectoryMetadata {
  MechanicalMode mode;
  double beta0 = 0.0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
};

/// Columnar text: '#'-prefixed key/value header followed by "t x p" rows.
void write_trajectory(std::ostream& out, const Trajectory& traj, const TrajectoryMetadata& meta);

}  // namespace qgprobe::dynamics
