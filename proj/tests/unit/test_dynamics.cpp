#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "qgprobe/dynamics.hpp"
#include "qgprobe/error.hpp"
#include "unit/oracles.hpp"

using namespace qgprobe;
using namespace qgprobe::dynamics;

namespace {

// Unit oscillator: m = Omega = 1, so eps = beta_tilde A^2.
MechanicalMode unit_mode() {
  MechanicalMode m;
  m.omega_m = 1.0;
  m.gamma_m = 1e-6;
  m.mass = 1.0;
  return m;
}

Trajectory run(const MechanicalMode& mode, const DeformationParams& d, double amplitude, double periods, double steps_per_period,
               std::size_t every = 1, double damping = 0.0) {
  IntegrationOptions o;
  o.dt = 2.0 * std::numbers::pi / mode.omega_m / steps_per_period;
  o.n_steps = static_cast<std::size_t>(std::llround(periods * steps_per_period));
  o.record_every = every;
  o.damping = damping;
  return integrate_trajectory({amplitude, 0.0, 0.0}, mode, d, o);
}

}  // namespace

TEST_SUITE("dynamics") {
  TEST_CASE("deformed factor") {
    CHECK(deformed_factor({0.0, 123.0, 0.0}, DeformationParams(0.0)) == 1.0);
    CHECK(deformed_factor({0.0, 0.0, 0.0}, DeformationParams(1e30)) == 1.0);
    CHECK(deformed_factor({0.0, 2.0, 0.0}, deformation_from_beta_tilde(1.0)) == 5.0);
  }

  TEST_CASE("beta_tilde scaling") {
    PhysicalConstants c;
    const DeformationParams d(3.5e33, c);
    CHECK(d.beta_tilde() == 3.5e33 * (c.L_p / c.hbar) * (c.L_p / c.hbar));
    CHECK(d.minimal_length() == doctest::Approx(std::sqrt(3.5e33) * 1.6e-35).epsilon(1e-15));
    CHECK(DeformationParams(0.0).beta_tilde() == 0.0);
    CHECK_THROWS_AS(DeformationParams(-1.0), Error);
  }

  TEST_CASE("mode accessors") {
    const auto m = MechanicalMode::from_frequency(525.8e3, 6.4e6, 1e-10, 9.0);
    PhysicalConstants c;
    CHECK(m.quality() == doctest::Approx(6.4e6).epsilon(1e-12));
    CHECK(m.frequency_hz() == doctest::Approx(525.8e3).epsilon(1e-15));
    const double x = c.hbar * m.omega_m / (c.k_B * m.T_bath);
    CHECK(m.thermal_occupancy(c) == doctest::Approx(1.0 / std::expm1(x)).epsilon(1e-14));
    // 9 K at 525.8 kHz: about 3.57e5 phonons
    CHECK(m.thermal_occupancy(c) == doctest::Approx(3.5666e5).epsilon(1e-3));
    CHECK(m.x_zpf(c) == doctest::Approx(std::sqrt(c.hbar / (2 * m.mass * m.omega_m))).epsilon(1e-15));
    CHECK(m.p_zpf(c) == doctest::Approx(std::sqrt(c.hbar * m.mass * m.omega_m / 2)).epsilon(1e-15));
    CHECK(m.x_zpf(c) * m.p_zpf(c) == doctest::Approx(c.hbar / 2).epsilon(1e-14));

    PhaseState s{m.x_zpf(c) * 3.0, -m.p_zpf(c) * 2.0, 0.0};
    CHECK(quadrature_X(s, m, c) == doctest::Approx(3.0 / std::sqrt(2.0)).epsilon(1e-14));
    CHECK(quadrature_Y(s, m, c) == doctest::Approx(-2.0 / std::sqrt(2.0)).epsilon(1e-14));

    MechanicalMode bad = m;
    bad.mass = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("equations of motion") {
    const auto m = MechanicalMode::from_frequency(525.8e3, 6.4e6, 1e-10, 9.0);
    SUBCASE("undeformed limit") {
      PhaseState s{2e-15, 3e-19, 0.0};
      const auto d = equations_of_motion(s, m, DeformationParams(0.0));
      CHECK(d.dx == s.p / m.mass);
      CHECK(d.dp == -m.mass * m.omega_m * m.omega_m * s.x);
    }
    SUBCASE("hand evaluation") {
      const DeformationParams def(7e37);
      PhaseState s{1.3e-12, -4.1e-16, 0.0};
      const double g = 1.0 + def.beta_tilde() * s.p * s.p;
      const auto d = equations_of_motion(s, m, def);
      CHECK(d.dx == doctest::Approx(g * s.p / m.mass).epsilon(1e-12));
      CHECK(d.dp == doctest::Approx(-g * m.mass * m.omega_m * m.omega_m * s.x).epsilon(1e-12));
      CHECK(g > 1.0001);
    }
    SUBCASE("tangent to the energy ellipse") {
      const auto u = unit_mode();
      const auto def = deformation_from_beta_tilde(0.7);
      for (double th = 0.1; th < 6.2; th += 0.37) {
        PhaseState s{std::cos(th), std::sin(th), 0.0};
        const auto d = equations_of_motion(s, u, def);
        const double dH = s.p / u.mass * d.dp + u.mass * u.omega_m * u.omega_m * s.x * d.dx;
        CHECK(std::abs(dH) < 1e-15);
      }
    }
  }

  TEST_CASE("integrator guards") {
    const auto m = unit_mode();
    IntegrationOptions o;
    o.dt = 2.0 * std::numbers::pi / 49.0;
    o.n_steps = 10;
    CHECK_THROWS_WITH_AS(integrate_trajectory({1, 0, 0}, m, {}, o), doctest::Contains("StepTooLarge"), Error);
    o.dt = 0.01;
    o.n_steps = 0;
    CHECK_THROWS_AS(integrate_trajectory({1, 0, 0}, m, {}, o), Error);
    o.n_steps = 100000;
    o.damping = -3000.0;
    CHECK_THROWS_WITH_AS(integrate_trajectory({1, 0, 0}, m, {}, o), doctest::Contains("NonFinite"), Error);
  }

  TEST_CASE("harmonic period and damping envelope") {
    const auto m = unit_mode();
    const auto traj = run(m, {}, 1.0, 200, 200);
    CHECK(measured_period(traj, m, {}) == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-8));
    CHECK(default_time_step(m) == doctest::Approx(2.0 * std::numbers::pi / 200.0).epsilon(1e-15));

    const double gamma = 0.02;
    const auto damped = run(m, {}, 1.0, 40, 400, 1, gamma);
    // Energy-based amplitude removes the oscillation; it decays as exp(-gamma t / 2) up to O(gamma / Omega).
    for (std::size_t i = 4000; i < damped.size(); i += 4000) {
      const auto& s = damped[i];
      const double amp = std::sqrt(s.x * s.x + s.p * s.p);
      CHECK(amp == doctest::Approx(std::exp(-0.5 * gamma * s.t)).epsilon(gamma));
    }
  }

  TEST_CASE("energy conservation over 1e4 periods") {
    const auto m = unit_mode();
    for (double b : {0.0, 0.05}) {
      const auto d = deformation_from_beta_tilde(b);
      const auto traj = run(m, d, 1.0, 1e4, 2000, 100000);
      const double h0 = energy(traj.front(), m);
      double worst = 0.0;
      for (const auto& s : traj) worst = std::max(worst, std::abs(energy(s, m) - h0) / h0);
      CHECK(worst < 1e-9);
    }
  }

  TEST_CASE("orbit shape matches the undeformed ellipse") {
    const auto m = unit_mode();
    const auto d = deformation_from_beta_tilde(0.08);
    const auto traj = run(m, d, 1.0, 50, 2000, 7);
    const double h0 = 0.5;  // ellipse of the undeformed oscillator through (1, 0)
    double worst = 0.0;
    for (const auto& s : traj) worst = std::max(worst, std::abs(energy(s, m) - h0) / h0);
    CHECK(worst < 1e-9);
  }

  TEST_CASE("frequency_vs_amplitude closed form") {
    const auto m = MechanicalMode::from_frequency(525.8e3, 6.4e6, 1e-10, 9.0);
    CHECK(frequency_vs_amplitude(m, DeformationParams(0.0), 1e-12) == m.omega_m);
    CHECK_THROWS_AS(frequency_vs_amplitude(m, DeformationParams(1.0), -1.0), Error);

    const auto u = unit_mode();
    const auto d = deformation_from_beta_tilde(0.01);
    CHECK(amplitude_parameter(u, d, 1.0) == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(frequency_vs_amplitude(u, d, 1.0) == doctest::Approx(1.004987562112089).epsilon(1e-14));

    const auto tiny = deformation_from_beta_tilde(1e-8);
    const double r1 = frequency_vs_amplitude(u, tiny, 1.0) - 1.0;
    const double r2 = frequency_vs_amplitude(u, tiny, 2.0) - 1.0;
    CHECK(r2 / r1 == doctest::Approx(4.0).epsilon(1e-6));

    CHECK(frequency_vs_amplitude_bounded(u, deformation_from_beta_tilde(0.1), 1.0) > 1.0);
    CHECK_THROWS_WITH_AS(frequency_vs_amplitude_bounded(u, deformation_from_beta_tilde(0.1), 1.01),
                         doctest::Contains("OutsidePerturbativeRegime"), Error);
  }

  TEST_CASE("closed form against zero-crossing timing") {
    const auto u = unit_mode();
    for (double eps : {1e-4, 1e-3, 1e-2}) {
      CAPTURE(eps);
      const auto d = deformation_from_beta_tilde(eps);
      const double predicted = 2.0 * std::numbers::pi / frequency_vs_amplitude(u, d, 1.0);
      // library integrator and crossing locator
      const auto traj = run(u, d, 1.0, 100, 2000);
      CHECK(measured_period(traj, u, d) == doctest::Approx(predicted).epsilon(1e-6));
      // independent integrator and crossing locator
      const auto orbit = oracle::deformed_orbit(1.0, 0.0, 1.0, 1.0, eps, 2.0 * std::numbers::pi / 2000.0, 200000);
      CHECK(oracle::crossing_period(orbit) == doctest::Approx(predicted).epsilon(1e-6));
    }
  }

  TEST_CASE("SI-unit oscillator follows the closed form") {
    const auto m = MechanicalMode::from_frequency(525.8e3, 6.4e6, 1e-10, 9.0);
    const double A = 1e-12;
    // beta0 giving eps = 1e-3 at A
    const double beta_tilde = 1e-3 / (m.mass * m.mass * m.omega_m * m.omega_m * A * A);
    PhysicalConstants c;
    const DeformationParams d(beta_tilde * (c.hbar / c.L_p) * (c.hbar / c.L_p), c);
    CHECK(amplitude_parameter(m, d, A) == doctest::Approx(1e-3).epsilon(1e-12));
    IntegrationOptions o;
    o.dt = default_time_step(m) / 10.0;
    o.n_steps = 2000 * 60;
    const auto traj = integrate_trajectory({A, 0.0, 0.0}, m, d, o);
    CHECK(measured_period(traj, m, d) == doctest::Approx(2.0 * std::numbers::pi / frequency_vs_amplitude(m, d, A)).epsilon(1e-6));
  }

  TEST_CASE("continuity in beta0") {
    const auto u = unit_mode();
    const double s1 = (frequency_vs_amplitude(u, deformation_from_beta_tilde(1e-9), 1.0) - 1.0) / 1e-9;
    const double s2 = (frequency_vs_amplitude(u, deformation_from_beta_tilde(1e-7), 1.0) - 1.0) / 1e-7;
    CHECK(s1 == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(s2 == doctest::Approx(0.5).epsilon(1e-6));
  }

  TEST_CASE("third harmonic") {
    const auto u = unit_mode();
    CHECK_THROWS_AS(third_harmonic_fraction(run(u, {}, 1.0, 20, 400), u, {}), Error);
    CHECK(third_harmonic_fraction(run(u, {}, 1.0, 40, 400), u, {}) < 1e-9);

    const auto small = deformation_from_beta_tilde(1e-3);
    const double h1 = third_harmonic_fraction(run(u, small, 1.0, 40, 400), u, small);
    const double h2 = third_harmonic_fraction(run(u, small, 2.0, 40, 400), u, small);
    CHECK(h2 / h1 == doctest::Approx(4.0).epsilon(0.05));

    // eps = 0.01: independent DFT over exactly 32 periods sampled 512 times per period.
    const auto d = deformation_from_beta_tilde(0.01);
    const double period = 2.0 * std::numbers::pi / std::sqrt(1.01);
    const std::size_t per = 512, n = 32 * per;
    const auto orbit = oracle::deformed_orbit(1.0, 0.0, 1.0, 1.0, 0.01, period / per, n);
    const double oracle_ratio = oracle::dft_magnitude(orbit.x, n, 96) / oracle::dft_magnitude(orbit.x, n, 32);
    const double lib = third_harmonic_fraction(run(u, d, 1.0, 40, 2000), u, d);
    CHECK(lib == doctest::Approx(oracle_ratio).epsilon(1e-4));
    CHECK(lib == doctest::Approx(1.24301523518e-3).epsilon(1e-4));
  }

  TEST_CASE("purity") {
    CHECK(purity(0.0) == 1.0);
    CHECK(purity(4.5) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(purity(5.0) == doctest::Approx(1.0 / 11.0).epsilon(1e-15));
    CHECK_THROWS_WITH_AS(purity(-0.1), doctest::Contains("NegativeOccupancy"), Error);
    double last = 2.0;
    for (double n = 0.0; n < 100.0; n += 0.7) {
      CHECK(purity(n) < last);
      last = purity(n);
    }
  }

  TEST_CASE("trajectory export") {
    const auto u = unit_mode();
    const auto traj = run(u, {}, 1.0, 1, 100, 10);
    std::ostringstream os;
    TrajectoryMetadata meta;
    meta.mode = u;
    meta.beta0 = 2.5;
    meta.dt = 0.0628;
    meta.seed = 42;
    meta.record_every = 10;
    write_trajectory(os, traj, meta);
    const auto text = os.str();
    CHECK(text.find("# beta0: 2.5") != std::string::npos);
    CHECK(text.find("# seed: 42") != std::string::npos);
    CHECK(text.find("# columns: t_s x_m p_kg_m_per_s") != std::string::npos);
    std::size_t rows = 0;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);)
      if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows == traj.size());
    CHECK(traj.size() == 11);
  }
}
