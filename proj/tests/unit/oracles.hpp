#pragma once

// Reference computations written independently of the library, used to derive
// the expected values that the tests freeze.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace oracle {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Orbit {
  std::vector<double> t, x, p;
};

// Plain RK4 of dx/dt = (1 + b p^2) p / m, dp/dt = -(1 + b p^2) m w^2 x.
inline Orbit deformed_orbit(double x0, double p0, double m, double w, double b, double dt, std::size_t steps) {
  auto f = [&](double x, double p, double& dx, double& dp) {
    const double g = 1.0 + b * p * p;
    dx = g * p / m;
    dp = -g * m * w * w * x;
  };
  Orbit o;
  o.t.reserve(steps + 1);
  o.x.reserve(steps + 1);
  o.p.reserve(steps + 1);
  double x = x0, p = p0;
  for (std::size_t i = 0; i <= steps; ++i) {
    o.t.push_back(static_cast<double>(i) * dt);
    o.x.push_back(x);
    o.p.push_back(p);
    double k1x, k1p, k2x, k2p, k3x, k3p, k4x, k4p;
    f(x, p, k1x, k1p);
    f(x + 0.5 * dt * k1x, p + 0.5 * dt * k1p, k2x, k2p);
    f(x + 0.5 * dt * k2x, p + 0.5 * dt * k2p, k3x, k3p);
    f(x + dt * k3x, p + dt * k3p, k4x, k4p);
    x += dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    p += dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
  }
  return o;
}

// Mean spacing of upward zero crossings, located by linear interpolation.
inline double crossing_period(const Orbit& o) {
  std::vector<double> c;
  for (std::size_t i = 1; i < o.x.size(); ++i)
    if (o.x[i - 1] < 0.0 && o.x[i] >= 0.0) c.push_back(o.t[i - 1] + (o.t[i] - o.t[i - 1]) * (-o.x[i - 1]) / (o.x[i] - o.x[i - 1]));
  if (c.size() < 2) return NAN;
  return (c.back() - c.front()) / static_cast<double>(c.size() - 1);
}

// |DFT| of x at k cycles per window.
inline double dft_magnitude(const std::vector<double>& x, std::size_t n, double cycles) {
  std::complex<double> s{};
  for (std::size_t i = 0; i < n; ++i) s += x[i] * std::polar(1.0, -kTwoPi * cycles * static_cast<double>(i) / static_cast<double>(n));
  return std::abs(s);
}

// Ring-down quadratures evaluated term by term.
struct Ring {
  double A, tau, f_m, phi, B, dphi;
};

inline void ring(const Ring& r, double t, double& x, double& y, double f_as = 8000.0, double f_s = 16000.0) {
  const double e = r.A * std::exp(-t / r.tau);
  const double th1 = kTwoPi * (f_as - r.f_m) * t + r.phi;
  const double th2 = kTwoPi * (f_s + r.f_m) * t + r.phi + r.dphi;
  x = e * (std::cos(th1) + r.B * std::cos(th2));
  y = e * (std::sin(th1) - r.B * std::sin(th2));
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double a : v) s += a;
  return s / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double a : v) s += (a - m) * (a - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Ordinary least squares y = a x + b.
inline void line_fit(const std::vector<double>& x, const std::vector<double>& y, double& a, double& b) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  a = sxy / sxx;
  b = my - a * mx;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  std::random_device rd;
  auto p = std::filesystem::temp_directory_path() / ("qgprobe_" + tag + "_" + std::to_string(rd()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle
