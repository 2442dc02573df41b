#include "qgprobe/protocol/cycle.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "qgprobe/detection/lockin.hpp"
#include "qgprobe/error.hpp"
#include "qgprobe/parallel.hpp"

namespace qgprobe::protocol {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kPhasorRefresh = 1024;

// (1 - e^{-G dt}) / G, continuous at G = 0 and valid for G < 0.
double decay_integral(double gamma, double dt) {
  const double x = gamma * dt;
  return std::abs(x) < 1e-12 ? dt : -std::expm1(-x) / gamma;
}

// e^{i omega t_i} on a grid, refreshed from the exact phase every kPhasorRefresh steps.
class Phasor {
 public:
  Phasor(double omega, double t0, double dt) : omega_(omega), t0_(t0), dt_(dt), step_(std::polar(1.0, omega * dt)) {}
  cd at(std::size_t i) {
    if (i % kPhasorRefresh == 0)
      p_ = std::polar(1.0, omega_ * (t0_ + static_cast<double>(i) * dt_));
    else
      p_ *= step_;
    return p_;
  }

 private:
  double omega_, t0_, dt_;
  cd step_;
  cd p_{1.0, 0.0};
};

}  // namespace

SeriesPlan plan_series(const CampaignConfig& cfg, std::int64_t series) {
  cfg.validate();
  if (series < 0) throw Error(ErrorCode::InvalidConfig, "series index must be >= 0");
  SeriesPlan p;
  p.series = series;
  const auto idx = [&](std::size_t n) { return static_cast<std::size_t>(series) % n; };
  p.probe_detuning =
      cfg.detuning_sweep.empty() ? cfg.cavity.probe_detuning : kTwoPi * cfg.detuning_sweep[idx(cfg.detuning_sweep.size())];
  const double alpha2 = cfg.excitation_sweep.empty()
                            ? cfg.targets.alpha2
                            : optomech::coherent_amplitude(cfg.excitation_sweep[idx(cfg.excitation_sweep.size())]);

  Rng rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(series), 0x5eed0f5e41e5ULL}));
  p.excitation_phase = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);

  p.pump_state.n_bar = cfg.targets.n_bar;
  p.pump_state.gamma_eff = cfg.targets.gamma_eff;
  p.pump_state.omega_eff = cfg.detection.omega_exc + kTwoPi * cfg.targets.pump_frequency_offset;
  p.pump_state.alpha = std::polar(std::sqrt(alpha2), p.excitation_phase);
  p.probe = optomech::optical_damping_and_spring(cfg.cavity, cfg.mode, p.probe_detuning);

  if (cfg.scenario == Scenario::Protocol2Pulsed) {
    p.post_gamma = cfg.mode.gamma_m + p.probe.gamma_opt;
    p.post_diffusion = cfg.mode.gamma_m * cfg.mode.thermal_occupancy(cfg.constants);
    p.post_frequency_offset = -cfg.excitation_offset + p.probe.delta_omega / kTwoPi;
  } else {
    p.post_gamma = cfg.targets.gamma_eff;
    p.post_diffusion = cfg.targets.gamma_eff * cfg.targets.n_bar;
    p.post_frequency_offset = cfg.targets.pump_frequency_offset;
  }
  p.config_hash = cfg.hash();
  return p;
}

double post_switch_occupancy(const SeriesPlan& plan, double t) {
  const double g = plan.post_gamma;
  return plan.pump_state.n_bar * std::exp(-g * t) + plan.post_diffusion * decay_integral(g, t);
}

double deformation_shift(const CampaignConfig& cfg, const SeriesPlan& plan, double t) {
  if (cfg.beta0 == 0.0) return 0.0;
  const double n0 = plan.pump_state.n_bar;
  const double alpha0 = plan.pump_state.alpha2();
  auto amplitude_law = [&](double n, double alpha2) {
    const double a2 = estimation::amplitude_squared(cfg.analysis.convention, cfg.mode, n, alpha2, cfg.constants);
    const double eps = dynamics::amplitude_parameter(cfg.mode, cfg.deformation(), std::sqrt(a2));
    return cfg.mode.omega_m * std::expm1(0.5 * std::log1p(eps));
  };
  const double n = post_switch_occupancy(plan, t);
  if (cfg.effective_shift_model() == ShiftModel::PurityGated)
    return amplitude_law(n0, alpha0) * (2.0 * n0 + 1.0) / (2.0 * n + 1.0);
  return amplitude_law(n, alpha0 * std::exp(-plan.post_gamma * t));
}

std::uint64_t cycle_seed(const CampaignConfig& cfg, std::int64_t series, std::int64_t cycle_index) {
  return derive_seed(cfg.seed, {static_cast<std::uint64_t>(series), static_cast<std::uint64_t>(cycle_index)});
}

CycleOutput run_cycle(const CampaignConfig& cfg, const SeriesPlan& plan, std::int64_t cycle_index,
                      std::uint64_t seed, bool keep_raw) {
  const auto& det = cfg.detection;
  const double fs = det.sample_rate;
  const double dt = 1.0 / fs;
  const auto dec = static_cast<std::size_t>(det.decimation);
  const std::size_t n_pre_out = static_cast<std::size_t>(std::ceil(cfg.schedule.preroll * fs / dec - 1e-9));
  const std::size_t n_meas_out = static_cast<std::size_t>(std::llround(cfg.schedule.measure * fs / dec));
  const std::size_t n_pre = n_pre_out * dec;
  const std::size_t n_total = (n_pre_out + n_meas_out) * dec;
  const double t0 = -static_cast<double>(n_pre) * dt;

  Rng rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> uphase(-std::numbers::pi, std::numbers::pi);

  const auto& pump = plan.pump_state;
  const double g_as = std::sqrt(2.0 * det.phonon_gain / det.c_antistokes);
  const double g_s = std::sqrt(2.0 * det.phonon_gain / det.c_stokes);
  const double white = std::sqrt(det.background_psd * 0.5 * fs);

  // Thermal envelope b (phonon units, frame rotating at Omega_exc) and Stokes vacuum v.
  cd b = std::sqrt(pump.n_bar) * complex_normal(rng, n01);
  cd v = complex_normal(rng, n01);
  const double pump_detune = pump.omega_eff - det.omega_exc;
  const cd a_pre = std::exp(cd(-0.5 * pump.gamma_eff * dt, pump_detune * dt));
  const double s_pre = std::sqrt(pump.n_bar * -std::expm1(-pump.gamma_eff * dt));
  const double post_w = kTwoPi * plan.post_frequency_offset;
  const cd a_post = std::exp(cd(-0.5 * plan.post_gamma * dt, post_w * dt));
  const double s_post = std::sqrt(plan.post_diffusion * decay_integral(plan.post_gamma, dt));
  const double a_v = std::exp(-0.5 * pump.gamma_eff * dt);
  const double s_v = std::sqrt(-std::expm1(-pump.gamma_eff * dt));

  std::vector<cd> tone_amp;
  std::vector<Phasor> tones;
  for (double f : cfg.switch_off.frequencies) {
    tone_amp.push_back(std::polar(cfg.switch_off.amplitude, uphase(rng)));
    tones.emplace_back(kTwoPi * f, 0.0, dt);
  }
  const double tone_decay = std::exp(-dt / cfg.switch_off.decay);

  Phasor p_as(det.omega_exc - det.delta_lo, t0, dt);
  Phasor p_s(det.omega_exc + det.delta_lo, t0, dt);

  detection::TimeSeries raw;
  raw.t0 = t0;
  raw.dt = dt;
  raw.samples.resize(n_total);
  raw.provenance = {seed, plan.config_hash, QGPROBE_VERSION};

  double phi_beta = 0.0;
  cd alpha = pump.alpha;
  const cd alpha_step = a_post;  // the free coherent motion follows the same complex rate
  for (std::size_t i = 0; i < n_total; ++i) {
    const bool post = i >= n_pre;
    const cd xi_b = complex_normal(rng, n01);
    const cd xi_v = complex_normal(rng, n01);
    const double xi_w = n01(rng);
    if (post) {
      if (i > n_pre) alpha *= alpha_step;
      b = a_post * b + s_post * xi_b;
    } else {
      b = a_pre * b + s_pre * xi_b;
    }
    v = a_v * v + s_v * xi_v;

    cd u = alpha + b;
    if (post && cfg.beta0 > 0.0) {
      const double t = static_cast<double>(i - n_pre) * dt;
      u *= std::polar(1.0, phi_beta);
      phi_beta += deformation_shift(cfg, plan, t) * dt;
    }
    double s = g_as * (u * p_as.at(i)).real() + g_s * ((u + v) * p_s.at(i)).real() + white * xi_w;
    if (post && cfg.switch_off.amplitude > 0.0) {
      for (std::size_t k = 0; k < tones.size(); ++k) {
        s += (tone_amp[k] * tones[k].at(i - n_pre)).real();
        tone_amp[k] *= tone_decay;
      }
    }
    raw.samples[i] = s;
  }

  CycleOutput out;
  out.record = detection::lockin_demodulate(raw, det);
  auto trim = [&](detection::TimeSeries& ts) {
    ts.samples.erase(ts.samples.begin(), ts.samples.begin() + static_cast<std::ptrdiff_t>(n_pre_out));
    ts.t0 = 0.0;
  };
  trim(out.record.x);
  trim(out.record.y);
  out.record.cycle_index = cycle_index;
  if (keep_raw) out.raw = std::move(raw);
  return out;
}

}  // namespace qgprobe::protocol
