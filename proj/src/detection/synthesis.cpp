#include "qgprobe/detection/synthesis.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "qgprobe/error.hpp"

namespace qgprobe::detection {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSqrt2 = 1.41421356237309504880;

struct Envelope {
  double omega = 0.0;  // carrier, rad/s
  double a = 0.0;      // per-sample decay e^{-Gamma dt / 2}
  double sigma = 0.0;  // innovation scale sqrt(P (1 - a^2))
  double power = 0.0;  // stationary E|z|^2
};

struct Model {
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::array<Envelope, 2> env;  // Stokes, anti-Stokes
  std::array<double, 2> tone_omega{};
  std::array<cd, 2> tone_amp{};
  double white_sigma = 0.0;
};

Model make_model(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                 const optomech::OpticalCavity& cavity, const DetectionConfig& det, double duration,
                 std::uint64_t seed) {
  mode.validate();
  cavity.validate();
  det.validate(mode.omega_m);
  state.validate(mode);
  if (!(duration * state.gamma_eff >= 10.0))
    throw Error(ErrorCode::DurationTooShort, "duration * Gamma_eff must be >= 10 for a stationary record");

  const BhdLines lines = bhd_lines(state, mode, det);
  const double nyquist = 0.5 * det.sample_rate;
  for (double f : {lines.stokes_hz, lines.coherent_stokes_hz})
    if (!(f + 5.0 * lines.width_hz < nyquist))
      throw Error(ErrorCode::NyquistViolation, "sideband lies above the Nyquist frequency");

  Model m;
  m.dt = 1.0 / det.sample_rate;
  m.n = static_cast<std::size_t>(std::llround(duration * det.sample_rate));
  m.seed = seed;
  const double a = std::exp(-0.5 * state.gamma_eff * m.dt);
  const std::array<double, 2> centers{lines.stokes_hz, lines.antistokes_hz};
  const std::array<double, 2> areas{lines.stokes_area, lines.antistokes_area};
  for (int k = 0; k < 2; ++k) {
    m.env[k].omega = kTwoPi * centers[k];
    m.env[k].a = a;
    m.env[k].power = areas[k];
    m.env[k].sigma = std::sqrt(areas[k] * (1.0 - a * a));
  }
  const double phase = std::arg(state.alpha);
  m.tone_omega = {kTwoPi * lines.coherent_stokes_hz, kTwoPi * lines.coherent_antistokes_hz};
  m.tone_amp = {std::polar(std::sqrt(lines.coherent_stokes_power), phase),
                std::polar(std::sqrt(lines.coherent_antistokes_power), -phase)};
  m.white_sigma = std::sqrt(lines.background_psd * nyquist);
  return m;
}

std::size_t block_length(const Model& m, std::size_t j) {
  const std::size_t start = j * kSynthesisBlock;
  return std::min(kSynthesisBlock, m.n - start);
}

std::size_t n_blocks(const Model& m) { return (m.n + kSynthesisBlock - 1) / kSynthesisBlock; }

// Carrier phasors anchored at each block start; the serial and parallel paths share this.
struct Carriers {
  std::array<cd, 4> p;
  std::array<cd, 4> step;

  Carriers(const Model& m, std::size_t block) {
    const double t = m.t0 + static_cast<double>(block * kSynthesisBlock) * m.dt;
    const std::array<double, 4> w{m.env[0].omega, m.env[1].omega, m.tone_omega[0], m.tone_omega[1]};
    for (int k = 0; k < 4; ++k) {
      p[k] = std::polar(1.0, w[k] * t);
      step[k] = std::polar(1.0, w[k] * m.dt);
    }
  }
  void advance() {
    for (int k = 0; k < 4; ++k) p[k] *= step[k];
  }
};

std::array<cd, 2> initial_state(const Model& m) {
  Rng rng(derive_seed(m.seed, {~0ULL}));
  std::normal_distribution<double> n01;
  std::array<cd, 2> z;
  for (int k = 0; k < 2; ++k) z[k] = std::sqrt(m.env[k].power) * complex_normal(rng, n01);
  return z;
}

// Runs the recursion over block j from state `z`, writing samples to dst.
std::array<cd, 2> run_block(const Model& m, std::size_t j, std::array<cd, 2> z, double* dst) {
  Rng rs(derive_seed(m.seed, {j, 0})), ra(derive_seed(m.seed, {j, 1})), rw(derive_seed(m.seed, {j, 2}));
  std::normal_distribution<double> ns, na, nw;
  Carriers c(m, j);
  const std::size_t len = block_length(m, j);
  for (std::size_t r = 0; r < len; ++r) {
    z[0] = m.env[0].a * z[0] + m.env[0].sigma * complex_normal(rs, ns);
    z[1] = m.env[1].a * z[1] + m.env[1].sigma * complex_normal(ra, na);
    const double s = kSqrt2 * ((z[0] * c.p[0]).real() + (z[1] * c.p[1]).real() + (m.tone_amp[0] * c.p[2]).real() +
                               (m.tone_amp[1] * c.p[3]).real());
    dst[r] = s + m.white_sigma * nw(rw);
    c.advance();
  }
  return z;
}

// Adds the propagated response to the block's true initial state C: a^{r+1} C.
void add_carry(const Model& m, std::size_t j, const std::array<cd, 2>& carry, double* dst) {
  Carriers c(m, j);
  std::array<cd, 2> f = carry;
  const double floor = 1e-18 * std::sqrt(std::max(m.env[0].power, m.env[1].power) + 1e-300);
  const std::size_t len = block_length(m, j);
  for (std::size_t r = 0; r < len; ++r) {
    f[0] *= m.env[0].a;
    f[1] *= m.env[1].a;
    dst[r] += kSqrt2 * ((f[0] * c.p[0]).real() + (f[1] * c.p[1]).real());
    if (std::abs(f[0]) + std::abs(f[1]) < floor) break;
    c.advance();
  }
}

// Generates blocks [first, first + count) into out (offset by the first block's start).
void synth_blocks(const Model& m, std::size_t first, std::size_t count, std::array<cd, 2>& carry, double* out,
                  Execution exec) {
  const std::size_t base = first * kSynthesisBlock;
  if (exec == Execution::Serial) {
    for (std::size_t j = first; j < first + count; ++j)
      carry = run_block(m, j, carry, out + (j * kSynthesisBlock - base));
    return;
  }
  std::vector<std::array<cd, 2>> ends(count);
  const long long nb = static_cast<long long>(count);
#pragma omp parallel for schedule(static)
  for (long long b = 0; b < nb; ++b) {
    const std::size_t j = first + static_cast<std::size_t>(b);
    ends[static_cast<std::size_t>(b)] = run_block(m, j, {cd{}, cd{}}, out + (j * kSynthesisBlock - base));
  }
  std::vector<std::array<cd, 2>> starts(count);
  for (std::size_t b = 0; b < count; ++b) {
    starts[b] = carry;
    const double aL = std::pow(m.env[0].a, static_cast<double>(block_length(m, first + b)));
    for (int k = 0; k < 2; ++k) carry[k] = aL * carry[k] + ends[b][k];
  }
#pragma omp parallel for schedule(static)
  for (long long b = 0; b < nb; ++b) {
    const std::size_t j = first + static_cast<std::size_t>(b);
    add_carry(m, j, starts[static_cast<std::size_t>(b)], out + (j * kSynthesisBlock - base));
  }
}

TimeSeries make_series(const Model& m, std::uint64_t seed) {
  TimeSeries ts;
  ts.t0 = m.t0;
  ts.dt = m.dt;
  ts.samples.assign(m.n, 0.0);
  ts.provenance.seed = seed;
  ts.provenance.tool_version = QGPROBE_VERSION;
  return ts;
}

}  // namespace

double BhdLines::continuum_psd(double f_hz) const {
  const double hw = 0.5 * width_hz;
  auto lor = [hw](double area, double df) { return area * hw / (std::numbers::pi * (df * df + hw * hw)); };
  return background_psd + lor(stokes_area, f_hz - stokes_hz) + lor(antistokes_area, f_hz - antistokes_hz);
}

BhdLines bhd_lines(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                   const DetectionConfig& det) {
  const double omega = state.omega_eff > 0.0 ? state.omega_eff : mode.omega_m;
  BhdLines l;
  l.stokes_hz = (omega + det.delta_lo) / kTwoPi;
  l.antistokes_hz = (omega - det.delta_lo) / kTwoPi;
  l.width_hz = state.gamma_eff / kTwoPi;
  l.stokes_area = det.phonon_gain * (state.n_bar + 1.0) / det.c_stokes;
  l.antistokes_area = det.phonon_gain * state.n_bar / det.c_antistokes;
  l.coherent_stokes_hz = (det.omega_exc + det.delta_lo) / kTwoPi;
  l.coherent_antistokes_hz = (det.omega_exc - det.delta_lo) / kTwoPi;
  l.coherent_stokes_power = det.phonon_gain * state.alpha2() / det.c_stokes;
  l.coherent_antistokes_power = det.phonon_gain * state.alpha2() / det.c_antistokes;
  l.background_psd = det.background_psd;
  return l;
}

TimeSeries synthesize_bhd(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                          const optomech::OpticalCavity& cavity, const DetectionConfig& det, double duration,
                          std::uint64_t seed, Execution exec) {
  const Model m = make_model(state, mode, cavity, det, duration, seed);
  TimeSeries ts = make_series(m, seed);
  auto carry = initial_state(m);
  synth_blocks(m, 0, n_blocks(m), carry, ts.samples.data(), exec);
  return ts;
}

TimeSeries synthesize_bhd_reference(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                                    const optomech::OpticalCavity& cavity, const DetectionConfig& det,
                                    double duration, std::uint64_t seed) {
  const Model m = make_model(state, mode, cavity, det, duration, seed);
  TimeSeries ts = make_series(m, seed);
  auto z = initial_state(m);
  for (std::size_t j = 0; j < n_blocks(m); ++j) z = run_block(m, j, z, ts.samples.data() + j * kSynthesisBlock);
  return ts;
}

SpectrumEstimate synthesize_bhd_spectrum(const optomech::CooledState& state, const dynamics::MechanicalMode& mode,
                                         const optomech::OpticalCavity& cavity, const DetectionConfig& det,
                                         double duration, std::uint64_t seed, const WelchOptions& welch,
                                         Execution exec) {
  const Model m = make_model(state, mode, cavity, det, duration, seed);
  if (welch.segment_length > m.n) throw Error(ErrorCode::SegmentTooLong, "segment length exceeds record length");
  WelchAccumulator acc(welch, det.sample_rate, exec);
  constexpr std::size_t kChunkBlocks = 64;
  std::vector<double> buf(kChunkBlocks * kSynthesisBlock);
  auto carry = initial_state(m);
  const std::size_t nb = n_blocks(m);
  for (std::size_t first = 0; first < nb; first += kChunkBlocks) {
    const std::size_t count = std::min(kChunkBlocks, nb - first);
    synth_blocks(m, first, count, carry, buf.data(), exec);
    const std::size_t n = std::min(m.n, (first + count) * kSynthesisBlock) - first * kSynthesisBlock;
    acc.push(buf.data(), n);
  }
  SpectrumEstimate s = acc.result();
  s.provenance.seed = seed;
  s.provenance.tool_version = QGPROBE_VERSION;
  return s;
}

}  // namespace qgprobe::detection
