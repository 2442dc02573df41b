#include "qgprobe/detection/lockin.hpp"

#include <cmath>
#include <numbers>

#include "qgprobe/error.hpp"

namespace qgprobe::detection {

double DetectionConfig::antistokes_line_hz() const {
  return (lockin_ref - (omega_exc - delta_lo)) / (2.0 * std::numbers::pi);
}

double DetectionConfig::stokes_line_hz() const {
  return (omega_exc + delta_lo - lockin_ref) / (2.0 * std::numbers::pi);
}

void DetectionConfig::validate(double omega_m) const {
  const double f_m = omega_m / (2.0 * std::numbers::pi);
  if (!(sample_rate > 4.0 * (f_m + 16e3)))
    throw Error(ErrorCode::NyquistViolation, "sample rate must exceed 4 (f_m + 16 kHz)");
  if (!(delta_lo > 0.0) || !(delta_lo < 0.1 * omega_m))
    throw Error(ErrorCode::InvalidArgument, "Delta_LO must be positive and well below Omega_m");
  if (!(c_stokes > 0.0) || !(c_antistokes > 0.0))
    throw Error(ErrorCode::InvalidArgument, "detuning correction factors must be > 0");
  if (!(lockin_ref > 0.0) || !(lockin_ref < std::numbers::pi * sample_rate))
    throw Error(ErrorCode::NyquistViolation, "lock-in reference outside (0, Nyquist)");
  if (decimation < 1) throw Error(ErrorCode::InvalidArgument, "decimation must be >= 1");
  if (!(background_psd >= 0.0) || !(phonon_gain > 0.0))
    throw Error(ErrorCode::InvalidArgument, "background must be >= 0 and phonon gain > 0");
}

std::complex<double> IirFilter::response(double f_hz, double fs) const {
  const std::complex<double> zinv = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs);
  std::complex<double> h{1.0, 0.0};
  for (const auto& s : sections) {
    const auto num = s.b0 + s.b1 * zinv + s.b2 * zinv * zinv;
    const auto den = 1.0 + s.a1 * zinv + s.a2 * zinv * zinv;
    h *= num / den;
  }
  return h;
}

IirFilter butterworth_lowpass(int order, double cutoff_hz, double fs) {
  if (order < 1 || !(cutoff_hz > 0.0) || !(cutoff_hz < 0.5 * fs) || !(fs > 0.0))
    throw Error(ErrorCode::FilterUnstable, "degenerate low-pass configuration");
  const double k = 2.0 * fs;
  const double w = k * std::tan(std::numbers::pi * cutoff_hz / fs);
  IirFilter f;
  for (int i = 0; i < order / 2; ++i) {
    const double zeta = std::sin(std::numbers::pi * (2 * i + 1) / (2.0 * order));
    const double a0 = k * k + 2.0 * zeta * w * k + w * w;
    Biquad s;
    s.b0 = w * w / a0;
    s.b1 = 2.0 * w * w / a0;
    s.b2 = w * w / a0;
    s.a1 = 2.0 * (w * w - k * k) / a0;
    s.a2 = (k * k - 2.0 * zeta * w * k + w * w) / a0;
    f.sections.push_back(s);
  }
  if (order % 2 == 1) {
    const double a0 = k + w;
    Biquad s;
    s.b0 = w / a0;
    s.b1 = w / a0;
    s.a1 = (w - k) / a0;
    f.sections.push_back(s);
  }
  return f;
}

IirState::IirState(const IirFilter& filter)
    : filter_(&filter), z1_(filter.sections.size(), 0.0), z2_(filter.sections.size(), 0.0) {}

double IirState::step(double in) {
  double v = in;
  for (std::size_t i = 0; i < filter_->sections.size(); ++i) {
    const Biquad& s = filter_->sections[i];
    const double out = s.b0 * v + z1_[i];
    z1_[i] = s.b1 * v - s.a1 * out + z2_[i];
    z2_[i] = s.b2 * v - s.a2 * out;
    v = out;
  }
  return v;
}

QuadratureRecord lockin_demodulate(const TimeSeries& ts, const DetectionConfig& det) {
  if (!(det.lockin_ref > 0.0) || !(det.lockin_ref < std::numbers::pi / ts.dt))
    throw Error(ErrorCode::NyquistViolation, "lock-in reference outside (0, Nyquist)");
  if (det.decimation < 1) throw Error(ErrorCode::InvalidArgument, "decimation must be >= 1");
  const IirFilter lp = butterworth_lowpass(det.lockin_filter_order, det.lockin_bandwidth, 1.0 / ts.dt);
  IirState fx(lp), fy(lp);

  QuadratureRecord rec;
  const std::size_t d = static_cast<std::size_t>(det.decimation);
  const std::size_t n_out = (ts.size() + d - 1) / d;
  rec.x.t0 = rec.y.t0 = ts.t0;
  rec.x.dt = rec.y.dt = ts.dt * static_cast<double>(d);
  rec.x.provenance = rec.y.provenance = ts.provenance;
  rec.x.samples.reserve(n_out);
  rec.y.samples.reserve(n_out);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double phase = det.lockin_ref * ts.time(i);
    const double two_s = 2.0 * ts.samples[i];
    const double xo = fx.step(two_s * std::cos(phase));
    const double yo = fy.step(two_s * std::sin(phase));
    if (i % d == 0) {
      rec.x.samples.push_back(xo);
      rec.y.samples.push_back(yo);
    }
  }
  return rec;
}

double lockin_passband_gain(const DetectionConfig& det, double offset_hz) {
  const IirFilter lp = butterworth_lowpass(det.lockin_filter_order, det.lockin_bandwidth, det.sample_rate);
  return std::abs(lp.response(offset_hz, det.sample_rate));
}

}  // namespace qgprobe::detection
