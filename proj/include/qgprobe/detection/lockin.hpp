#pragma once

#include <complex>
#include <vector>

#include "qgprobe/detection/detection_config.hpp"
#include "qgprobe/detection/timeseries.hpp"

namespace qgprobe::detection {

struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

/// Cascade of second-order sections (a first-order section is a biquad with b2 = a2 = 0).
struct IirFilter {
  std::vector<Biquad> sections;

  /// H(e^{i 2 pi f / fs})
  std::complex<double> response(double f_hz, double fs) const;
};

/// Digital Butterworth low-pass by the bilinear transform with pre-warping.
/// Throws FilterUnstable for order < 1, cutoff <= 0 or cutoff >= fs / 2.
IirFilter butterworth_lowpass(int order, double cutoff_hz, double fs);

/// Filter state for streaming use; direct form II transposed.
class IirState {
 public:
  explicit IirState(const IirFilter& filter);
  double step(double in);

 private:
  const IirFilter* filter_;
  std::vector<double> z1_, z2_;
};

/// X + iY = LP[2 s(t) exp(i omega_ref t)], decimated by det.decimation.
/// Output sample k corresponds to input sample k * decimation.
QuadratureRecord lockin_demodulate(const TimeSeries& ts, const DetectionConfig& det);

/// |H| of the configured lock-in low-pass at a demodulated offset frequency.
double lockin_passband_gain(const DetectionConfig& det, double offset_hz);

}  // namespace qgprobe::detection
