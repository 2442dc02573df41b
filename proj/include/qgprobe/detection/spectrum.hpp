#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "qgprobe/detection/timeseries.hpp"
#include "qgprobe/parallel.hpp"

namespace qgprobe::detection {

enum class Window { Rectangular, Hann };

struct WelchOptions {
  std::size_t segment_length = 51200;  // 50 Hz bins at 2.56 MHz
  double overlap = 0.5;                // fraction of a segment
  Window window = Window::Hann;
  bool detrend_mean = true;

  std::size_t hop() const;
  /// Segment length giving `resolution_hz` bins at `fs`.
  static WelchOptions for_resolution(double resolution_hz, double fs);
};

/// One-sided PSD; integrates to the signal variance.
struct SpectrumEstimate {
  std::vector<double> freqs;  // Hz
  std::vector<double> psd;    // units^2 / Hz
  double resolution = 0.0;    // Hz
  std::int64_t n_averages = 0;
  Provenance provenance;

  std::size_t size() const { return freqs.size(); }
  /// Index of the bin nearest to f.
  std::size_t bin(double f_hz) const;
  /// Rectangle-rule integral of the PSD over [f_lo, f_hi].
  double band_power(double f_lo, double f_hi) const;
  double total_power() const;
  void validate() const;
};

/// Averaged modified periodogram. Throws SegmentTooLong when the segment exceeds the series.
SpectrumEstimate welch_psd(const TimeSeries& ts, const WelchOptions& opt, Execution exec = Execution::Parallel);

/// Plain single-threaded loop, kept as the reference for the parallel kernel.
SpectrumEstimate welch_psd_reference(const TimeSeries& ts, const WelchOptions& opt);

/// Streaming Welch estimator: feed contiguous chunks, segments are taken across
/// chunk boundaries. Periodograms are summed in segment order, so the result does
/// not depend on chunking or thread count.
class WelchAccumulator {
 public:
  WelchAccumulator(const WelchOptions& opt, double sample_rate, Execution exec = Execution::Parallel);
  ~WelchAccumulator();
  WelchAccumulator(const WelchAccumulator&) = delete;
  WelchAccumulator& operator=(const WelchAccumulator&) = delete;

  void push(const double* data, std::size_t n);
  void push(const std::vector<double>& data) { push(data.data(), data.size()); }
  std::int64_t segments() const { return n_segments_; }
  /// Throws SegmentTooLong if no complete segment has been seen.
  SpectrumEstimate result() const;

 private:
  struct Plan;
  void process(const std::vector<const double*>& segments);

  WelchOptions opt_;
  double fs_;
  Execution exec_;
  std::vector<double> window_;
  double window_power_ = 0.0;
  std::vector<double> pending_;
  std::vector<double> sum_;
  std::int64_t n_segments_ = 0;
  std::unique_ptr<Plan> plan_;
};

/// Two-column text export ("freq_Hz psd") with a '#' header carrying provenance.
void write_spectrum(std::ostream& out, const SpectrumEstimate& s);
SpectrumEstimate read_spectrum(std::istream& in);
void write_spectrum_file(const std::filesystem::path& path, const SpectrumEstimate& s);
SpectrumEstimate read_spectrum_file(const std::filesystem::path& path);

}  // namespace qgprobe::detection
