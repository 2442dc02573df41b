#include "qgprobe/detection/spectrum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <sstream>

#include "qgprobe/error.hpp"

namespace qgprobe::detection {

namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::Hann) {
    for (std::size_t i = 0; i < n; ++i)
      out[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return out;
}

void check_options(const WelchOptions& opt) {
  if (opt.segment_length < 2) throw Error(ErrorCode::InvalidArgument, "segment length must be >= 2");
  if (!(opt.overlap >= 0.0) || !(opt.overlap < 1.0))
    throw Error(ErrorCode::InvalidArgument, "overlap must be in [0, 1)");
}

std::size_t n_bins(std::size_t n) { return n / 2 + 1; }

// 2 |X|^2 / (fs U), DC and Nyquist bins not doubled.
void accumulate_scaled(const fftw_complex* spec, std::size_t n, double fs, double u, double* dst) {
  const std::size_t nb = n_bins(n);
  const double scale = 1.0 / (fs * u);
  for (std::size_t k = 0; k < nb; ++k) {
    const double p = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
    const bool edge = (k == 0) || (n % 2 == 0 && k == nb - 1);
    dst[k] = (edge ? 1.0 : 2.0) * p * scale;
  }
}

SpectrumEstimate finish(const std::vector<double>& sum, std::int64_t n_seg, std::size_t n, double fs) {
  SpectrumEstimate s;
  s.resolution = fs / static_cast<double>(n);
  s.n_averages = n_seg;
  s.freqs.resize(sum.size());
  s.psd.resize(sum.size());
  for (std::size_t k = 0; k < sum.size(); ++k) {
    s.freqs[k] = static_cast<double>(k) * s.resolution;
    s.psd[k] = sum[k] / static_cast<double>(n_seg);
  }
  return s;
}

}  // namespace

std::size_t WelchOptions::hop() const {
  const auto h = static_cast<std::size_t>(std::llround(static_cast<double>(segment_length) * (1.0 - overlap)));
  return std::max<std::size_t>(h, 1);
}

WelchOptions WelchOptions::for_resolution(double resolution_hz, double fs) {
  if (!(resolution_hz > 0.0) || !(fs > resolution_hz))
    throw Error(ErrorCode::InvalidArgument, "resolution must be positive and below the sample rate");
  WelchOptions o;
  o.segment_length = static_cast<std::size_t>(std::llround(fs / resolution_hz));
  return o;
}

std::size_t SpectrumEstimate::bin(double f_hz) const {
  if (freqs.empty()) throw Error(ErrorCode::InvalidArgument, "empty spectrum");
  const double k = std::round((f_hz - freqs.front()) / resolution);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), freqs.size() - 1);
}

double SpectrumEstimate::band_power(double f_lo, double f_hi) const {
  double acc = 0.0;
  for (std::size_t k = bin(f_lo); k <= bin(f_hi) && k < psd.size(); ++k) acc += psd[k];
  return acc * resolution;
}

double SpectrumEstimate::total_power() const {
  double acc = 0.0;
  for (double p : psd) acc += p;
  return acc * resolution;
}

void SpectrumEstimate::validate() const {
  if (freqs.size() != psd.size()) throw Error(ErrorCode::InvalidArgument, "freqs/psd length mismatch");
  for (std::size_t k = 0; k < psd.size(); ++k) {
    if (!(psd[k] >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative or non-finite PSD value");
    if (k > 0 && !(freqs[k] > freqs[k - 1])) throw Error(ErrorCode::InvalidArgument, "frequencies not increasing");
  }
}

struct WelchAccumulator::Plan {
  std::size_t n = 0;
  fftw_plan plan = nullptr;
  double* in = nullptr;
  fftw_complex* out = nullptr;

  explicit Plan(std::size_t len) : n(len) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    in = fftw_alloc_real(n);
    out = fftw_alloc_complex(n_bins(n));
    // FFTW_ESTIMATE keeps the chosen algorithm, and hence the output bits, reproducible.
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~Plan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
};

WelchAccumulator::WelchAccumulator(const WelchOptions& opt, double sample_rate, Execution exec)
    : opt_(opt), fs_(sample_rate), exec_(exec) {
  check_options(opt_);
  if (!(fs_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample rate must be > 0");
  window_ = make_window(opt_.window, opt_.segment_length);
  for (double w : window_) window_power_ += w * w;
  sum_.assign(n_bins(opt_.segment_length), 0.0);
  plan_ = std::make_unique<Plan>(opt_.segment_length);
}

WelchAccumulator::~WelchAccumulator() = default;

void WelchAccumulator::push(const double* data, std::size_t n) {
  const std::size_t len = opt_.segment_length;
  const std::size_t hop = opt_.hop();
  const std::size_t np = pending_.size();
  const std::size_t total = np + n;

  // Stream = pending_ ++ data; segments start at multiples of hop from stream
  // position 0. Segments that straddle the two parts are copied.
  std::vector<const double*> starts;
  std::vector<std::vector<double>> straddling;
  std::size_t pos = 0;
  for (; pos + len <= total; pos += hop) {
    if (pos >= np) {
      starts.push_back(data + (pos - np));
    } else {
      std::vector<double> seg(len);
      for (std::size_t i = 0; i < len; ++i) seg[i] = pos + i < np ? pending_[pos + i] : data[pos + i - np];
      straddling.push_back(std::move(seg));
      starts.push_back(nullptr);
    }
  }
  std::size_t k = 0;
  for (auto& p : starts)
    if (p == nullptr) p = straddling[k++].data();
  process(starts);

  std::vector<double> rest;
  rest.reserve(total - std::min(pos, total));
  for (std::size_t i = pos; i < total; ++i) rest.push_back(i < np ? pending_[i] : data[i - np]);
  pending_.swap(rest);
}

void WelchAccumulator::process(const std::vector<const double*>& segments) {
  const std::size_t len = opt_.segment_length;
  const std::size_t nb = n_bins(len);
  constexpr std::size_t kBatch = 64;

  for (std::size_t first = 0; first < segments.size(); first += kBatch) {
    const std::size_t batch = std::min(kBatch, segments.size() - first);
    std::vector<double> periodograms(batch * nb);
    const long long nbatch = static_cast<long long>(batch);

#pragma omp parallel if (exec_ == Execution::Parallel)
    {
      double* in = fftw_alloc_real(len);
      fftw_complex* out = fftw_alloc_complex(nb);
#pragma omp for schedule(static)
      for (long long s = 0; s < nbatch; ++s) {
        const double* seg = segments[first + static_cast<std::size_t>(s)];
        double mean = 0.0;
        if (opt_.detrend_mean) {
          for (std::size_t i = 0; i < len; ++i) mean += seg[i];
          mean /= static_cast<double>(len);
        }
        for (std::size_t i = 0; i < len; ++i) in[i] = (seg[i] - mean) * window_[i];
        fftw_execute_dft_r2c(plan_->plan, in, out);
        accumulate_scaled(out, len, fs_, window_power_, periodograms.data() + static_cast<std::size_t>(s) * nb);
      }
      fftw_free(in);
      fftw_free(out);
    }

    for (std::size_t s = 0; s < batch; ++s)
      for (std::size_t j = 0; j < nb; ++j) sum_[j] += periodograms[s * nb + j];
    n_segments_ += static_cast<std::int64_t>(batch);
  }
}

SpectrumEstimate WelchAccumulator::result() const {
  if (n_segments_ == 0) throw Error(ErrorCode::SegmentTooLong, "no complete segment accumulated");
  return finish(sum_, n_segments_, opt_.segment_length, fs_);
}

SpectrumEstimate welch_psd(const TimeSeries& ts, const WelchOptions& opt, Execution exec) {
  check_options(opt);
  if (opt.segment_length > ts.size())
    throw Error(ErrorCode::SegmentTooLong, "segment length exceeds series length");
  WelchAccumulator acc(opt, ts.sample_rate(), exec);
  acc.push(ts.samples);
  SpectrumEstimate s = acc.result();
  s.provenance = ts.provenance;
  return s;
}

SpectrumEstimate welch_psd_reference(const TimeSeries& ts, const WelchOptions& opt) {
  check_options(opt);
  const std::size_t len = opt.segment_length;
  if (len > ts.size()) throw Error(ErrorCode::SegmentTooLong, "segment length exceeds series length");
  const std::size_t hop = opt.hop();
  const std::size_t nb = n_bins(len);
  const double fs = ts.sample_rate();
  const std::vector<double> w = make_window(opt.window, len);
  double u = 0.0;
  for (double v : w) u += v * v;

  double* in;
  fftw_complex* out;
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    in = fftw_alloc_real(len);
    out = fftw_alloc_complex(nb);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(len), in, out, FFTW_ESTIMATE);
  }

  std::vector<double> sum(nb, 0.0), one(nb);
  std::int64_t n_seg = 0;
  for (std::size_t start = 0; start + len <= ts.size(); start += hop) {
    double mean = 0.0;
    if (opt.detrend_mean) {
      for (std::size_t i = 0; i < len; ++i) mean += ts.samples[start + i];
      mean /= static_cast<double>(len);
    }
    for (std::size_t i = 0; i < len; ++i) in[i] = (ts.samples[start + i] - mean) * w[i];
    fftw_execute(plan);
    accumulate_scaled(out, len, fs, u, one.data());
    for (std::size_t k = 0; k < nb; ++k) sum[k] += one[k];
    ++n_seg;
  }
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  SpectrumEstimate s = finish(sum, n_seg, len, fs);
  s.provenance = ts.provenance;
  return s;
}

void write_spectrum(std::ostream& out, const SpectrumEstimate& s) {
  out.precision(17);
  out << "# qgprobe-spectrum 1\n";
  out << "# resolution_Hz: " << s.resolution << '\n';
  out << "# n_averages: " << s.n_averages << '\n';
  out << "# seed: " << s.provenance.seed << '\n';
  out << "# config_hash: " << (s.provenance.config_hash.empty() ? "-" : s.provenance.config_hash) << '\n';
  out << "# tool_version: " << (s.provenance.tool_version.empty() ? "-" : s.provenance.tool_version) << '\n';
  out << "# columns: freq_Hz psd_units2_per_Hz\n";
  std::ostringstream row;
  row.precision(17);
  for (std::size_t k = 0; k < s.size(); ++k) row << s.freqs[k] << ' ' << s.psd[k] << '\n';
  out << row.str();
}

SpectrumEstimate read_spectrum(std::istream& in) {
  SpectrumEstimate s;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(": ");
      if (colon == std::string::npos) continue;
      const std::string key = line.substr(2, colon - 2);
      const std::string val = line.substr(colon + 2);
      if (key == "resolution_Hz") s.resolution = std::stod(val);
      else if (key == "n_averages") s.n_averages = std::stoll(val);
      else if (key == "seed") s.provenance.seed = std::stoull(val);
      else if (key == "config_hash") s.provenance.config_hash = val == "-" ? "" : val;
      else if (key == "tool_version") s.provenance.tool_version = val == "-" ? "" : val;
      continue;
    }
    std::istringstream row(line);
    double f, p;
    if (!(row >> f >> p)) throw Error(ErrorCode::Io, "malformed spectrum row '" + line + "'");
    s.freqs.push_back(f);
    s.psd.push_back(p);
  }
  if (s.freqs.empty()) throw Error(ErrorCode::Io, "spectrum file has no rows");
  if (s.resolution <= 0.0 && s.freqs.size() > 1) s.resolution = s.freqs[1] - s.freqs[0];
  return s;
}

void write_spectrum_file(const std::filesystem::path& path, const SpectrumEstimate& s) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_spectrum(out, s);
}

SpectrumEstimate read_spectrum_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return read_spectrum(in);
}

}  // namespace qgprobe::detection
