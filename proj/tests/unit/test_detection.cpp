#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <sstream>

#include "doctest.h"
#include "qgprobe/detection/lockin.hpp"
#include "qgprobe/detection/lorentzian.hpp"
#include "qgprobe/detection/spectrum.hpp"
#include "qgprobe/detection/synthesis.hpp"
#include "qgprobe/error.hpp"
#include "unit/oracles.hpp"

using namespace qgprobe;
using namespace qgprobe::detection;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

TimeSeries tones(const std::vector<std::pair<double, double>>& freq_amp, double fs, std::size_t n, double phase = 0.3) {
  TimeSeries ts;
  ts.dt = 1.0 / fs;
  ts.samples.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& [f, a] : freq_amp) ts.samples[i] += a * std::cos(kTwoPi * f * ts.time(i) + phase);
  return ts;
}

// Mean rotation rate of X + iY after the filter has settled, Hz.
double rotation_hz(const QuadratureRecord& rec, double t_settle) {
  std::vector<double> t, ph;
  double acc = 0.0, last = 0.0;
  bool first = true;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    if (rec.time(i) < t_settle) continue;
    const double a = std::atan2(rec.y.samples[i], rec.x.samples[i]);
    if (first) {
      acc = a;
      first = false;
    } else {
      double d = a - last;
      while (d > std::numbers::pi) d -= kTwoPi;
      while (d < -std::numbers::pi) d += kTwoPi;
      acc += d;
    }
    last = a;
    t.push_back(rec.time(i));
    ph.push_back(acc);
  }
  double slope, offset;
  oracle::line_fit(t, ph, slope, offset);
  return slope / kTwoPi;
}

double settled_magnitude(const QuadratureRecord& rec, double t_settle) {
  std::vector<double> m;
  for (std::size_t i = 0; i < rec.size(); ++i)
    if (rec.time(i) >= t_settle) m.push_back(std::hypot(rec.x.samples[i], rec.y.samples[i]));
  return oracle::mean(m);
}

// Bilinear-transformed Butterworth with pre-warping: |H| = 1 / sqrt(1 + (wa / wc)^(2n)).
double butterworth_gain(double f, double fc, double fs, int order) {
  const double wa = std::tan(std::numbers::pi * f / fs), wc = std::tan(std::numbers::pi * fc / fs);
  return 1.0 / std::sqrt(1.0 + std::pow(wa / wc, 2 * order));
}

optomech::CooledState state(double n, double alpha2) {
  optomech::CooledState s;
  s.n_bar = n;
  s.gamma_eff = kTwoPi * 6e3;
  s.omega_eff = kTwoPi * 525.8e3;
  s.alpha = std::polar(std::sqrt(alpha2), 0.4);
  return s;
}

SpectrumEstimate synth_spectrum(double n, double alpha2, double seconds, std::uint64_t seed) {
  DetectionConfig det;
  return synthesize_bhd_spectrum(state(n, alpha2), {}, {}, det, seconds, seed, WelchOptions::for_resolution(50.0, det.sample_rate));
}

}  // namespace

TEST_SUITE("detection") {
  TEST_CASE("configuration checks") {
    DetectionConfig det;
    const double w = kTwoPi * 525.8e3;
    CHECK_NOTHROW(det.validate(w));
    CHECK(det.antistokes_line_hz() == doctest::Approx(8000.0).epsilon(1e-12));
    CHECK(det.stokes_line_hz() == doctest::Approx(16000.0).epsilon(1e-12));
    CHECK(det.output_rate() == 320e3);
    auto slow = det;
    slow.sample_rate = 4.0 * (525.8e3 + 16e3) - 1.0;
    CHECK_THROWS_WITH_AS(slow.validate(w), doctest::Contains("NyquistViolation"), Error);
    auto wide = det;
    wide.delta_lo = 0.5 * w;
    CHECK_THROWS_AS(wide.validate(w), Error);
    auto neg = det;
    neg.c_antistokes = 0.0;
    CHECK_THROWS_AS(neg.validate(w), Error);
  }

  TEST_CASE("Butterworth low-pass") {
    const double fs = 2.56e6;
    const auto lp = butterworth_lowpass(4, 20e3, fs);
    CHECK(lp.sections.size() == 2);
    CHECK(std::abs(lp.response(0.0, fs)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(lp.response(20e3, fs)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));
    for (double f : {1e3, 8e3, 16e3, 40e3, 300e3})
      CHECK(std::abs(lp.response(f, fs)) == doctest::Approx(butterworth_gain(f, 20e3, fs, 4)).epsilon(1e-10));
    const auto odd = butterworth_lowpass(3, 20e3, fs);
    CHECK(std::abs(odd.response(20e3, fs)) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));
    CHECK_THROWS_WITH_AS(butterworth_lowpass(0, 20e3, fs), doctest::Contains("FilterUnstable"), Error);
    CHECK_THROWS_AS(butterworth_lowpass(4, 0.0, fs), Error);
    CHECK_THROWS_AS(butterworth_lowpass(4, fs / 2, fs), Error);
  }

  TEST_CASE("lock-in frequency bookkeeping") {
    DetectionConfig det;
    const double fs = det.sample_rate;
    const double f_exc = det.omega_exc / kTwoPi, f_lo = det.delta_lo / kTwoPi;

    // tone at the reference demodulates to DC
    const auto dc = lockin_demodulate(tones({{det.lockin_ref / kTwoPi, 1.0}}, fs, 1 << 13), det);
    CHECK(std::abs(rotation_hz(dc, 1e-3)) < 1e-6);
    CHECK(settled_magnitude(dc, 1e-3) == doctest::Approx(1.0).epsilon(1e-6));

    for (double f_m : {-1000.0, -250.0, 0.0, 3.0, 700.0, 1000.0}) {
      CAPTURE(f_m);
      const auto as = lockin_demodulate(tones({{f_exc + f_m - f_lo, 1.0}}, fs, 1 << 13), det);
      const auto st = lockin_demodulate(tones({{f_exc + f_m + f_lo, 1.0}}, fs, 1 << 13), det);
      const double r_as = rotation_hz(as, 1e-3), r_st = rotation_hz(st, 1e-3);
      // anti-Stokes turns forward at 8 kHz - f_m, Stokes backward at 16 kHz + f_m
      CHECK(r_as == doctest::Approx(8000.0 - f_m).epsilon(1e-9));
      CHECK(-r_st == doctest::Approx(16000.0 + f_m).epsilon(1e-9));
      CHECK(r_as - r_st == doctest::Approx(24000.0).epsilon(1e-9));
    }
  }

  TEST_CASE("lock-in passband amplitude") {
    DetectionConfig det;
    const double fs = det.sample_rate;
    const double f_exc = det.omega_exc / kTwoPi, f_lo = det.delta_lo / kTwoPi;
    for (double off : {8e3, 16e3}) {
      const double f_in = off == 8e3 ? f_exc - f_lo : f_exc + f_lo;
      const auto rec = lockin_demodulate(tones({{f_in, 0.37}}, fs, 1 << 13), det);
      const double expected = 0.37 * butterworth_gain(off, det.lockin_bandwidth, fs, det.lockin_filter_order);
      CHECK(settled_magnitude(rec, 1e-3) == doctest::Approx(expected).epsilon(1e-5));
      CHECK(lockin_passband_gain(det, off) == doctest::Approx(expected / 0.37).epsilon(1e-10));
    }
    // the 8 kHz line loses less than 1 %; the 16 kHz droop is documented separately
    CHECK(lockin_passband_gain(det, 8e3) > 0.99);
    CHECK(lockin_passband_gain(det, 16e3) == doctest::Approx(0.9254).epsilon(1e-3));
    // out-of-band switching tones are rejected
    CHECK(lockin_passband_gain(det, 521.8e3 - 350e3) < 2e-4);
  }

  TEST_CASE("lock-in linearity and geometry") {
    DetectionConfig det;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    TimeSeries s, r, comb;
    s.dt = r.dt = comb.dt = 1.0 / det.sample_rate;
    for (int i = 0; i < 20000; ++i) {
      s.samples.push_back(n01(rng));
      r.samples.push_back(n01(rng));
      comb.samples.push_back(2.5 * s.samples.back() - 0.75 * r.samples.back());
    }
    const auto ds = lockin_demodulate(s, det), dr = lockin_demodulate(r, det), dc = lockin_demodulate(comb, det);
    CHECK(dc.size() == 2500);
    CHECK(dc.x.dt == doctest::Approx(8.0 / det.sample_rate).epsilon(1e-15));
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < dc.size(); ++i) {
      worst = std::max(worst, std::abs(dc.x.samples[i] - (2.5 * ds.x.samples[i] - 0.75 * dr.x.samples[i])));
      worst = std::max(worst, std::abs(dc.y.samples[i] - (2.5 * ds.y.samples[i] - 0.75 * dr.y.samples[i])));
      scale = std::max(scale, std::abs(dc.x.samples[i]));
    }
    CHECK(worst < 1e-12 * scale);
    auto bad = det;
    bad.lockin_ref = 0.6 * kTwoPi * det.sample_rate;
    CHECK_THROWS_AS(lockin_demodulate(s, bad), Error);
    bad = det;
    bad.lockin_filter_order = 0;
    CHECK_THROWS_WITH_AS(lockin_demodulate(s, bad), doctest::Contains("FilterUnstable"), Error);
  }

  TEST_CASE("Welch estimator") {
    const double fs = 100e3;
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    TimeSeries w;
    w.dt = 1.0 / fs;
    const double sigma = 0.7;
    for (int i = 0; i < 400000; ++i) w.samples.push_back(sigma * n01(rng));
    WelchOptions opt;
    opt.segment_length = 2048;
    const auto s = welch_psd(w, opt);
    CHECK(s.n_averages >= 100);
    CHECK_NOTHROW(s.validate());
    std::vector<double> inner(s.psd.begin() + 5, s.psd.end() - 5);
    CHECK(oracle::mean(inner) == doctest::Approx(sigma * sigma / (fs / 2)).epsilon(0.05));
    double var = 0.0;
    const double m = oracle::mean(w.samples);
    for (double v : w.samples) var += (v - m) * (v - m);
    var /= static_cast<double>(w.size());
    CHECK(s.total_power() == doctest::Approx(var).epsilon(0.01));

    const auto tone = tones({{12345.0, 0.8}}, fs, 200000);
    const auto st = welch_psd(tone, opt);
    CHECK(st.band_power(12345.0 - 400.0, 12345.0 + 400.0) == doctest::Approx(0.32).epsilon(0.02));
    CHECK(st.total_power() == doctest::Approx(0.32).epsilon(0.01));

    opt.segment_length = 500000;
    CHECK_THROWS_WITH_AS(welch_psd(w, opt), doctest::Contains("SegmentTooLong"), Error);
  }

  TEST_CASE("Welch parallel kernel and streaming match the reference") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    TimeSeries w;
    w.dt = 1e-5;
    for (int i = 0; i < 300001; ++i) w.samples.push_back(n01(rng));
    WelchOptions opt;
    opt.segment_length = 4096;
    const auto ref = welch_psd_reference(w, opt);
    const auto par = welch_psd(w, opt, Execution::Parallel);
    const auto ser = welch_psd(w, opt, Execution::Serial);
    REQUIRE(ref.size() == par.size());
    CHECK(ref.n_averages == par.n_averages);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      CHECK(par.psd[k] == ser.psd[k]);
      CHECK(par.psd[k] == doctest::Approx(ref.psd[k]).epsilon(1e-12));
    }
    WelchAccumulator acc(opt, 1e5);
    std::size_t pos = 0, step = 777;
    while (pos < w.size()) {
      const std::size_t n = std::min(step, w.size() - pos);
      acc.push(w.samples.data() + pos, n);
      pos += n;
      step = step * 3 % 10007 + 1;
    }
    const auto streamed = acc.result();
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(streamed.psd[k] == par.psd[k]);
  }

  TEST_CASE("spectrum and record files round trip") {
    const auto dir = oracle::temp_dir("files");
    const auto tone = tones({{1000.0, 1.0}}, 1e5, 4096);
    TimeSeries ts = tone;
    ts.t0 = -1e-3;
    ts.provenance = {99, "abcdef0123456789", "x"};
    write_timeseries_file(dir / "a.ts", ts);
    const auto back = read_timeseries_file(dir / "a.ts");
    CHECK(back.samples == ts.samples);
    CHECK(back.t0 == ts.t0);
    CHECK(back.dt == ts.dt);
    CHECK(back.provenance.seed == 99);
    CHECK(back.provenance.config_hash == "abcdef0123456789");

    QuadratureRecord rec;
    rec.x = ts;
    rec.y = ts;
    rec.y.samples[7] = -3.0;
    rec.cycle_index = 40;
    write_record_file(dir / "r.qrec", rec);
    const auto rb = read_record_file(dir / "r.qrec");
    CHECK(rb.cycle_index == 40);
    CHECK(rb.y.samples == rec.y.samples);

    WelchOptions opt;
    opt.segment_length = 1024;
    const auto spec = welch_psd(ts, opt);
    write_spectrum_file(dir / "s.psd", spec);
    const auto sb = read_spectrum_file(dir / "s.psd");
    REQUIRE(sb.size() == spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) CHECK(sb.psd[k] == doctest::Approx(spec.psd[k]).epsilon(1e-15));
    CHECK_THROWS_AS(read_record_file(dir / "missing.qrec"), Error);

    const auto avg = average_records({rec, rb});
    CHECK(avg.cycle_index == 40);
    CHECK(avg.y.samples[7] == -3.0);
    QuadratureRecord odd = rec;
    odd.y.samples.pop_back();
    CHECK_THROWS_AS(odd.validate(), Error);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("synthesis guards and determinism") {
    DetectionConfig det;
    const auto s = state(5.0, 35.0);
    CHECK_THROWS_WITH_AS(synthesize_bhd(s, {}, {}, det, 1e-4, 1), doctest::Contains("DurationTooShort"), Error);
    auto slow = det;
    slow.sample_rate = 1e6;
    CHECK_THROWS_WITH_AS(synthesize_bhd(s, {}, {}, slow, 0.01, 1), doctest::Contains("NyquistViolation"), Error);

    const auto a = synthesize_bhd(s, {}, {}, det, 0.2, 17, Execution::Parallel);
    const auto b = synthesize_bhd(s, {}, {}, det, 0.2, 17, Execution::Serial);
    const auto r = synthesize_bhd_reference(s, {}, {}, det, 0.2, 17);
    const auto c = synthesize_bhd(s, {}, {}, det, 0.2, 18);
    REQUIRE(a.size() == r.size());
    const auto a2 = synthesize_bhd(s, {}, {}, det, 0.2, 17, Execution::Parallel);
    CHECK(a.samples == a2.samples);
    // the serial path is the recursion itself; the blocked path differs by rounding only
    CHECK(b.samples == r.samples);
    double worst = 0.0, rms = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      worst = std::max(worst, std::abs(a.samples[i] - r.samples[i]));
      rms += r.samples[i] * r.samples[i];
    }
    rms = std::sqrt(rms / static_cast<double>(a.size()));
    CHECK(worst < 1e-9 * rms);
    CHECK(a.samples != c.samples);
    CHECK(a.provenance.seed == 17);
  }

  TEST_CASE("line bookkeeping") {
    DetectionConfig det;
    const auto l = bhd_lines(state(5.0, 35.0), {}, det);
    CHECK(l.stokes_hz - l.antistokes_hz == doctest::Approx(24e3).epsilon(1e-12));
    CHECK(l.width_hz == doctest::Approx(6e3).epsilon(1e-12));
    CHECK(l.stokes_area / l.antistokes_area == doctest::Approx(1.2).epsilon(1e-14));
    CHECK(l.coherent_stokes_power == doctest::Approx(35.0).epsilon(1e-12));
  }

  TEST_CASE("synthesized spectrum: thermometry round trip at n = 5") {
    const auto spec = synth_spectrum(5.0, 0.0, 4.0, 21);
    CHECK(spec.n_averages >= 200);
    DetectionConfig det;
    const auto fit = fit_lorentzian_pair(spec, det);
    CHECK(fit.ratio == doctest::Approx(1.2).epsilon(0.05 / 1.2));
    CHECK(fit.n_bar == doctest::Approx(5.0).epsilon(0.1));
    CHECK(fit.stokes.width == doctest::Approx(6e3).epsilon(0.05));
    CHECK(fit.antistokes.width == doctest::Approx(6e3).epsilon(0.05));
    const double sw = std::hypot(fit.stokes.width_err, fit.antistokes.width_err);
    CHECK(std::abs(fit.stokes.width - fit.antistokes.width) < 3.0 * sw);
    const double sep = fit.stokes.center - fit.antistokes.center;
    CHECK(std::abs(sep - 24e3) < 3.0 * std::hypot(fit.stokes.center_err, fit.antistokes.center_err) + 1e-9);
    CHECK(fit.area_difference() - 1.645 * fit.area_difference_err() > 0.0);
    CHECK(fit.reduced_chi2 > 0.0);
    CHECK(fit.stokes.width_err > 1.0);  // realistic, not collapsed
  }

  TEST_CASE("thermometry consistency across occupancies") {
    DetectionConfig det;
    for (auto [n, seconds] : {std::pair{1.0, 4.0}, std::pair{20.0, 30.0}}) {
      CAPTURE(n);
      const auto fit = fit_lorentzian_pair(synth_spectrum(n, 0.0, seconds, 31), det);
      CAPTURE(fit.n_bar_err);
      CHECK(fit.n_bar == doctest::Approx(n).epsilon(0.15));
      CHECK(fit.area_difference() - 1.645 * fit.area_difference_err() > 0.0);
    }
    // Classical limit: R - 1 = 0.01 is below what a 2 s stationary record (the default) resolves at 2 sigma.
    const auto hot = fit_lorentzian_pair(synth_spectrum(100.0, 0.0, 2.0, 31), det);
    CAPTURE(hot.ratio);
    CAPTURE(hot.ratio_err);
    CHECK(std::abs(hot.ratio - 1.0) < 2.0 * hot.ratio_err);
  }

  TEST_CASE("ground state has no anti-Stokes line") {
    DetectionConfig det;
    const auto spec = synth_spectrum(0.0, 0.0, 4.0, 41);
    const auto fit = fit_lorentzian_pair(spec, det);
    CHECK(std::abs(fit.antistokes.area) < 3.0 * fit.antistokes.area_err);
    CHECK(fit.stokes.area > 10.0 * fit.stokes.area_err);
  }

  TEST_CASE("equal sidebands give unit ratio") {
    // noiseless spectrum built from the expected line shape
    DetectionConfig det;
    auto lines = bhd_lines(state(5.0, 0.0), {}, det);
    lines.antistokes_area = lines.stokes_area;
    SpectrumEstimate s;
    s.resolution = 50.0;
    s.n_averages = 1000;
    for (double f = 0.0; f < 1.28e6; f += 50.0) {
      s.freqs.push_back(f);
      s.psd.push_back(lines.continuum_psd(f));
    }
    const auto fit = fit_lorentzian_pair(s, det);
    CHECK(fit.ratio == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(fit.stokes.width == doctest::Approx(fit.antistokes.width).epsilon(1e-6));

    auto moved = det;
    moved.omega_exc = kTwoPi * 1.26e6;
    CHECK_THROWS_WITH_AS(fit_lorentzian_pair(s, moved), doctest::Contains("WindowOutOfRange"), Error);
  }

  TEST_CASE("coherent peak") {
    // (n + 1/2) x peak / Lorentzian area with the quoted numbers
    CHECK((6.6 + 0.5) * (35.0 / 7.1) == doctest::Approx(35.0).epsilon(1e-14));

    DetectionConfig det;
    const auto spec = synth_spectrum(6.6, 35.0, 4.0, 51);
    const auto fit = fit_lorentzian_pair(spec, det);
    const auto peak = coherent_peak_analysis(spec, fit, det, true);
    CHECK(peak.resolved);
    CHECK(peak.alpha2 == doctest::Approx(35.0).epsilon(0.1));
    CHECK(peak.lorentzian_area == doctest::Approx(fit.corrected_stokes_area + fit.corrected_antistokes_area).epsilon(1e-12));

    const auto dark = synth_spectrum(6.6, 0.0, 4.0, 52);
    const auto dfit = fit_lorentzian_pair(dark, det);
    const auto dpeak = coherent_peak_analysis(dark, dfit, det, false);
    CHECK(std::abs(dpeak.alpha2) < 3.0 * dpeak.alpha2_err);
    CHECK_FALSE(dpeak.resolved);
    CHECK_THROWS_WITH_AS(coherent_peak_analysis(dark, dfit, det, true), doctest::Contains("PeakNotResolved"), Error);
  }
}
