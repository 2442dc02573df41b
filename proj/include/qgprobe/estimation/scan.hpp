#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "qgprobe/estimation/ringdown.hpp"

namespace qgprobe::estimation {

/// One ring-down result labelled with the series it came from.
struct ScanEntry {
  std::int64_t series = 0;
  double detuning = 0.0;  // rad/s, probe detuning label of the series
  double f_m_hz = 0.0;
  double gamma_eff_hz = 0.0;  // Gamma_eff / 2 pi
  double f_m_err_hz = 0.0;    // fit uncertainties, used as the sem of single-entry series
  double gamma_eff_err_hz = 0.0;

  static ScanEntry from_fit(const RingdownFit& fit, std::int64_t series, double detuning);
};

/// Per-series mean of the entries; the sem is the scatter for several entries and the
/// fit uncertainty for one.
struct ScanPoint {
  std::int64_t series = 0;
  double detuning = 0.0;
  std::int64_t n = 0;
  double f_m_hz = 0.0;
  double f_m_sem = 0.0;
  double gamma_eff_hz = 0.0;
  double gamma_eff_sem = 0.0;
  bool null_width = false;  // passes the selection rule below
};

struct ScanOptions {
  double null_sigma = 2.0;      // |Gamma| <= null_sigma * sem
  double max_width_sem_hz = 1.0;  // and sem below this
};

struct ScanResult {
  double slope = 0.0;  // d(Gamma_eff / 2 pi) / d f_m
  double slope_err = 0.0;
  double offset = 0.0;  // Hz
  double offset_err = 0.0;
  std::vector<ScanPoint> points;

  std::vector<std::int64_t> selected_series() const;
};

/// Ordinary least squares of Gamma_eff / 2 pi against f_m over the per-series means.
/// Throws DegenerateSpan when fewer than two distinct detunings (or f_m values) are present.
ScanResult width_vs_shift_scan(const std::vector<ScanEntry>& entries, const ScanOptions& opt = {});

nlohmann::json to_json(const ScanResult& r);

}  // namespace qgprobe::estimation
