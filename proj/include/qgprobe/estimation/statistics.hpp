#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "json.hpp"
#include "qgprobe/estimation/shift.hpp"

namespace qgprobe::estimation {

struct Histogram {
  std::vector<double> edges;  // size = counts.size() + 1
  std::vector<std::int64_t> counts;

  double center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
};

struct HistogramOptions {
  int n_bins = 0;            // 0 selects ceil(sqrt(n)), at least 5
  double bin_width = 0.0;    // overrides n_bins when > 0
};

struct ShiftStatistics {
  double mean = 0.0;  // Hz
  double std = 0.0;   // Hz, sample (n - 1) standard deviation
  std::int64_t n_samples = 0;
  Histogram histogram;

  double sem() const;
  /// mean / sem; 0 when both vanish.
  double z_score() const;
  /// Two-sided p-value of the z statistic under a zero-mean normal.
  double p_value() const;
  /// |mean| < n_sigma * sem.
  bool compatible_with_zero(double n_sigma = 2.0) const;
};

/// Throws TooFewSamples for fewer than two values.
ShiftStatistics aggregate_values(const std::vector<double>& values, const HistogramOptions& hist = {});
ShiftStatistics aggregate_shifts(const std::vector<ShiftFit>& fits, const HistogramOptions& hist = {});

Histogram make_histogram(const std::vector<double>& values, const HistogramOptions& opt = {});

/// Two-column text ("bin_center_Hz count") with a '#' header.
void write_histogram(std::ostream& out, const Histogram& h, const std::string& label);

nlohmann::json to_json(const ShiftStatistics& s);
ShiftStatistics statistics_from_json(const nlohmann::json& j);

}  // namespace qgprobe::estimation
