#include "qgprobe/estimation/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "qgprobe/error.hpp"

namespace qgprobe::estimation {

double ShiftStatistics::sem() const {
  return n_samples > 0 ? std / std::sqrt(static_cast<double>(n_samples)) : 0.0;
}

double ShiftStatistics::z_score() const {
  const double s = sem();
  if (s == 0.0) return mean == 0.0 ? 0.0 : std::copysign(INFINITY, mean);
  return mean / s;
}

double ShiftStatistics::p_value() const { return std::erfc(std::abs(z_score()) / std::sqrt(2.0)); }

bool ShiftStatistics::compatible_with_zero(double n_sigma) const { return std::abs(mean) <= n_sigma * sem(); }

Histogram make_histogram(const std::vector<double>& values, const HistogramOptions& opt) {
  Histogram h;
  if (values.empty()) return h;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  double lo = *lo_it, hi = *hi_it;
  int nb;
  if (opt.bin_width > 0.0) {
    lo = std::floor(lo / opt.bin_width) * opt.bin_width;
    nb = std::max(1, static_cast<int>(std::ceil((hi - lo) / opt.bin_width)));
    if (lo + nb * opt.bin_width <= hi) ++nb;
    hi = lo + nb * opt.bin_width;
  } else {
    nb = opt.n_bins > 0 ? opt.n_bins : std::max(5, static_cast<int>(std::ceil(std::sqrt(values.size()))));
    if (hi == lo) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
  h.edges.resize(static_cast<std::size_t>(nb) + 1);
  for (int i = 0; i <= nb; ++i) h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / nb;
  h.counts.assign(static_cast<std::size_t>(nb), 0);
  for (double v : values) {
    auto k = static_cast<int>(std::floor((v - lo) / (hi - lo) * nb));
    k = std::clamp(k, 0, nb - 1);
    ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

ShiftStatistics aggregate_values(const std::vector<double>& values, const HistogramOptions& hist) {
  if (values.size() < 2) throw Error(ErrorCode::TooFewSamples, "need at least two shift estimates");
  ShiftStatistics s;
  s.n_samples = static_cast<std::int64_t>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  s.histogram = make_histogram(values, hist);
  return s;
}

ShiftStatistics aggregate_shifts(const std::vector<ShiftFit>& fits, const HistogramOptions& hist) {
  std::vector<double> v;
  v.reserve(fits.size());
  for (const auto& f : fits) v.push_back(f.delta_fm0);
  return aggregate_values(v, hist);
}

void write_histogram(std::ostream& out, const Histogram& h, const std::string& label) {
  out << "# qgprobe-histogram 1\n# quantity: " << label << "\n# columns: bin_center_Hz count\n";
  out.precision(17);
  for (std::size_t i = 0; i < h.counts.size(); ++i) out << h.center(i) << ' ' << h.counts[i] << '\n';
}

nlohmann::json to_json(const ShiftStatistics& s) {
  return {{"mean_Hz", s.mean},
          {"std_Hz", s.std},
          {"n_samples", s.n_samples},
          {"sem_Hz", s.sem()},
          {"z_score", std::isfinite(s.z_score()) ? nlohmann::json(s.z_score()) : nlohmann::json(nullptr)},
          {"p_value", s.p_value()},
          {"compatible_with_zero_2sigma", s.compatible_with_zero(2.0)},
          {"histogram", {{"edges_Hz", s.histogram.edges}, {"counts", s.histogram.counts}}}};
}

ShiftStatistics statistics_from_json(const nlohmann::json& j) {
  ShiftStatistics s;
  s.mean = j.at("mean_Hz").get<double>();
  s.std = j.at("std_Hz").get<double>();
  s.n_samples = j.at("n_samples").get<std::int64_t>();
  if (j.contains("histogram")) {
    s.histogram.edges = j["histogram"].value("edges_Hz", std::vector<double>{});
    s.histogram.counts = j["histogram"].value("counts", std::vector<std::int64_t>{});
  }
  return s;
}

}  // namespace qgprobe::estimation
