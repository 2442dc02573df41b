#include "qgprobe/estimation/scan.hpp"

#include <cmath>
#include <map>

#include "qgprobe/error.hpp"

namespace qgprobe::estimation {

ScanEntry ScanEntry::from_fit(const RingdownFit& fit, std::int64_t series, double detuning) {
  return {series, detuning, fit.params.f_m, fit.gamma_eff_hz(), fit.err(2), fit.gamma_eff_hz_err()};
}

std::vector<std::int64_t> ScanResult::selected_series() const {
  std::vector<std::int64_t> out;
  for (const auto& p : points)
    if (p.null_width) out.push_back(p.series);
  return out;
}

ScanResult width_vs_shift_scan(const std::vector<ScanEntry>& entries, const ScanOptions& opt) {
  std::map<std::int64_t, std::vector<const ScanEntry*>> by_series;
  for (const auto& e : entries) by_series[e.series].push_back(&e);

  ScanResult r;
  for (const auto& [series, list] : by_series) {
    ScanPoint p;
    p.series = series;
    p.detuning = list.front()->detuning;
    p.n = static_cast<std::int64_t>(list.size());
    for (const auto* e : list) {
      p.f_m_hz += e->f_m_hz;
      p.gamma_eff_hz += e->gamma_eff_hz;
    }
    p.f_m_hz /= static_cast<double>(p.n);
    p.gamma_eff_hz /= static_cast<double>(p.n);
    if (p.n > 1) {
      double sf = 0.0, sg = 0.0;
      for (const auto* e : list) {
        sf += (e->f_m_hz - p.f_m_hz) * (e->f_m_hz - p.f_m_hz);
        sg += (e->gamma_eff_hz - p.gamma_eff_hz) * (e->gamma_eff_hz - p.gamma_eff_hz);
      }
      const double nn = static_cast<double>(p.n);
      p.f_m_sem = std::sqrt(sf / (nn - 1.0) / nn);
      p.gamma_eff_sem = std::sqrt(sg / (nn - 1.0) / nn);
    } else {
      p.f_m_sem = list.front()->f_m_err_hz;
      p.gamma_eff_sem = list.front()->gamma_eff_err_hz;
    }
    p.null_width = p.gamma_eff_sem > 0.0 && std::abs(p.gamma_eff_hz) <= opt.null_sigma * p.gamma_eff_sem &&
                   p.gamma_eff_sem < opt.max_width_sem_hz;
    r.points.push_back(p);
  }

  std::map<double, int> detunings;
  for (const auto& p : r.points) ++detunings[p.detuning];
  if (r.points.size() < 2 || detunings.size() < 2)
    throw Error(ErrorCode::DegenerateSpan, "width-vs-shift regression needs at least two distinct detunings");

  const double n = static_cast<double>(r.points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : r.points) {
    mx += p.f_m_hz;
    my += p.gamma_eff_hz;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : r.points) {
    sxx += (p.f_m_hz - mx) * (p.f_m_hz - mx);
    sxy += (p.f_m_hz - mx) * (p.gamma_eff_hz - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::DegenerateSpan, "all series share the same f_m");
  r.slope = sxy / sxx;
  r.offset = my - r.slope * mx;
  if (r.points.size() > 2) {
    double ss = 0.0;
    for (const auto& p : r.points) {
      const double e = p.gamma_eff_hz - (r.offset + r.slope * p.f_m_hz);
      ss += e * e;
    }
    const double s2 = ss / (n - 2.0);
    r.slope_err = std::sqrt(s2 / sxx);
    r.offset_err = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return r;
}

nlohmann::json to_json(const ScanResult& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points)
    pts.push_back({{"series", p.series},
                   {"detuning_rad_per_s", p.detuning},
                   {"n", p.n},
                   {"f_m_Hz", p.f_m_hz},
                   {"f_m_sem_Hz", p.f_m_sem},
                   {"gamma_eff_over_2pi_Hz", p.gamma_eff_hz},
                   {"gamma_eff_over_2pi_sem_Hz", p.gamma_eff_sem},
                   {"null_width", p.null_width}});
  return {{"slope", r.slope},   {"slope_err", r.slope_err},         {"offset_Hz", r.offset},
          {"offset_err_Hz", r.offset_err}, {"points", pts}, {"selected_series", r.selected_series()}};
}

}  // namespace qgprobe::estimation
