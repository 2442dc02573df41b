#include "qgprobe/protocol/analysis.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <set>

#include "qgprobe/error.hpp"
#include "qgprobe/protocol/storage.hpp"

namespace qgprobe::protocol {

namespace fs = std::filesystem;
using estimation::Quadrature;

namespace {

constexpr double kTwoPi = 2.0 * 3.14159265358979323846;

std::optional<estimation::ShiftStatistics> stats_or_none(const std::vector<double>& v, int bins) {
  if (v.size() < 2) return std::nullopt;
  estimation::HistogramOptions h;
  h.n_bins = bins;
  return estimation::aggregate_values(v, h);
}

nlohmann::json stats_json(const std::optional<estimation::ShiftStatistics>& s) {
  return s ? estimation::to_json(*s) : nlohmann::json(nullptr);
}

estimation::RingdownOptions ringdown_options(const CampaignConfig& cfg) {
  auto o = cfg.analysis.ringdown();
  o.lines = {cfg.detection.antistokes_line_hz(), cfg.detection.stokes_line_hz()};
  return o;
}

estimation::ShiftOptions shift_options(const CampaignConfig& cfg) {
  auto o = cfg.analysis.shift();
  o.lines = {cfg.detection.antistokes_line_hz(), cfg.detection.stokes_line_hz()};
  return o;
}

}  // namespace

std::vector<double> SeriesAnalysis::shift_values(Quadrature q) const {
  std::vector<double> v;
  for (const auto& s : shifts)
    if (s) v.push_back(s->get(q).delta_fm0);
  return v;
}

std::vector<estimation::ScanEntry> SeriesAnalysis::scan_entries() const {
  std::vector<estimation::ScanEntry> e;
  if (series_fit.ok) e.push_back(estimation::ScanEntry::from_fit(series_fit.fit, series, probe_detuning));
  return e;
}

std::int64_t SeriesAnalysis::n_failed() const {
  std::int64_t n = 0;
  for (const auto& s : shifts) n += s ? 0 : 1;
  return n;
}

SeriesAnalysis analyze_series(const Dataset& ds, const CampaignConfig& cfg, Execution exec) {
  SeriesAnalysis a;
  a.series = ds.series();
  a.probe_detuning = ds.plan.probe_detuning;
  a.alpha2 = ds.alpha2();
  a.n_bar = ds.plan.pump_state.n_bar;
  for (const auto& r : ds.records) a.cycle_index.push_back(r.cycle_index);

  a.ringdowns = estimation::fit_ringdowns(ds.records, ringdown_options(cfg), exec);
  if (!ds.records.empty()) {
    try {
      a.series_fit.fit = estimation::fit_ringdown(detection::average_records(ds.records), ringdown_options(cfg));
      a.series_fit.ok = true;
    } catch (const Error& e) {
      a.series_fit.code = e.code();
      a.series_fit.message = e.what();
    }
  }
  const auto sopt = shift_options(cfg);
  a.shifts.resize(ds.records.size());
  a.shift_errors.resize(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    if (!a.ringdowns[i].ok) {
      a.shift_errors[i] = std::string(to_string(a.ringdowns[i].code)) + ": " + a.ringdowns[i].message;
      continue;
    }
    try {
      a.shifts[i] = estimation::fit_transient_shift(ds.records[i], a.ringdowns[i].fit, sopt);
    } catch (const Error& e) {
      a.shift_errors[i] = std::string(to_string(e.code())) + ": " + e.what();
    }
  }
  a.x = stats_or_none(a.shift_values(Quadrature::X), cfg.analysis.histogram_bins);
  a.y = stats_or_none(a.shift_values(Quadrature::Y), cfg.analysis.histogram_bins);
  return a;
}

CampaignSummary summarize(std::vector<SeriesAnalysis> series, const CampaignConfig& cfg) {
  if (series.empty()) throw Error(ErrorCode::InsufficientData, "no series to summarize");
  CampaignSummary s;
  s.config = cfg;
  s.series = std::move(series);

  std::vector<double> x, y;
  std::vector<estimation::ScanEntry> entries;
  std::set<double> detunings;
  s.alpha2 = s.series.front().alpha2;
  for (const auto& a : s.series) {
    for (double v : a.shift_values(Quadrature::X)) x.push_back(v);
    for (double v : a.shift_values(Quadrature::Y)) y.push_back(v);
    for (const auto& e : a.scan_entries()) entries.push_back(e);
    detunings.insert(a.probe_detuning);
    s.alpha2 = std::min(s.alpha2, a.alpha2);
  }
  const int bins = cfg.analysis.histogram_bins;
  s.x = stats_or_none(x, bins);
  s.y = stats_or_none(y, bins);

  if (detunings.size() >= 2) {
    try {
      s.scan = estimation::width_vs_shift_scan(entries);
    } catch (const Error&) {
      s.scan.reset();
    }
  }
  if (s.scan) {
    const auto sel = s.scan->selected_series();
    std::vector<double> sx, sy;
    for (const auto& a : s.series) {
      if (std::find(sel.begin(), sel.end(), a.series) == sel.end()) continue;
      for (double v : a.shift_values(Quadrature::X)) sx.push_back(v);
      for (double v : a.shift_values(Quadrature::Y)) sy.push_back(v);
    }
    s.selected_x = stats_or_none(sx, bins);
    s.selected_y = stats_or_none(sy, bins);
  }

  s.operating = plan_series(cfg, s.series.front().series).pump_state;
  s.calibrated = s.alpha2 > 0.0;
  return s;
}

CampaignSummary analyze_campaign(const std::vector<Dataset>& data, const CampaignConfig& cfg, Execution exec) {
  std::vector<SeriesAnalysis> out;
  for (const auto& ds : data) out.push_back(analyze_series(ds, cfg, exec));
  return summarize(std::move(out), cfg);
}

nlohmann::json summary_json(const CampaignSummary& s) {
  nlohmann::json series = nlohmann::json::array();
  for (const auto& a : s.series) {
    series.push_back({{"series", a.series},
                      {"probe_detuning_Hz", a.probe_detuning / kTwoPi},
                      {"alpha2", a.alpha2},
                      {"n_bar", a.n_bar},
                      {"n_records", a.shifts.size()},
                      {"n_failed", a.n_failed()},
                      {"series_mean_ringdown", a.series_fit.ok ? nlohmann::json{{"f_m_Hz", a.series_fit.fit.params.f_m},
                                                                                {"f_m_err_Hz", a.series_fit.fit.err(2)},
                                                                                {"gamma_eff_over_2pi_Hz", a.series_fit.fit.gamma_eff_hz()},
                                                                                {"gamma_eff_over_2pi_err_Hz", a.series_fit.fit.gamma_eff_hz_err()}}
                                                              : nlohmann::json(nullptr)},
                      {"shift_X", stats_json(a.x)},
                      {"shift_Y", stats_json(a.y)}});
  }
  const auto& m = s.config.mode;
  const auto& c = s.config.constants;
  nlohmann::json j = {
      {"tool_version", QGPROBE_VERSION},
      {"config_hash", s.config.hash()},
      {"scenario", to_string(s.config.scenario)},
      {"calibrated", s.calibrated},
      {"operating_point", optomech::operating_point_report(s.operating)},
      {"alpha2_min", s.alpha2},
      {"mode",
       {{"frequency_Hz", m.frequency_hz()},
        {"quality", m.quality()},
        {"mass_kg", m.mass},
        {"bath_temperature_K", m.T_bath}}},
      {"constants", {{"hbar_Js", c.hbar}, {"k_B_J_per_K", c.k_B}, {"planck_length_m", c.L_p}}},
      {"analysis",
       {{"base_window_s", {s.config.analysis.base_window.t_start, s.config.analysis.base_window.t_end}},
        {"early_window_s", {s.config.analysis.early_window.t_start, s.config.analysis.early_window.t_end}}}},
      {"shift_statistics", {{"X", stats_json(s.x)}, {"Y", stats_json(s.y)}}},
      {"series", series},
      {"scan", s.scan ? estimation::to_json(*s.scan) : nlohmann::json(nullptr)},
      {"selected_shift_statistics", {{"X", stats_json(s.selected_x)}, {"Y", stats_json(s.selected_y)}}},
  };
  return j;
}

nlohmann::json fits_report(const SeriesAnalysis& a) {
  nlohmann::json recs = nlohmann::json::array();
  for (std::size_t i = 0; i < a.ringdowns.size(); ++i) {
    nlohmann::json r = {{"record", i}, {"cycle_index", a.cycle_index[i]}};
    if (a.ringdowns[i].ok) r["ringdown"] = estimation::to_json(a.ringdowns[i].fit);
    if (a.shifts[i]) {
      r["shift_X"] = estimation::to_json(a.shifts[i]->x);
      r["shift_Y"] = estimation::to_json(a.shifts[i]->y);
    }
    if (!a.shift_errors[i].empty()) r["error"] = a.shift_errors[i];
    recs.push_back(std::move(r));
  }
  nlohmann::json mean_fit = a.series_fit.ok ? estimation::to_json(a.series_fit.fit) : nlohmann::json(nullptr);
  return {{"series", a.series}, {"series_mean_ringdown", mean_fit}, {"records", recs}};
}

void write_analysis(const fs::path& dir, const CampaignSummary& s) {
  fs::create_directories(dir);
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
    out << text;
  };
  write(dir / "summary.report", summary_json(s).dump(2) + "\n");
  for (const auto& a : s.series) {
    fs::create_directories(dir / series_dir_name(a.series));
    write(dir / series_dir_name(a.series) / "fits.report", fits_report(a).dump(2) + "\n");
  }
  for (auto [q, name] : {std::pair{&s.x, "X"}, std::pair{&s.y, "Y"}}) {
    if (!*q) continue;
    std::ofstream out(dir / (std::string("histogram_") + name + ".txt"));
    if (!out) throw Error(ErrorCode::Io, "cannot write histogram");
    estimation::write_histogram(out, (*q)->histogram, std::string("delta_fm0 ") + name + " quadrature");
  }
}

estimation::BoundInputs bound_inputs_from_summary(const nlohmann::json& j, estimation::AmplitudeConvention conv) {
  estimation::BoundInputs in;
  try {
    const auto& m = j.at("mode");
    in.mode = dynamics::MechanicalMode::from_frequency(m.at("frequency_Hz"), m.at("quality"), m.at("mass_kg"),
                                                       m.at("bath_temperature_K"));
    const auto& c = j.at("constants");
    in.constants.hbar = c.at("hbar_Js");
    in.constants.k_B = c.at("k_B_J_per_K");
    in.constants.L_p = c.at("planck_length_m");
    const auto& op = j.at("operating_point");
    in.operating.n_bar = op.at("n_bar");
    in.operating.gamma_eff = op.at("gamma_eff_rad_per_s");
    in.operating.omega_eff = op.at("omega_eff_rad_per_s");
    in.alpha2 = j.at("alpha2_min");
    in.operating.alpha = std::sqrt(in.alpha2);
    in.calibrated = j.at("calibrated");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("summary report: ") + e.what());
  }
  in.convention = conv;
  return in;
}

nlohmann::json bound_report(const nlohmann::json& summary, estimation::AmplitudeConvention conv) {
  const auto in = bound_inputs_from_summary(summary, conv);
  nlohmann::json out = {{"convention", estimation::to_string(conv)}};
  double combined = 0.0;
  for (const char* q : {"X", "Y"}) {
    const auto& sj = summary.at("shift_statistics").at(q);
    if (sj.is_null()) throw Error(ErrorCode::TooFewSamples, std::string("no shift statistics for quadrature ") + q);
    const auto b = estimation::beta_bound(estimation::statistics_from_json(sj), in);
    out[q] = estimation::to_json(b);
    combined = std::max(combined, b.beta0_max);
  }
  out["beta0_max"] = combined;
  return out;
}

ThermometryReport thermometry(const detection::SpectrumEstimate& spec, const detection::DetectionConfig& det,
                              const detection::LorentzianFitOptions& opt) {
  ThermometryReport r;
  r.fit = detection::fit_lorentzian_pair(spec, det, opt);
  if (!r.fit.ratio_defined) throw Error(ErrorCode::RatioUndefined, "corrected sideband ratio is not above 1");
  r.purity = dynamics::purity(r.fit.n_bar);
  try {
    r.peak = detection::coherent_peak_analysis(spec, r.fit, det);
  } catch (const Error& e) {
    r.peak_error = std::string(to_string(e.code())) + ": " + e.what();
  }
  return r;
}

nlohmann::json to_json(const ThermometryReport& r) {
  nlohmann::json j = {{"lorentzian_fit", detection::to_json(r.fit)},
                      {"n_bar", r.fit.n_bar},
                      {"n_bar_err", r.fit.n_bar_err},
                      {"ratio", r.fit.ratio},
                      {"ratio_err", r.fit.ratio_err},
                      {"purity", r.purity}};
  j["coherent_peak"] = r.peak ? detection::to_json(*r.peak) : nlohmann::json(nullptr);
  if (!r.peak_error.empty()) j["coherent_peak_error"] = r.peak_error;
  return j;
}

}  // namespace qgprobe::protocol
