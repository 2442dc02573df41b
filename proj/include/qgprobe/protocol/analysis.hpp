#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qgprobe/detection/lorentzian.hpp"
#include "qgprobe/estimation/bound.hpp"
#include "qgprobe/estimation/ringdown.hpp"
#include "qgprobe/estimation/scan.hpp"
#include "qgprobe/estimation/shift.hpp"
#include "qgprobe/estimation/statistics.hpp"
#include "qgprobe/protocol/campaign.hpp"

namespace qgprobe::protocol {

struct SeriesAnalysis {
  std::int64_t series = 0;
  double probe_detuning = 0.0;  // rad/s
  double alpha2 = 0.0;
  double n_bar = 0.0;           // pump-on occupancy of the plan
  std::vector<std::int64_t> cycle_index;
  std::vector<estimation::RingdownOutcome> ringdowns;
  estimation::RingdownOutcome series_fit;  // ring-down of the mean over all records of the series
  std::vector<std::optional<estimation::ShiftPair>> shifts;  // empty where the base fit failed
  std::vector<std::string> shift_errors;
  std::optional<estimation::ShiftStatistics> x;
  std::optional<estimation::ShiftStatistics> y;

  std::vector<double> shift_values(estimation::Quadrature q) const;
  /// The series-mean fit, when it converged: one width-vs-shift point per series.
  std::vector<estimation::ScanEntry> scan_entries() const;
  std::int64_t n_failed() const;
};

/// Ring-down fit, then transient-shift fit, of every record of the series.
SeriesAnalysis analyze_series(const Dataset& ds, const CampaignConfig& cfg, Execution exec = Execution::Parallel);

struct CampaignSummary {
  std::vector<SeriesAnalysis> series;
  std::optional<estimation::ShiftStatistics> x;  // pooled over all series
  std::optional<estimation::ShiftStatistics> y;
  std::optional<estimation::ScanResult> scan;   // present with two or more probe detunings
  std::optional<estimation::ShiftStatistics> selected_x;  // series passing the null-width rule
  std::optional<estimation::ShiftStatistics> selected_y;
  optomech::CooledState operating;
  double alpha2 = 0.0;  // smallest |alpha|^2 over the series
  bool calibrated = true;
  CampaignConfig config;
};

CampaignSummary summarize(std::vector<SeriesAnalysis> series, const CampaignConfig& cfg);
CampaignSummary analyze_campaign(const std::vector<Dataset>& data, const CampaignConfig& cfg,
                                 Execution exec = Execution::Parallel);

nlohmann::json summary_json(const CampaignSummary& s);
nlohmann::json fits_report(const SeriesAnalysis& a);

/// summary.report, per-series fits.report and the two histogram text files.
void write_analysis(const std::filesystem::path& campaign_dir, const CampaignSummary& s);

/// Bound inputs stored in a summary report; the convention is supplied by the caller.
estimation::BoundInputs bound_inputs_from_summary(const nlohmann::json& summary,
                                                  estimation::AmplitudeConvention convention);

/// Bound per quadrature; the combined limit is the larger of the two.
nlohmann::json bound_report(const nlohmann::json& summary, estimation::AmplitudeConvention convention);

struct ThermometryReport {
  detection::LorentzianPairFit fit;
  std::optional<detection::CoherentPeak> peak;
  std::string peak_error;
  double purity = 0.0;  // 1 / (2 n + 1)
};

ThermometryReport thermometry(const detection::SpectrumEstimate& spec, const detection::DetectionConfig& det,
                              const detection::LorentzianFitOptions& opt = {});
nlohmann::json to_json(const ThermometryReport& r);

}  // namespace qgprobe::protocol
