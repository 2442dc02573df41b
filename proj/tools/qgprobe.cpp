// qgprobe: simulate, analyze and bound pulsed deformed-oscillator campaigns.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "qgprobe/detection/spectrum.hpp"
#include "qgprobe/dynamics.hpp"
#include "qgprobe/error.hpp"
#include "qgprobe/estimation/ringdown.hpp"
#include "qgprobe/protocol/analysis.hpp"
#include "qgprobe/protocol/campaign.hpp"
#include "qgprobe/protocol/storage.hpp"

namespace fs = std::filesystem;
using namespace qgprobe;
using nlohmann::json;

namespace {

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out.precision(10);
  return out;
}

Execution exec_for(bool serial) { return serial ? Execution::Serial : Execution::Parallel; }

int cmd_simulate(const std::string& config, std::optional<std::uint64_t> seed, std::optional<std::int64_t> series,
                 const fs::path& out, bool serial) {
  auto cfg = protocol::load_config(config);
  if (seed) cfg.seed = *seed;
  if (series) cfg.n_series = *series;
  cfg.validate();
  for (const auto& w : cfg.warnings()) std::cerr << "warning: " << w << "\n";
  const auto data = protocol::run_campaign(cfg, exec_for(serial));
  protocol::write_campaign(out, cfg, data);
  print_json({{"out", out.string()}, {"n_series", data.size()}, {"config_hash", cfg.hash()}, {"seed", cfg.seed}});
  return 0;
}

protocol::CampaignSummary analyze_dir(const fs::path& in, bool serial) {
  const auto cfg = protocol::read_snapshot(in);
  const auto data = protocol::read_campaign(in);
  return protocol::analyze_campaign(data, cfg, exec_for(serial));
}

int cmd_analyze(const fs::path& in, bool serial) {
  const auto s = analyze_dir(in, serial);
  protocol::write_analysis(in, s);
  const auto j = protocol::summary_json(s);
  print_json({{"summary", (in / "summary.report").string()},
              {"shift_statistics", j.at("shift_statistics")},
              {"scan", j.at("scan")}});
  return 0;
}

detection::DetectionConfig detection_for(const fs::path& in, const std::string& config) {
  if (!config.empty()) {
    auto cfg = protocol::load_config(config);
    return cfg.detection;
  }
  if (fs::is_directory(in) && fs::exists(in / "config.snapshot")) return protocol::read_snapshot(in).detection;
  if (fs::exists(in.parent_path().parent_path() / "config.snapshot"))
    return protocol::read_snapshot(in.parent_path().parent_path()).detection;
  if (fs::exists(in.parent_path() / "config.snapshot")) return protocol::read_snapshot(in.parent_path()).detection;
  protocol::CampaignConfig cfg;
  cfg.sync_detection();
  return cfg.detection;
}

int cmd_thermometry(const fs::path& in, const std::string& config, double resolution, bool serial) {
  const auto det = detection_for(in, config);
  auto report_one = [&](const detection::SpectrumEstimate& spec, const std::string& label) {
    auto j = protocol::to_json(protocol::thermometry(spec, det));
    j["source"] = label;
    return j;
  };
  json out = json::array();
  if (fs::is_directory(in) && fs::exists(in / "stationary.psd")) {
    out.push_back(report_one(detection::read_spectrum_file(in / "stationary.psd"), (in / "stationary.psd").string()));
  } else if (fs::is_directory(in)) {
    for (const auto& dir : protocol::list_series(in)) {
      const auto p = dir / "stationary.psd";
      if (!fs::exists(p)) throw Error(ErrorCode::Io, "no stationary spectrum in " + dir.string());
      out.push_back(report_one(detection::read_spectrum_file(p), p.string()));
    }
  } else if (in.extension() == ".psd") {
    out.push_back(report_one(detection::read_spectrum_file(in), in.string()));
  } else {
    const auto ts = detection::read_timeseries_file(in);
    const auto opt = detection::WelchOptions::for_resolution(resolution, ts.sample_rate());
    out.push_back(report_one(detection::welch_psd(ts, opt, exec_for(serial)), in.string()));
  }
  print_json(out.size() == 1 ? out[0] : out);
  return 0;
}

int cmd_shift_scan(const fs::path& in, const fs::path& out, bool serial) {
  const auto s = analyze_dir(in, serial);
  if (!s.scan) throw Error(ErrorCode::DegenerateSpan, "campaign holds fewer than two probe detunings");
  if (!out.empty()) {
    auto f = open_out(out);
    f << "# per-series width vs shift\n# f_m_Hz f_m_sem_Hz gamma_eff_over_2pi_Hz gamma_eff_sem_Hz series null_width\n";
    for (const auto& p : s.scan->points)
      f << p.f_m_hz << " " << p.f_m_sem << " " << p.gamma_eff_hz << " " << p.gamma_eff_sem << " " << p.series << " "
        << (p.null_width ? 1 : 0) << "\n";
  }
  print_json(estimation::to_json(*s.scan));
  return 0;
}

int cmd_bound(const fs::path& summary, const std::string& convention) {
  std::ifstream in(summary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + summary.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Io, summary.string() + ": " + e.what());
  }
  print_json(protocol::bound_report(j, estimation::parse_convention(convention)));
  return 0;
}

void emit_spectra(const fs::path& in, const fs::path& out) {
  const auto cfg = protocol::read_snapshot(in);
  for (const auto& dir : protocol::list_series(in)) {
    const auto p = dir / "stationary.psd";
    if (!fs::exists(p)) continue;
    const auto spec = detection::read_spectrum_file(p);
    const auto fit = detection::fit_lorentzian_pair(spec, cfg.detection);
    const std::string stem = dir.filename().string();
    auto f = open_out(out / (stem + "_spectrum.txt"));
    f << "# heterodyne power spectral density\n# freq_Hz psd_per_Hz\n";
    for (std::size_t i = 0; i < spec.freqs.size(); ++i) f << spec.freqs[i] << " " << spec.psd[i] << "\n";
    auto g = open_out(out / (stem + "_spectrum_fit.txt"));
    g << "# Lorentzian pair model\n# freq_Hz psd_per_Hz\n";
    for (std::size_t i = 0; i < spec.freqs.size(); ++i) g << spec.freqs[i] << " " << fit.model(spec.freqs[i]) << "\n";
  }
}

void emit_histograms(const fs::path& in, const fs::path& out, bool serial) {
  const auto s = analyze_dir(in, serial);
  for (auto [q, name] : {std::pair{&s.x, "X"}, std::pair{&s.y, "Y"}}) {
    if (!*q) continue;
    auto f = open_out(out / (std::string("histogram_") + name + ".txt"));
    estimation::write_histogram(f, (*q)->histogram, std::string("delta_fm0 ") + name + " quadrature");
  }
}

void emit_quadratures(const fs::path& in, const fs::path& out) {
  const auto cfg = protocol::read_snapshot(in);
  auto opt = cfg.analysis.ringdown();
  opt.lines = {cfg.detection.antistokes_line_hz(), cfg.detection.stokes_line_hz()};
  for (const auto& dir : protocol::list_series(in)) {
    const auto ds = protocol::read_dataset(dir, cfg);
    if (ds.records.empty()) continue;
    const auto& rec = ds.records.front();
    const std::string stem = dir.filename().string();
    std::optional<estimation::RingdownFit> fit;
    try {
      fit = estimation::fit_ringdown(rec, opt);
    } catch (const Error&) {
    }
    for (int k = 0; k < 2; ++k) {
      const auto& ts = k == 0 ? rec.x : rec.y;
      auto f = open_out(out / (stem + (k == 0 ? "_X.txt" : "_Y.txt")));
      f << "# group-averaged quadrature, record 0\n# t_s value\n";
      for (std::size_t i = 0; i < ts.size(); ++i) f << ts.time(i) << " " << ts.samples[i] << "\n";
      if (!fit) continue;
      auto g = open_out(out / (stem + (k == 0 ? "_X_fit.txt" : "_Y_fit.txt")));
      g << "# ring-down model over the fit window\n# t_s value\n";
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const double t = ts.time(i);
        if (t < fit->window.t_start || t > fit->window.t_end) continue;
        double x = 0.0, y = 0.0;
        estimation::ringdown_model(fit->params, t, x, y, opt.lines);
        g << t << " " << (k == 0 ? x : y) << "\n";
      }
    }
  }
}

int cmd_emit(const std::string& what, const fs::path& in, const fs::path& out, bool serial) {
  fs::create_directories(out);
  if (what == "spectra") emit_spectra(in, out);
  else if (what == "histogram") emit_histograms(in, out, serial);
  else if (what == "quadratures") emit_quadratures(in, out);
  else throw Error(ErrorCode::InvalidArgument, "unknown plot data kind: " + what);
  print_json({{"out", out.string()}, {"what", what}});
  return 0;
}

int cmd_trajectory(double beta0, double amplitude, double periods, std::size_t every, const std::string& config,
                   const fs::path& out) {
  protocol::CampaignConfig cfg;
  if (!config.empty()) cfg = protocol::load_config(config);
  if (beta0 >= 0.0) cfg.beta0 = beta0;
  const auto d = cfg.deformation();
  dynamics::IntegrationOptions opt;
  opt.dt = dynamics::default_time_step(cfg.mode);
  opt.n_steps = static_cast<std::size_t>(std::ceil(periods * 200.0));
  opt.record_every = every;
  const dynamics::PhaseState s0{amplitude, 0.0, 0.0};
  const auto traj = dynamics::integrate_trajectory(s0, cfg.mode, d, opt);
  dynamics::TrajectoryMetadata meta{cfg.mode, cfg.beta0, opt.dt, cfg.seed, every};
  if (out.empty()) {
    dynamics::write_trajectory(std::cout, traj, meta);
  } else {
    auto f = open_out(out);
    dynamics::write_trajectory(f, traj, meta);
  }
  return 0;
}

int fail(ErrorCode code, const std::string& msg) {
  std::cerr << json{{"error", std::string(to_string(code))}, {"message", msg}}.dump() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulsed optomechanical probe of deformed commutators: simulation and analysis"};
  app.set_version_flag("--version", std::string(QGPROBE_VERSION));
  app.require_subcommand(1);
  bool serial = false;
  app.add_flag("--serial", serial, "run the serial reference kernels");

  std::string config, in, out, summary, convention = "mean-square-displacement", what;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> n_series;
  double resolution = 50.0;

  auto* sim = app.add_subcommand("simulate", "run a campaign and write its datasets");
  sim->add_option("--config", config, "campaign configuration (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--seed", seed, "override the configured seed");
  sim->add_option("--series", n_series, "override the number of series");
  sim->add_option("--out", out, "output directory")->required();

  auto* ana = app.add_subcommand("analyze", "ring-down and transient-shift fits of a campaign");
  ana->add_option("--in", in, "campaign directory")->required()->check(CLI::ExistingDirectory);

  auto* th = app.add_subcommand("thermometry", "sideband thermometry of a spectrum, raw record or campaign");
  th->add_option("--in", in, ".psd, .ts or campaign directory")->required()->check(CLI::ExistingPath);
  th->add_option("--config", config, "configuration supplying the detection chain");
  th->add_option("--resolution", resolution, "Welch resolution in Hz for raw records");

  auto* sc = app.add_subcommand("shift-scan", "Gamma_eff vs f_m regression across probe detunings");
  sc->add_option("--in", in, "campaign directory")->required()->check(CLI::ExistingDirectory);
  sc->add_option("--out", out, "optional table file");

  auto* bd = app.add_subcommand("bound", "upper limit on beta0 from a summary report");
  bd->add_option("--summary", summary, "summary.report")->required()->check(CLI::ExistingFile);
  bd->add_option("--convention", convention, "mean-square-displacement | coherent-only");

  auto* em = app.add_subcommand("emit-plot-data", "two-column text files for plotting");
  em->add_option("--what", what, "spectra | histogram | quadratures")
      ->required()
      ->check(CLI::IsMember({"spectra", "histogram", "quadratures"}));
  em->add_option("--in", in, "campaign directory")->required()->check(CLI::ExistingDirectory);
  em->add_option("--out", out, "output directory")->required();

  double beta0 = -1.0, amplitude = 1e-12, periods = 10.0;
  std::size_t every = 1;
  auto* tr = app.add_subcommand("trajectory", "phase-space trajectory of the deformed oscillator");
  tr->add_option("--config", config, "configuration supplying the mode");
  tr->add_option("--beta0", beta0, "deformation parameter (overrides the configuration)");
  tr->add_option("--amplitude", amplitude, "initial displacement in m");
  tr->add_option("--periods", periods, "mechanical periods to integrate");
  tr->add_option("--every", every, "record every n-th step");
  tr->add_option("--out", out, "output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(ErrorCode::InvalidArgument, e.what());
  }

  try {
    if (*sim) return cmd_simulate(config, seed, n_series, out, serial);
    if (*ana) return cmd_analyze(in, serial);
    if (*th) return cmd_thermometry(in, config, resolution, serial);
    if (*sc) return cmd_shift_scan(in, out, serial);
    if (*bd) return cmd_bound(summary, convention);
    if (*em) return cmd_emit(what, in, out, serial);
    if (*tr) return cmd_trajectory(beta0, amplitude, periods, every, config, out);
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(ErrorCode::Io, e.what());
  }
  return 1;
}
