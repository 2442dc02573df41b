#include "qgprobe/protocol/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include "qgprobe/error.hpp"

namespace qgprobe::protocol {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using json = nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) throw Error(ErrorCode::InvalidConfig, "unknown key '" + k + "' in " + where);
}

const json& section(const json& j, const char* key) {
  static const json empty = json::object();
  return j.contains(key) ? j.at(key) : empty;
}

json window_json(const estimation::FitWindow& w) { return json::array({w.t_start, w.t_end}); }

estimation::FitWindow window_from(const json& j, const estimation::FitWindow& def) {
  if (j.is_null()) return def;
  if (!j.is_array() || j.size() != 2) throw Error(ErrorCode::InvalidConfig, "windows are [start, end] pairs in s");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string to_string(Scenario s) { return s == Scenario::Protocol1Decay ? "protocol_1_decay" : "protocol_2_pulsed"; }

Scenario parse_scenario(const std::string& name) {
  if (name == "protocol_1_decay") return Scenario::Protocol1Decay;
  if (name == "protocol_2_pulsed") return Scenario::Protocol2Pulsed;
  throw Error(ErrorCode::InvalidConfig, "unknown scenario '" + name + "'");
}

std::string to_string(ShiftModel m) {
  switch (m) {
    case ShiftModel::Amplitude: return "amplitude";
    case ShiftModel::PurityGated: return "purity_gated";
    default: return "scenario_default";
  }
}

ShiftModel parse_shift_model(const std::string& name) {
  if (name == "scenario_default") return ShiftModel::ScenarioDefault;
  if (name == "amplitude") return ShiftModel::Amplitude;
  if (name == "purity_gated") return ShiftModel::PurityGated;
  throw Error(ErrorCode::InvalidConfig, "unknown shift model '" + name + "'");
}

ShiftModel CampaignConfig::effective_shift_model() const {
  if (shift_model != ShiftModel::ScenarioDefault) return shift_model;
  return scenario == Scenario::Protocol1Decay ? ShiftModel::Amplitude : ShiftModel::PurityGated;
}

void ProtocolSchedule::validate() const {
  if (!(pump_on > 0.0) || !(measure > 0.0)) throw Error(ErrorCode::InvalidConfig, "schedule durations must be > 0");
  if (std::abs(cycle - (pump_on + measure)) > 1e-9 * cycle)
    throw Error(ErrorCode::InvalidConfig, "cycle must equal pump_on + measure");
  if (cycles_per_series < 1) throw Error(ErrorCode::InvalidConfig, "cycles_per_series must be >= 1");
  if (std::llround(series_duration / cycle) != cycles_per_series)
    throw Error(ErrorCode::InvalidConfig, "cycles_per_series must equal series_duration / cycle");
  if (group_size < 1 || cycles_per_series % group_size != 0)
    throw Error(ErrorCode::InvalidConfig, "group_size must divide cycles_per_series");
  if (!(preroll > 0.0) || preroll > pump_on) throw Error(ErrorCode::InvalidConfig, "preroll must lie in (0, pump_on]");
}

std::vector<std::string> ProtocolSchedule::warnings(double gamma_eff, double gamma_m) const {
  std::vector<std::string> w;
  if (pump_on * gamma_eff < 100.0) w.push_back("pump_on is not much longer than 1/Gamma_eff");
  if (measure * gamma_m > 0.01) w.push_back("measure is not much shorter than 1/Gamma_m");
  return w;
}

estimation::RingdownOptions AnalysisOptions::ringdown() const {
  estimation::RingdownOptions o;
  o.window = base_window;
  o.fix_b_zero = fix_b_zero;
  o.f_search_hz = f_search_hz;
  return o;
}

estimation::ShiftOptions AnalysisOptions::shift() const {
  estimation::ShiftOptions o;
  o.early = early_window;
  return o;
}

void CampaignConfig::sync_detection() {
  detection.omega_exc = mode.omega_m + kTwoPi * excitation_offset;
  detection.lockin_ref = detection.omega_exc + kTwoPi * lockin_offset;
}

void CampaignConfig::validate() const {
  try {
    constants.validate();
    mode.validate();
    cavity.validate();
    if (!(beta0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "beta0 must be >= 0");
    detection.validate(mode.omega_m);
    schedule.validate();
    if (!(targets.n_bar >= 0.0)) throw Error(ErrorCode::NegativeOccupancy, "target n_bar must be >= 0");
    if (!(targets.gamma_eff >= mode.gamma_m)) throw Error(ErrorCode::InvalidDamping, "target Gamma_eff < Gamma_m");
    if (!(targets.alpha2 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "target |alpha|^2 must be >= 0");
    if (n_series < 1) throw Error(ErrorCode::InvalidArgument, "n_series must be >= 1");
    for (double d : detuning_sweep) optomech::optical_damping_and_spring(cavity, mode, kTwoPi * d);
    optomech::optical_damping_and_spring(cavity, mode, cavity.probe_detuning);
    for (double db : excitation_sweep) optomech::coherent_amplitude(db);
    if (scenario == Scenario::Protocol1Decay && !excitation_sweep.empty())
      throw Error(ErrorCode::InvalidArgument, "protocol_1_decay varies the amplitude only through the decay");
    const auto& a = analysis;
    if (!(a.early_window.t_end > a.early_window.t_start) || !(a.base_window.t_end > a.base_window.t_start))
      throw Error(ErrorCode::InvalidArgument, "analysis windows must be non-empty");
    if (a.early_window.t_start < 0.0 || a.early_window.t_end > a.base_window.t_start)
      throw Error(ErrorCode::WindowOverlap, "early window must precede the base window");
    if (a.base_window.t_end > schedule.measure)
      throw Error(ErrorCode::WindowOutOfRange, "base window exceeds the measurement segment");
    if (storage.raw_cycles < 0) throw Error(ErrorCode::InvalidArgument, "raw_cycles must be >= 0");
    if (storage.stationary_spectrum > 0.0 && storage.stationary_spectrum * targets.gamma_eff < 10.0)
      throw Error(ErrorCode::DurationTooShort, "stationary spectrum too short for Gamma_eff");
    if (!(switch_off.amplitude >= 0.0) || !(switch_off.decay > 0.0))
      throw Error(ErrorCode::InvalidArgument, "switch-off tones need amplitude >= 0 and decay > 0");
    for (double f : switch_off.frequencies)
      if (!(f > 0.0) || !(f < 0.5 * detection.sample_rate))
        throw Error(ErrorCode::NyquistViolation, "switch-off tone outside (0, Nyquist)");
    const double ref_hz = detection.lockin_ref / kTwoPi;
    if (std::abs(detection.omega_exc - (mode.omega_m + kTwoPi * excitation_offset)) > 1e-6 * mode.omega_m ||
        std::abs(ref_hz - (detection.omega_exc / kTwoPi + lockin_offset)) > 1e-3)
      throw Error(ErrorCode::InvalidArgument, "detection frequencies out of sync with the offsets");
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    throw Error(ErrorCode::InvalidConfig, std::string(to_string(e.code())) + ": " + e.what());
  }
}

std::vector<std::string> CampaignConfig::warnings() const {
  return schedule.warnings(targets.gamma_eff, mode.gamma_m);
}

json CampaignConfig::to_json() const {
  json j;
  j["mode"] = {{"frequency_Hz", mode.frequency_hz()},
               {"quality", mode.quality()},
               {"mass_kg", mode.mass},
               {"bath_temperature_K", mode.T_bath}};
  j["cavity"] = {{"linewidth_Hz", cavity.kappa / kTwoPi},
                 {"probe_detuning_Hz", cavity.probe_detuning / kTwoPi},
                 {"cool_detuning_Hz", cavity.cool_detuning / kTwoPi},
                 {"coupling_rate_Hz", cavity.coupling_rate / kTwoPi}};
  j["constants"] = {{"hbar_Js", constants.hbar}, {"k_B_J_per_K", constants.k_B}, {"planck_length_m", constants.L_p}};
  j["deformation"] = {{"beta0", beta0}, {"shift_model", to_string(shift_model)}};
  j["detection"] = {{"delta_lo_Hz", detection.delta_lo / kTwoPi},
                    {"excitation_offset_Hz", excitation_offset},
                    {"lockin_offset_Hz", lockin_offset},
                    {"lockin_bandwidth_Hz", detection.lockin_bandwidth},
                    {"lockin_filter_order", detection.lockin_filter_order},
                    {"decimation", detection.decimation},
                    {"sample_rate_Hz", detection.sample_rate},
                    {"background_psd_per_Hz", detection.background_psd},
                    {"phonon_gain", detection.phonon_gain},
                    {"c_stokes", detection.c_stokes},
                    {"c_antistokes", detection.c_antistokes}};
  j["schedule"] = {{"pump_on_s", schedule.pump_on},
                   {"measure_s", schedule.measure},
                   {"cycle_s", schedule.cycle},
                   {"cycles_per_series", schedule.cycles_per_series},
                   {"series_duration_s", schedule.series_duration},
                   {"group_size", schedule.group_size},
                   {"preroll_s", schedule.preroll}};
  j["targets"] = {{"n_bar", targets.n_bar},
                  {"gamma_eff_Hz", targets.gamma_eff / kTwoPi},
                  {"alpha2", targets.alpha2},
                  {"pump_frequency_offset_Hz", targets.pump_frequency_offset}};
  j["scenario"] = to_string(scenario);
  j["seed"] = seed;
  j["n_series"] = n_series;
  j["sweeps"] = {{"probe_detuning_Hz", detuning_sweep}, {"excitation_db", excitation_sweep}};
  j["switch_off_tones"] = {
      {"frequencies_Hz", switch_off.frequencies}, {"amplitude", switch_off.amplitude}, {"decay_s", switch_off.decay}};
  j["storage"] = {{"raw_cycles", storage.raw_cycles},
                  {"stationary_spectrum_s", storage.stationary_spectrum},
                  {"spectrum_resolution_Hz", storage.spectrum_resolution}};
  j["analysis"] = {{"base_window_s", window_json(analysis.base_window)},
                   {"early_window_s", window_json(analysis.early_window)},
                   {"f_search_Hz", analysis.f_search_hz},
                   {"fix_b_zero", analysis.fix_b_zero},
                   {"histogram_bins", analysis.histogram_bins},
                   {"bound_convention", estimation::to_string(analysis.convention)}};
  return j;
}

CampaignConfig CampaignConfig::from_json(const json& j) {
  try {
    check_keys(j, {"mode", "cavity", "constants", "deformation", "detection", "schedule", "targets", "scenario",
                   "seed", "n_series", "sweeps", "switch_off_tones", "storage", "analysis", "description"},
               "config");
    CampaignConfig c;

    const json& m = section(j, "mode");
    check_keys(m, {"frequency_Hz", "quality", "mass_kg", "bath_temperature_K"}, "mode");
    c.mode = dynamics::MechanicalMode::from_frequency(m.value("frequency_Hz", c.mode.frequency_hz()),
                                                      m.value("quality", c.mode.quality()),
                                                      m.value("mass_kg", c.mode.mass),
                                                      m.value("bath_temperature_K", c.mode.T_bath));

    const json& cv = section(j, "cavity");
    check_keys(cv, {"linewidth_Hz", "probe_detuning_Hz", "cool_detuning_Hz", "coupling_rate_Hz"}, "cavity");
    c.cavity.kappa = kTwoPi * cv.value("linewidth_Hz", c.cavity.kappa / kTwoPi);
    c.cavity.probe_detuning = kTwoPi * cv.value("probe_detuning_Hz", c.cavity.probe_detuning / kTwoPi);
    c.cavity.cool_detuning = kTwoPi * cv.value("cool_detuning_Hz", c.cavity.cool_detuning / kTwoPi);
    c.cavity.coupling_rate = kTwoPi * cv.value("coupling_rate_Hz", c.cavity.coupling_rate / kTwoPi);

    const json& k = section(j, "constants");
    check_keys(k, {"hbar_Js", "k_B_J_per_K", "planck_length_m"}, "constants");
    c.constants.hbar = k.value("hbar_Js", c.constants.hbar);
    c.constants.k_B = k.value("k_B_J_per_K", c.constants.k_B);
    c.constants.L_p = k.value("planck_length_m", c.constants.L_p);

    const json& d = section(j, "deformation");
    check_keys(d, {"beta0", "shift_model"}, "deformation");
    c.beta0 = d.value("beta0", 0.0);
    c.shift_model = parse_shift_model(d.value("shift_model", std::string("scenario_default")));

    const json& dt = section(j, "detection");
    check_keys(dt, {"delta_lo_Hz", "excitation_offset_Hz", "lockin_offset_Hz", "lockin_bandwidth_Hz",
                    "lockin_filter_order", "decimation", "sample_rate_Hz", "background_psd_per_Hz", "phonon_gain",
                    "c_stokes", "c_antistokes"},
               "detection");
    auto& det = c.detection;
    det.delta_lo = kTwoPi * dt.value("delta_lo_Hz", det.delta_lo / kTwoPi);
    c.excitation_offset = dt.value("excitation_offset_Hz", c.excitation_offset);
    c.lockin_offset = dt.value("lockin_offset_Hz", c.lockin_offset);
    det.lockin_bandwidth = dt.value("lockin_bandwidth_Hz", det.lockin_bandwidth);
    det.lockin_filter_order = dt.value("lockin_filter_order", det.lockin_filter_order);
    det.decimation = dt.value("decimation", det.decimation);
    det.sample_rate = dt.value("sample_rate_Hz", det.sample_rate);
    det.background_psd = dt.value("background_psd_per_Hz", det.background_psd);
    det.phonon_gain = dt.value("phonon_gain", det.phonon_gain);
    det.c_stokes = dt.value("c_stokes", det.c_stokes);
    det.c_antistokes = dt.value("c_antistokes", det.c_antistokes);
    c.sync_detection();

    const json& s = section(j, "schedule");
    check_keys(s, {"pump_on_s", "measure_s", "cycle_s", "cycles_per_series", "series_duration_s", "group_size",
                   "preroll_s"},
               "schedule");
    auto& sc = c.schedule;
    sc.pump_on = s.value("pump_on_s", sc.pump_on);
    sc.measure = s.value("measure_s", sc.measure);
    sc.cycle = s.value("cycle_s", sc.pump_on + sc.measure);
    sc.series_duration = s.value("series_duration_s", sc.series_duration);
    sc.cycles_per_series = s.value("cycles_per_series", std::llround(sc.series_duration / sc.cycle));
    sc.group_size = s.value("group_size", sc.group_size);
    sc.preroll = s.value("preroll_s", sc.preroll);

    const json& t = section(j, "targets");
    check_keys(t, {"n_bar", "gamma_eff_Hz", "alpha2", "pump_frequency_offset_Hz"}, "targets");
    c.targets.n_bar = t.value("n_bar", c.targets.n_bar);
    c.targets.gamma_eff = kTwoPi * t.value("gamma_eff_Hz", c.targets.gamma_eff / kTwoPi);
    c.targets.alpha2 = t.value("alpha2", c.targets.alpha2);
    c.targets.pump_frequency_offset = t.value("pump_frequency_offset_Hz", c.targets.pump_frequency_offset);

    c.scenario = parse_scenario(j.value("scenario", to_string(c.scenario)));
    c.seed = j.value("seed", c.seed);
    c.n_series = j.value("n_series", c.n_series);

    const json& sw = section(j, "sweeps");
    check_keys(sw, {"probe_detuning_Hz", "excitation_db"}, "sweeps");
    c.detuning_sweep = sw.value("probe_detuning_Hz", std::vector<double>{});
    c.excitation_sweep = sw.value("excitation_db", std::vector<double>{});

    const json& so = section(j, "switch_off_tones");
    check_keys(so, {"frequencies_Hz", "amplitude", "decay_s"}, "switch_off_tones");
    c.switch_off.frequencies = so.value("frequencies_Hz", c.switch_off.frequencies);
    c.switch_off.amplitude = so.value("amplitude", c.switch_off.amplitude);
    c.switch_off.decay = so.value("decay_s", c.switch_off.decay);

    const json& st = section(j, "storage");
    check_keys(st, {"raw_cycles", "stationary_spectrum_s", "spectrum_resolution_Hz"}, "storage");
    c.storage.raw_cycles = st.value("raw_cycles", c.storage.raw_cycles);
    c.storage.stationary_spectrum = st.value("stationary_spectrum_s", c.storage.stationary_spectrum);
    c.storage.spectrum_resolution = st.value("spectrum_resolution_Hz", c.storage.spectrum_resolution);

    const json& a = section(j, "analysis");
    check_keys(a, {"base_window_s", "early_window_s", "f_search_Hz", "fix_b_zero", "histogram_bins",
                   "bound_convention"},
               "analysis");
    c.analysis.base_window = window_from(a.value("base_window_s", json()), c.analysis.base_window);
    c.analysis.early_window = window_from(a.value("early_window_s", json()), c.analysis.early_window);
    c.analysis.f_search_hz = a.value("f_search_Hz", c.analysis.f_search_hz);
    c.analysis.fix_b_zero = a.value("fix_b_zero", c.analysis.fix_b_zero);
    c.analysis.histogram_bins = a.value("histogram_bins", c.analysis.histogram_bins);
    c.analysis.convention =
        estimation::parse_convention(a.value("bound_convention", estimation::to_string(c.analysis.convention)));
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidConfig) throw;
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string CampaignConfig::hash() const { return fnv1a_hex(to_json().dump()); }

CampaignConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  CampaignConfig c = CampaignConfig::from_json(j);
  c.validate();
  return c;
}

void save_config(const std::filesystem::path& path, const CampaignConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << cfg.to_json().dump(2) << '\n';
}

}  // namespace qgprobe::protocol
