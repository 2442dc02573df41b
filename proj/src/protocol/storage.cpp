#include "qgprobe/protocol/storage.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "qgprobe/error.hpp"

namespace qgprobe::protocol {

namespace fs = std::filesystem;

namespace {

std::string numbered(std::int64_t i, int width, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%0*lld%s", width, static_cast<long long>(i), ext);
  return buf;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << s;
  if (!out) throw Error(ErrorCode::Io, "write failed: " + p.string());
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, p.string() + ": " + e.what());
  }
}

std::vector<fs::path> sorted_files(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string series_dir_name(std::int64_t series) { return "series_" + numbered(series, 3, ""); }

void write_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir / "records");
  nlohmann::json meta = {
      {"series", ds.plan.series},
      {"probe_detuning_Hz", ds.plan.probe_detuning / (2.0 * 3.14159265358979323846)},
      {"alpha2", ds.alpha2()},
      {"excitation_phase_rad", ds.plan.excitation_phase},
      {"post_gamma_per_s", ds.plan.post_gamma},
      {"post_frequency_offset_Hz", ds.plan.post_frequency_offset},
      {"operating_point", optomech::operating_point_report(ds.plan.pump_state)},
      {"group_size", ds.group_size},
      {"n_records", ds.records.size()},
      {"n_raw", ds.raw.size()},
      {"has_stationary_spectrum", ds.stationary.has_value()},
      {"seed", ds.provenance.seed},
      {"config_hash", ds.provenance.config_hash},
      {"tool_version", ds.provenance.tool_version},
  };
  write_text(dir / "series.json", meta.dump(2) + "\n");
  for (std::size_t i = 0; i < ds.records.size(); ++i)
    detection::write_record_file(dir / "records" / numbered(static_cast<std::int64_t>(i), 4, ".qrec"), ds.records[i]);
  if (!ds.raw.empty()) {
    fs::create_directories(dir / "raw");
    for (std::size_t i = 0; i < ds.raw.size(); ++i)
      detection::write_timeseries_file(dir / "raw" / numbered(static_cast<std::int64_t>(i), 4, ".ts"), ds.raw[i]);
  }
  if (ds.stationary) detection::write_spectrum_file(dir / "stationary.psd", *ds.stationary);
}

Dataset read_dataset(const fs::path& dir, const CampaignConfig& cfg) {
  const auto meta = read_json(dir / "series.json");
  Dataset ds;
  try {
    ds.plan = plan_series(cfg, meta.at("series").get<std::int64_t>());
    ds.group_size = meta.at("group_size").get<std::int64_t>();
    ds.provenance = {meta.at("seed").get<std::uint64_t>(), meta.at("config_hash").get<std::string>(),
                     meta.at("tool_version").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, (dir / "series.json").string() + ": " + e.what());
  }
  if (ds.provenance.config_hash != ds.plan.config_hash)
    throw Error(ErrorCode::InvalidConfig, "series " + dir.string() + " was produced by a different configuration");
  ds.config_snapshot = cfg.to_json();
  for (const auto& p : sorted_files(dir / "records", ".qrec")) ds.records.push_back(detection::read_record_file(p));
  for (const auto& p : sorted_files(dir / "raw", ".ts")) ds.raw.push_back(detection::read_timeseries_file(p));
  if (fs::exists(dir / "stationary.psd")) ds.stationary = detection::read_spectrum_file(dir / "stationary.psd");
  if (ds.records.size() != meta.value("n_records", ds.records.size()))
    throw Error(ErrorCode::Io, "record files missing in " + dir.string());
  return ds;
}

void write_campaign(const fs::path& out, const CampaignConfig& cfg, const std::vector<Dataset>& data) {
  fs::create_directories(out);
  write_text(out / "config.snapshot", cfg.to_json().dump(2) + "\n");
  for (const auto& ds : data) write_dataset(out / series_dir_name(ds.series()), ds);
}

CampaignConfig read_snapshot(const fs::path& dir) {
  const auto j = read_json(dir / "config.snapshot");
  auto cfg = CampaignConfig::from_json(j);
  cfg.validate();
  return cfg;
}

std::vector<fs::path> list_series(const fs::path& dir) {
  std::vector<fs::path> out;
  if (fs::is_directory(dir))
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && e.path().filename().string().rfind("series_", 0) == 0) out.push_back(e.path());
  if (out.empty()) throw Error(ErrorCode::Io, "no series directories under " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Dataset> read_campaign(const fs::path& dir) {
  const auto cfg = read_snapshot(dir);
  std::vector<Dataset> out;
  for (const auto& p : list_series(dir)) out.push_back(read_dataset(p, cfg));
  return out;
}

}  // namespace qgprobe::protocol
