#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qgprobe/protocol/campaign.hpp"

namespace qgprobe::protocol {

// Campaign directory layout:
//   config.snapshot               canonical configuration JSON
//   series_NNN/series.json        series metadata
//   series_NNN/records/NNNN.qrec  group-averaged quadrature records
//   series_NNN/stationary.psd     pump-on spectrum (optional)
//   series_NNN/raw/NNNN.ts        raw heterodyne cycles (optional)

std::string series_dir_name(std::int64_t series);

void write_dataset(const std::filesystem::path& series_dir, const Dataset& ds);
/// The plan is rebuilt from `cfg`, which must be the campaign's snapshot.
Dataset read_dataset(const std::filesystem::path& series_dir, const CampaignConfig& cfg);

void write_campaign(const std::filesystem::path& out, const CampaignConfig& cfg, const std::vector<Dataset>& data);
CampaignConfig read_snapshot(const std::filesystem::path& campaign_dir);
/// series_NNN directories in index order. Throws Io when none exist.
std::vector<std::filesystem::path> list_series(const std::filesystem::path& campaign_dir);
std::vector<Dataset> read_campaign(const std::filesystem::path& campaign_dir);

}  // namespace qgprobe::protocol
