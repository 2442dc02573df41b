#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace qgprobe::detection {

struct Provenance {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string tool_version;
};

struct TimeSeries {
  double t0 = 0.0;
  double dt = 1.0;
  std::vector<double> samples;
  Provenance provenance;

  std::size_t size() const { return samples.size(); }
  double time(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
  double sample_rate() const { return 1.0 / dt; }
  /// Throws InvalidArgument for dt <= 0, NonFinite for non-finite samples.
  void validate() const;
};

/// Lock-in outputs of one (possibly group-averaged) measurement cycle.
struct QuadratureRecord {
  TimeSeries x;
  TimeSeries y;
  std::int64_t cycle_index = 0;

  std::size_t size() const { return x.size(); }
  double time(std::size_t i) const { return x.time(i); }
  /// Throws InvalidArgument when the two quadratures differ in length or timebase.
  void validate() const;
};

/// Sample-wise mean of records sharing a timebase; keeps the first record's cycle index.
QuadratureRecord average_records(const std::vector<QuadratureRecord>& records);

// Self-describing binary files: a text header of "key: value" lines closed by
// "end", followed by little-endian float64 payload.

void write_timeseries(std::ostream& out, const TimeSeries& ts);
TimeSeries read_timeseries(std::istream& in);

void write_record(std::ostream& out, const QuadratureRecord& rec);
QuadratureRecord read_record(std::istream& in);

void write_record_file(const std::filesystem::path& path, const QuadratureRecord& rec);
QuadratureRecord read_record_file(const std::filesystem::path& path);
void write_timeseries_file(const std::filesystem::path& path, const TimeSeries& ts);
TimeSeries read_timeseries_file(const std::filesystem::path& path);

}  // namespace qgprobe::detection
