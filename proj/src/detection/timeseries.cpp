#include "qgprobe/detection/timeseries.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "qgprobe/error.hpp"

namespace qgprobe::detection {

namespace {

static_assert(std::endian::native == std::endian::little, "payload is stored little-endian");

using Header = std::map<std::string, std::string>;

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_header(std::ostream& out, const std::string& format, const Header& h) {
  out << "format: " << format << '\n';
  for (const auto& [k, v] : h) out << k << ": " << v << '\n';
  out << "end\n";
}

Header read_header(std::istream& in, const std::string& expected_format) {
  Header h;
  std::string line;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      saw_end = true;
      break;
    }
    const auto colon = line.find(": ");
    if (colon == std::string::npos) throw Error(ErrorCode::Io, "malformed header line '" + line + "'");
    h[line.substr(0, colon)] = line.substr(colon + 2);
  }
  if (!saw_end) throw Error(ErrorCode::Io, "header not terminated");
  if (h["format"] != expected_format)
    throw Error(ErrorCode::Io, "expected format '" + expected_format + "', found '" + h["format"] + "'");
  return h;
}

const std::string& field(const Header& h, const std::string& key) {
  const auto it = h.find(key);
  if (it == h.end()) throw Error(ErrorCode::Io, "missing header field '" + key + "'");
  return it->second;
}

void write_payload(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_payload(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) throw Error(ErrorCode::Io, "truncated payload");
  return v;
}

Header provenance_fields(const TimeSeries& ts) {
  return {{"t0", format_double(ts.t0)},
          {"dt", format_double(ts.dt)},
          {"sample_rate_Hz", format_double(ts.sample_rate())},
          {"n", std::to_string(ts.size())},
          {"seed", std::to_string(ts.provenance.seed)},
          {"config_hash", ts.provenance.config_hash.empty() ? "-" : ts.provenance.config_hash},
          {"tool_version", ts.provenance.tool_version.empty() ? "-" : ts.provenance.tool_version},
          {"units", "t0,dt in s; samples in detector units"}};
}

void apply_provenance(const Header& h, TimeSeries& ts) {
  ts.t0 = std::stod(field(h, "t0"));
  ts.dt = std::stod(field(h, "dt"));
  ts.provenance.seed = std::stoull(field(h, "seed"));
  ts.provenance.config_hash = field(h, "config_hash") == "-" ? "" : field(h, "config_hash");
  ts.provenance.tool_version = field(h, "tool_version") == "-" ? "" : field(h, "tool_version");
}

}  // namespace

void TimeSeries::validate() const {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "time step must be > 0");
  for (double s : samples)
    if (!std::isfinite(s)) throw Error(ErrorCode::NonFinite, "time series contains non-finite samples");
}

void QuadratureRecord::validate() const {
  x.validate();
  y.validate();
  if (x.size() != y.size() || x.t0 != y.t0 || x.dt != y.dt)
    throw Error(ErrorCode::InvalidArgument, "quadratures must share length and timebase");
}

QuadratureRecord average_records(const std::vector<QuadratureRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::InvalidArgument, "nothing to average");
  QuadratureRecord out = records.front();
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != out.size() || rec.x.dt != out.x.dt || rec.x.t0 != out.x.t0)
      throw Error(ErrorCode::InvalidArgument, "records to average must share a timebase");
    for (std::size_t i = 0; i < out.size(); ++i) {
      out.x.samples[i] += rec.x.samples[i];
      out.y.samples[i] += rec.y.samples[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(records.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.x.samples[i] *= inv;
    out.y.samples[i] *= inv;
  }
  return out;
}

void write_timeseries(std::ostream& out, const TimeSeries& ts) {
  write_header(out, "qgprobe-timeseries 1", provenance_fields(ts));
  write_payload(out, ts.samples);
}

TimeSeries read_timeseries(std::istream& in) {
  const Header h = read_header(in, "qgprobe-timeseries 1");
  TimeSeries ts;
  apply_provenance(h, ts);
  ts.samples = read_payload(in, std::stoull(field(h, "n")));
  return ts;
}

void write_record(std::ostream& out, const QuadratureRecord& rec) {
  rec.validate();
  Header h = provenance_fields(rec.x);
  h["cycle_index"] = std::to_string(rec.cycle_index);
  h["layout"] = "x[n] then y[n]";
  write_header(out, "qgprobe-qrec 1", h);
  write_payload(out, rec.x.samples);
  write_payload(out, rec.y.samples);
}

QuadratureRecord read_record(std::istream& in) {
  const Header h = read_header(in, "qgprobe-qrec 1");
  QuadratureRecord rec;
  apply_provenance(h, rec.x);
  apply_provenance(h, rec.y);
  rec.cycle_index = std::stoll(field(h, "cycle_index"));
  const auto n = std::stoull(field(h, "n"));
  rec.x.samples = read_payload(in, n);
  rec.y.samples = read_payload(in, n);
  return rec;
}

void write_record_file(const std::filesystem::path& path, const QuadratureRecord& rec) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_record(out, rec);
}

QuadratureRecord read_record_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return read_record(in);
}

void write_timeseries_file(const std::filesystem::path& path, const TimeSeries& ts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_timeseries(out, ts);
}

TimeSeries read_timeseries_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return read_timeseries(in);
}

}  // namespace qgprobe::detection
