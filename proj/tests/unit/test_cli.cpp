#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "qgprobe/protocol/config.hpp"
#include "unit/oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int status = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run cli(const std::string& args, const fs::path& scratch) {
  const auto err_file = scratch / "stderr.txt";
  const std::string cmd = std::string("\"") + QGPROBE_CLI + "\" " + args + " 2> \"" + err_file.string() + "\"";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int st = pclose(pipe);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  r.err = slurp(err_file);
  return r;
}

// Every regular file under `root`, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> m;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) m[fs::relative(e.path(), root).string()] = slurp(e.path());
  return m;
}

const fs::path kGolden = fs::path(QGPROBE_TEST_DATA) / "golden";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("errors are reported as JSON with exit status 2") {
    const auto dir = oracle::temp_dir("cli_err");
    auto r = cli("simulate --config /nonexistent/config.json --out " + (dir / "o").string(), dir);
    CHECK(r.status == 2);
    auto j = json::parse(r.err);
    CHECK(j.at("error") == "InvalidArgument");
    CHECK(j.contains("message"));

    r = cli("shift-scan --in " + kGolden.string(), dir);
    CHECK(r.status == 2);
    CHECK(json::parse(r.err).at("error") == "DegenerateSpan");

    std::ofstream(dir / "bad.json") << "{\"mode\": {\"frequency_Hz\": -1}}";
    r = cli("simulate --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string(), dir);
    CHECK(r.status == 2);
    CHECK(json::parse(r.err).at("error") == "InvalidConfig");

    r = cli("emit-plot-data --what pictures --in " + kGolden.string() + " --out " + dir.string(), dir);
    CHECK(r.status == 2);
    r = cli("frobnicate", dir);
    CHECK(r.status == 2);
    fs::remove_all(dir);
  }

  TEST_CASE("simulate is byte-for-byte reproducible") {
    const auto dir = oracle::temp_dir("cli_det");
    auto cfg = qgprobe::protocol::load_config(fs::path(QGPROBE_CONFIG_DIR) / "golden_small.json");
    cfg.storage.stationary_spectrum = 0.5;
    cfg.storage.spectrum_resolution = 200.0;
    cfg.storage.raw_cycles = 1;
    qgprobe::protocol::save_config(dir / "c.json", cfg);
    const std::string base = "simulate --config " + (dir / "c.json").string() + " --out ";
    REQUIRE(cli(base + (dir / "a").string(), dir).status == 0);
    REQUIRE(cli(base + (dir / "b").string(), dir).status == 0);
    const auto a = tree(dir / "a"), b = tree(dir / "b");
    CHECK(a.size() >= 6);
    CHECK(a == b);

    const auto r = cli(base + (dir / "c").string() + " --seed 8", dir);
    REQUIRE(r.status == 0);
    CHECK(json::parse(r.out).at("seed") == 8);
    CHECK(tree(dir / "c") != a);
    fs::remove_all(dir);
  }

  TEST_CASE("thermometry on the shipped dataset") {
    const auto dir = oracle::temp_dir("cli_th");
    const auto r = cli("thermometry --in " + kGolden.string(), dir);
    REQUIRE(r.status == 0);
    const auto j = json::parse(r.out);
    const double n = j.at("lorentzian_fit").at("n_bar").get<double>();
    CHECK(n == doctest::Approx(5.0).epsilon(0.1));
    CHECK(j.at("purity").get<double>() == doctest::Approx(0.09).epsilon(0.1));
    CHECK(j.at("purity").get<double>() == doctest::Approx(1.0 / (2.0 * n + 1.0)).epsilon(1e-12));
    CHECK(j.at("coherent_peak").at("alpha2_phonons").get<double>() == doctest::Approx(35.0).epsilon(0.1));

    // single spectrum file, with the detection chain from a configuration
    const auto r2 = cli("thermometry --in " + (kGolden / "series_000" / "stationary.psd").string() + " --config " +
                            (fs::path(QGPROBE_CONFIG_DIR) / "golden_small.json").string(),
                        dir);
    REQUIRE(r2.status == 0);
    CHECK(json::parse(r2.out).at("lorentzian_fit").at("n_bar").get<double>() == doctest::Approx(n).epsilon(1e-12));
    fs::remove_all(dir);
  }

  TEST_CASE("analyze, bound and plot data") {
    const auto dir = oracle::temp_dir("cli_an");
    fs::copy(kGolden, dir / "g", fs::copy_options::recursive);
    auto r = cli("analyze --in " + (dir / "g").string(), dir);
    REQUIRE(r.status == 0);
    REQUIRE(fs::exists(dir / "g" / "summary.report"));
    const auto summary = json::parse(slurp(dir / "g" / "summary.report"));
    const auto pinned = json::parse(slurp(fs::path(QGPROBE_TEST_DATA) / "golden_summary.report"));
    CHECK(summary.at("config_hash") == pinned.at("config_hash"));
    CHECK(summary.at("shift_statistics").at("X").at("mean_Hz").get<double>() ==
          doctest::Approx(pinned.at("shift_statistics").at("X").at("mean_Hz").get<double>()).epsilon(1e-9));

    r = cli("bound --summary " + (dir / "g" / "summary.report").string(), dir);
    REQUIRE(r.status == 0);
    auto b = json::parse(r.out);
    const double ms = b.at("beta0_max").get<double>();
    CHECK(ms > 0.0);
    CHECK(ms == std::max(b.at("X").at("beta0_max").get<double>(), b.at("Y").at("beta0_max").get<double>()));
    r = cli("bound --convention coherent-only --summary " + (dir / "g" / "summary.report").string(), dir);
    REQUIRE(r.status == 0);
    CHECK(json::parse(r.out).at("convention") == "coherent-only");
    r = cli("bound --convention peak --summary " + (dir / "g" / "summary.report").string(), dir);
    CHECK(r.status == 2);

    for (const char* what : {"spectra", "histogram", "quadratures"}) {
      CAPTURE(what);
      CHECK(cli(std::string("emit-plot-data --what ") + what + " --in " + (dir / "g").string() + " --out " +
                    (dir / "plots").string(),
                dir)
                .status == 0);
    }
    CHECK(fs::exists(dir / "plots" / "histogram_X.txt"));
    CHECK(fs::exists(dir / "plots" / "series_000_spectrum.txt"));
    CHECK(fs::exists(dir / "plots" / "series_000_Y_fit.txt"));
    std::ifstream spec(dir / "plots" / "series_000_spectrum.txt");
    std::string line;
    std::getline(spec, line);
    CHECK(line[0] == '#');
    fs::remove_all(dir);
  }

  TEST_CASE("shift-scan over a probe-detuning sweep") {
    const auto dir = oracle::temp_dir("cli_scan");
    auto cfg = qgprobe::protocol::load_config(fs::path(QGPROBE_CONFIG_DIR) / "detuning_sweep.json");
    cfg.n_series = 3;
    cfg.detuning_sweep = {-210e3, 0.0, 210e3};
    cfg.schedule.cycles_per_series = 50;
    cfg.schedule.series_duration = 2.0;
    qgprobe::protocol::save_config(dir / "c.json", cfg);
    REQUIRE(cli("simulate --config " + (dir / "c.json").string() + " --out " + (dir / "s").string(), dir).status == 0);
    const auto r = cli("shift-scan --in " + (dir / "s").string() + " --out " + (dir / "scan.txt").string(), dir);
    REQUIRE(r.status == 0);
    const auto j = json::parse(r.out);
    CHECK(j.at("points").size() == 3);
    CHECK(j.at("slope").get<double>() == doctest::Approx(2.6734481117710405).epsilon(0.1));
    CHECK(fs::exists(dir / "scan.txt"));
    fs::remove_all(dir);
  }

  TEST_CASE("trajectory export") {
    const auto dir = oracle::temp_dir("cli_tr");
    const auto r = cli("trajectory --beta0 0 --amplitude 1e-12 --periods 2 --every 10 --out " +
                           (dir / "t.txt").string(),
                       dir);
    REQUIRE(r.status == 0);
    std::ifstream in(dir / "t.txt");
    std::string line;
    int rows = 0;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#') ++rows;
    CHECK(rows > 10);
    fs::remove_all(dir);
  }
}
