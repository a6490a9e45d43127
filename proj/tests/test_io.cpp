#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "spsqkd/config.hpp"
#include "spsqkd/csv.hpp"
#include "spsqkd/errors.hpp"
#include "spsqkd/report.hpp"
#include "spsqkd/rng.hpp"

using namespace spsqkd;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "spsqkd_io_tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("doubles round-trip through the CSV formatter") {
    rng::Xoshiro256 r(71);
    for (int i = 0; i < 2000; ++i) {
        const double exponent = 30.0 * (r.next_double() - 0.5);
        const double v = (r.next_double() - 0.5) * std::pow(10.0, exponent);
        const std::string s = io::format_double(v);
        CHECK(io::parse_double(s, "roundtrip") == v);  // shortest repr is exact
        CHECK(s.find(',') == std::string::npos);
    }
    CHECK(io::format_double(0.0) == "0");
    CHECK_THROWS_AS(io::parse_double("1.2.3", "ctx"), IoError);
    CHECK_THROWS_AS(io::parse_double("abc", "ctx"), IoError);
    CHECK_THROWS_AS(io::parse_double("1,5", "ctx"), IoError);
}

TEST_CASE("two-column CSV: header enforcement and row errors") {
    const fs::path dir = temp_dir();
    const fs::path good = dir / "good.csv";
    io::write_file_atomic(good, "power_uw,counts_per_s\n1,10\n2.5,20\n");
    const auto cols = io::read_two_column_csv(good, "power_uw", "counts_per_s");
    REQUIRE(cols.first.size() == 2);
    CHECK(cols.first[1] == 2.5);
    CHECK(cols.second[0] == 10.0);

    const fs::path wrong_header = dir / "wrong_header.csv";
    io::write_file_atomic(wrong_header, "power,rate\n1,10\n");
    CHECK_THROWS_WITH_AS(io::read_two_column_csv(wrong_header, "power_uw", "counts_per_s"),
                         doctest::Contains("expected header 'power_uw,counts_per_s'"), IoError);

    const fs::path bad_cell = dir / "bad_cell.csv";
    io::write_file_atomic(bad_cell, "power_uw,counts_per_s\n1,10\n2,oops\n");
    CHECK_THROWS_WITH_AS(io::read_two_column_csv(bad_cell, "power_uw", "counts_per_s"),
                         doctest::Contains("row 3"), IoError);

    CHECK_THROWS_AS(io::read_two_column_csv(dir / "missing.csv", "a", "b"), IoError);
}

TEST_CASE("atomic write leaves no temp file and ends with a newline") {
    const fs::path dir = temp_dir();
    const fs::path p = dir / "atomic.csv";
    io::write_file_atomic(p, "header\n1\n");
    CHECK(fs::exists(p));
    CHECK_FALSE(fs::exists(dir / "atomic.csv.tmp"));
    std::ifstream in(p, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE_FALSE(content.empty());
    CHECK(content.back() == '\n');
}

TEST_CASE("config: default profile round-trips through JSON with a stable hash") {
    const auto cfg = io::fig4_default_config();
    cfg.validate();
    const auto j = io::to_json(cfg);
    const auto reparsed = io::parse_config(j);
    CHECK(io::config_hash(reparsed) == io::config_hash(cfg));
    CHECK(io::config_hash_hex(cfg).size() == 16);

    // spot-check the published values
    CHECK(cfg.protocol.n == 1'000'000);
    CHECK(cfg.protocol.m == 500'000);
    CHECK(cfg.protocol.f_ec == 1.1);
    CHECK(cfg.protocol.e == 0.02);
    CHECK(cfg.protocol.eps.total == 1e-10);
    CHECK(cfg.source.p_m == 0.07);
    CHECK(cfg.channel.alpha_db_per_km == 3.5);
}

TEST_CASE("config: bundled file matches the embedded profile") {
    const fs::path bundled = fs::path(SPSQKD_CONFIG_DIR) / "fig4_default.json";
    REQUIRE(fs::exists(bundled));
    const auto from_file = io::load_config(bundled);
    CHECK(io::config_hash(from_file) == io::config_hash(io::fig4_default_config()));
}

TEST_CASE("config: unknown keys are named") {
    auto j = io::to_json(io::fig4_default_config());
    j["protocol"]["fudge"] = 1;
    CHECK_THROWS_WITH_AS(io::parse_config(j), doctest::Contains("protocol.fudge"), ConfigError);

    j = io::to_json(io::fig4_default_config());
    j["sweep"]["shape"] = "log";
    CHECK_THROWS_WITH_AS(io::parse_config(j), doctest::Contains("sweep.shape"), ConfigError);

    j = io::to_json(io::fig4_default_config());
    j["extra_section"] = nlohmann::json::object();
    CHECK_THROWS_WITH_AS(io::parse_config(j), doctest::Contains("extra_section"), ConfigError);
}

TEST_CASE("config: invalid values are rejected with context") {
    auto j = io::to_json(io::fig4_default_config());
    j["protocol"]["e"] = 0.7;
    CHECK_THROWS_AS(io::parse_config(j), ConfigError);

    j = io::to_json(io::fig4_default_config());
    j["channel"]["eta_det"] = 0.0;
    CHECK_THROWS_AS(io::parse_config(j), ConfigError);

    j = io::to_json(io::fig4_default_config());
    j["analysis"]["pm_mode"] = "both";
    CHECK_THROWS_WITH_AS(io::parse_config(j), doctest::Contains("pm_mode"), ConfigError);

    j = io::to_json(io::fig4_default_config());
    j["protocol"].erase("n");
    CHECK_THROWS_WITH_AS(io::parse_config(j), doctest::Contains("protocol.n"), ConfigError);

    j = io::to_json(io::fig4_default_config());
    j["simulation"]["num_pulses"] = 100;
    CHECK_THROWS_AS(io::parse_config(j), ConfigError);
}

TEST_CASE("report envelope: hash recomputable from the embedded config") {
    const auto cfg = io::fig4_default_config();
    const auto env = io::make_envelope(cfg, 42, nlohmann::json{{"answer", 42}});
    CHECK(env["tool"] == "spsqkd");
    CHECK(env["schema_version"] == io::kReportSchemaVersion);
    CHECK(env["seed"] == 42);
    CHECK(env["results"]["answer"] == 42);
    CHECK(env["flags"]["pm_mode"] == "detected");

    const auto embedded = io::parse_config(env["config"]);
    CHECK(io::config_hash_hex(embedded) == env["config_hash"].get<std::string>());
}

TEST_CASE("sweep CSV layout") {
    const auto cfg = io::fig4_default_config();
    link::SourceModel src = cfg.source;
    const std::vector<double> ds{0.0, 1.0};
    auto points = link::keyrate_curve(cfg.protocol, src, cfg.channel, ds, cfg.analysis);
    const std::string csv = io::sweep_csv({{src.r_s, points}});
    CHECK(csv.rfind("d_km,r_s,p_det,a,e_tilde,delta_n,s_finite,k_bits_per_s\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    CHECK(csv.back() == '\n');
    CHECK(csv.find("nan") == std::string::npos);
}

}  // TEST_SUITE
