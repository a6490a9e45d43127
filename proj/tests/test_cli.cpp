#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "spsqkd/config.hpp"
#include "spsqkd/csv.hpp"
#include "spsqkd/photophysics.hpp"
#include "support/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
};

RunResult run_cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "spsqkd_cli_test.log";
    const std::string cmd =
        std::string(SPSQKD_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int rc = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    return r;
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "spsqkd_cli_tests";
    fs::create_directories(dir);
    return dir;
}

std::string comb_csv(const synth::CombSpec& spec) {
    const auto hist = synth::make_comb(spec);
    std::string csv = "delay_ns,counts\n";
    for (std::size_t i = 0; i < hist.bin_centers.size(); ++i) {
        csv += spsqkd::io::format_double(hist.bin_centers[i]) + "," +
               spsqkd::io::format_double(hist.counts[i]) + "\n";
    }
    return csv;
}

std::string saturation_csv(const synth::SaturationSpec& spec) {
    const auto data = synth::make_saturation(spec);
    std::string csv = "power_uw,counts_per_s\n";
    for (std::size_t i = 0; i < data.powers_uw.size(); ++i) {
        csv += spsqkd::io::format_double(data.powers_uw[i]) + "," +
               spsqkd::io::format_double(data.rates_cps[i]) + "\n";
    }
    return csv;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes: success, config error, I/O error, estimation failure") {
    const fs::path dir = work_dir();

    CHECK(run_cli("print-config").exit_code == 0);

    // invalid config -> 2
    const fs::path bad_cfg = dir / "bad.json";
    spsqkd::io::write_file_atomic(bad_cfg, "{\"protocol\": {\"oops\": 1}}\n");
    CHECK(run_cli("keyrate-sweep --config " + bad_cfg.string() + " --out " + dir.string())
              .exit_code == 2);

    // missing input file -> 3
    CHECK(run_cli("fit-g2 " + (dir / "no_such.csv").string() + " --out " + dir.string())
              .exit_code == 3);

    // malformed CSV header -> 3
    const fs::path bad_csv = dir / "bad_header.csv";
    spsqkd::io::write_file_atomic(bad_csv, "wrong,header\n1,2\n");
    CHECK(run_cli("fit-g2 " + bad_csv.string() + " --out " + dir.string()).exit_code == 3);

    // unidentifiable saturation data -> 4
    const fs::path flat = dir / "flat.csv";
    spsqkd::io::write_file_atomic(flat,
                                  "power_uw,counts_per_s\n1,5\n2,5\n3,5\n4,5\n");
    CHECK(run_cli("fit-saturation " + flat.string() + " --out " + dir.string()).exit_code == 4);

    // unknown flag -> 2
    CHECK(run_cli("keyrate-sweep --frobnicate").exit_code == 2);
}

TEST_CASE("fit-g2 pipeline reproduces the comb ratio end to end") {
    const fs::path dir = work_dir();
    synth::CombSpec spec;  // 7% centre comb at 25 ns period
    const fs::path csv = dir / "comb.csv";
    spsqkd::io::write_file_atomic(csv, comb_csv(spec));

    REQUIRE(run_cli("fit-g2 " + csv.string() + " --out " + dir.string()).exit_code == 0);
    std::ifstream in(dir / "g2_report.json");
    const auto env = nlohmann::json::parse(in);
    CHECK(std::abs(env["results"]["g2_zero"].get<double>() - 0.070) < 0.010);
    CHECK(env["results"]["rep_period_ns"] == 25.0);
    CHECK(env["config_hash"].is_string());
}

TEST_CASE("fit-saturation with two datasets emits the enhancement ratio") {
    const fs::path dir = work_dir();
    synth::SaturationSpec sil;
    sil.i_sat = 1.05e7;
    sil.p_sat = 73.1;
    synth::SaturationSpec ref;
    ref.i_sat = 1.67e6;
    ref.p_sat = 223.0;
    const fs::path a = dir / "sil.csv", b = dir / "ref.csv";
    spsqkd::io::write_file_atomic(a, saturation_csv(sil));
    spsqkd::io::write_file_atomic(b, saturation_csv(ref));

    REQUIRE(run_cli("fit-saturation " + a.string() + " " + b.string() + " --out " +
                    dir.string())
                .exit_code == 0);
    std::ifstream in(dir / "saturation_report.json");
    const auto env = nlohmann::json::parse(in);
    CHECK(env["results"]["fits"].size() == 2);
    CHECK(std::abs(env["results"]["enhancement"]["i_sat_ratio"].get<double>() - 6.287) < 0.05);
}

TEST_CASE("stability pipeline") {
    const fs::path dir = work_dir();
    synth::TraceSpec spec;
    spec.noise_rel = 0.05;
    spec.seed = 777;
    const auto trace = synth::make_trace(spec);
    std::string csv = "time_s,counts_per_s\n";
    for (std::size_t i = 0; i < trace.time_s.size(); ++i) {
        csv += spsqkd::io::format_double(trace.time_s[i]) + "," +
               spsqkd::io::format_double(trace.counts_cps[i]) + "\n";
    }
    const fs::path p = dir / "trace.csv";
    spsqkd::io::write_file_atomic(p, csv);

    REQUIRE(run_cli("stability " + p.string() + " --out " + dir.string()).exit_code == 0);
    std::ifstream in(dir / "stability_report.json");
    const auto env = nlohmann::json::parse(in);
    CHECK(env["results"]["blinking"] == false);
    CHECK(std::abs(env["results"]["rel_std"].get<double>() - 0.05) < 0.01);
}

TEST_CASE("simulate --strict exits 5 when the statistics cannot match") {
    // 1e4 pulses leave the multi-photon statistics too noisy for the 5% gate;
    // seed 1 deterministically fails it.
    const fs::path dir = work_dir();
    auto cfg = spsqkd::io::fig4_default_config();
    cfg.simulation.num_pulses = 10'000;
    cfg.simulation.seed = 1;
    const fs::path p = dir / "noisy_sim.json";
    spsqkd::io::write_file_atomic(p, spsqkd::io::to_json(cfg).dump(2) + "\n");

    CHECK(run_cli("simulate --strict --config " + p.string() + " --out " + dir.string())
              .exit_code == 5);
    // without --strict the same run reports and exits 0
    CHECK(run_cli("simulate --config " + p.string() + " --out " + dir.string()).exit_code == 0);
}

TEST_CASE("simulate without a seed generates and reports one") {
    const fs::path dir = work_dir();
    auto cfg = spsqkd::io::fig4_default_config();
    cfg.simulation.num_pulses = 10'000;
    cfg.simulation.seed.reset();
    const fs::path p = dir / "no_seed.json";
    spsqkd::io::write_file_atomic(p, spsqkd::io::to_json(cfg).dump(2) + "\n");

    REQUIRE(run_cli("simulate --config " + p.string() + " --out " + dir.string()).exit_code == 0);
    std::ifstream in(dir / "simulate_report.json");
    const auto env = nlohmann::json::parse(in);
    CHECK(env["seed"].is_number_unsigned());  // generated, echoed in the report
}

TEST_CASE("simulate --strict passes on the bundled profile and embeds the seed") {
    const fs::path dir = work_dir();
    REQUIRE(run_cli("simulate --strict --out " + dir.string()).exit_code == 0);
    std::ifstream in(dir / "simulate_report.json");
    const auto env = nlohmann::json::parse(in);
    CHECK(env["seed"] == 20220719);
    CHECK(env["results"]["analytic_comparison"]["all_pass"] == true);
    CHECK(env["flags"]["pm_mode"] == "detected");

    // seed override is honoured and reported
    REQUIRE(run_cli("simulate --seed 42 --out " + dir.string()).exit_code == 0);
    std::ifstream in2(dir / "simulate_report.json");
    const auto env2 = nlohmann::json::parse(in2);
    CHECK(env2["seed"] == 42);
}

}  // TEST_SUITE
