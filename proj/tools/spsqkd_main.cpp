// spsqkd - finite-key BB84 key-rate analysis and single-photon-source
// characterisation toolkit.
//
// Exit codes: 0 success, 2 config error, 3 I/O error, 4 estimation failure,
// 5 strict-mode statistical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spsqkd/bb84_sim.hpp"
#include "spsqkd/config.hpp"
#include "spsqkd/csv.hpp"
#include "spsqkd/errors.hpp"
#include "spsqkd/link_model.hpp"
#include "spsqkd/photophysics.hpp"
#include "spsqkd/report.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitEstimation = 4;
constexpr int kExitStrict = 5;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool ec_leak_scaled_by_q = false;
    bool ec_flag_given = false;
};

spsqkd::io::RunConfig resolve_config(const CommonArgs& args) {
    spsqkd::io::RunConfig cfg;
    if (args.config_path.empty() || args.config_path == "fig4_default") {
        cfg = spsqkd::io::fig4_default_config();
    } else {
        cfg = spsqkd::io::load_config(args.config_path);
    }
    if (args.ec_flag_given) cfg.analysis.fk.ec_leak_scaled_by_q = args.ec_leak_scaled_by_q;
    if (args.seed) cfg.simulation.seed = args.seed;
    return cfg;
}

fs::path ensure_out_dir(const CommonArgs& args) {
    fs::path dir(args.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw spsqkd::IoError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

std::uint64_t resolve_seed(spsqkd::io::RunConfig& cfg) {
    if (!cfg.simulation.seed) {
        std::random_device rd;
        const std::uint64_t s =
            (static_cast<std::uint64_t>(rd()) << 32) ^ static_cast<std::uint64_t>(rd());
        cfg.simulation.seed = s;
        std::cout << "seed: " << s << " (generated; pass --seed to reproduce)\n";
    }
    return *cfg.simulation.seed;
}

std::vector<double> sweep_distances(const spsqkd::io::SweepSettings& s) {
    std::vector<double> out;
    for (double d = s.d_min_km; d <= s.d_max_km + 1e-9; d += s.d_step_km) {
        out.push_back(d);
    }
    return out;
}

int cmd_keyrate_sweep(const CommonArgs& args) {
    spsqkd::io::RunConfig cfg = resolve_config(args);
    const fs::path out_dir = ensure_out_dir(args);

    const auto distances = sweep_distances(cfg.sweep);
    std::vector<std::pair<double, std::vector<spsqkd::link::SweepPoint>>> curves;
    json results;
    results["sweep"] = json::array();
    for (double r_s : cfg.sweep.r_s_values) {
        spsqkd::link::SourceModel src = cfg.source;
        src.r_s = r_s;
        auto points = spsqkd::link::keyrate_curve(cfg.protocol, src, cfg.channel, distances,
                                                  cfg.analysis);
        for (const auto& row : spsqkd::io::sweep_to_json(points, r_s)) {
            results["sweep"].push_back(row);
        }
        // First zero-key distance after a positive start, if any.
        json cutoff = nullptr;
        bool seen_positive = false;
        for (const auto& p : points) {
            if (p.kr.k_rate > 0.0) seen_positive = true;
            if (seen_positive && p.kr.k_rate == 0.0) {
                cutoff = p.distance_km;
                break;
            }
        }
        results["cutoffs"].push_back({{"r_s", r_s}, {"cutoff_km", cutoff}});
        curves.emplace_back(r_s, std::move(points));
    }

    spsqkd::io::write_file_atomic(out_dir / "sweep.csv", spsqkd::io::sweep_csv(curves));
    spsqkd::io::write_report(out_dir / "keyrate_sweep_report.json",
                             spsqkd::io::make_envelope(cfg, std::nullopt, results));
    std::cout << "wrote " << (out_dir / "sweep.csv").string() << " and "
              << (out_dir / "keyrate_sweep_report.json").string() << "\n";
    return 0;
}

int cmd_fit_g2(const CommonArgs& args, const std::string& csv_path,
               std::optional<double> rep_period_override) {
    spsqkd::io::RunConfig cfg = resolve_config(args);
    const fs::path out_dir = ensure_out_dir(args);
    if (rep_period_override) cfg.estimators.g2_rep_period_ns = *rep_period_override;

    const auto cols = spsqkd::io::read_two_column_csv(csv_path, "delay_ns", "counts");
    spsqkd::photo::HBTHistogram hist;
    hist.bin_centers = cols.first;
    hist.counts = cols.second;
    hist.rep_period_ns = cfg.estimators.g2_rep_period_ns;
    try {
        hist.validate();
    } catch (const std::invalid_argument& ex) {
        throw spsqkd::IoError("'" + csv_path + "': " + ex.what());
    }

    spsqkd::photo::G2FitOptions opts;
    opts.side_peaks = cfg.estimators.g2_side_peaks;
    opts.shared_width = cfg.estimators.g2_shared_width;
    const auto fit = spsqkd::photo::fit_pulsed_g2(hist, opts);

    json results = spsqkd::io::g2_to_json(fit);
    results["input"] = csv_path;
    results["rep_period_ns"] = hist.rep_period_ns;
    spsqkd::io::write_report(out_dir / "g2_report.json",
                             spsqkd::io::make_envelope(cfg, std::nullopt, results));
    std::printf("g2(0) = %.4f +/- %.4f  (%s)\n", fit.g2_zero, fit.g2_uncertainty,
                (out_dir / "g2_report.json").string().c_str());
    return 0;
}

int cmd_fit_saturation(const CommonArgs& args, const std::vector<std::string>& csv_paths) {
    spsqkd::io::RunConfig cfg = resolve_config(args);
    const fs::path out_dir = ensure_out_dir(args);

    spsqkd::photo::SaturationOptions opts;
    opts.poisson_weights = cfg.estimators.saturation_poisson_weights;

    json results;
    results["fits"] = json::array();
    std::vector<spsqkd::photo::SaturationFit> fits;
    for (const auto& path : csv_paths) {
        const auto cols = spsqkd::io::read_two_column_csv(path, "power_uw", "counts_per_s");
        spsqkd::photo::SaturationData data;
        data.powers_uw = cols.first;
        data.rates_cps = cols.second;
        try {
            data.validate();
        } catch (const std::invalid_argument& ex) {
            throw spsqkd::IoError("'" + path + "': " + ex.what());
        }
        fits.push_back(spsqkd::photo::fit_saturation(data, opts));
        json f = spsqkd::io::saturation_to_json(fits.back());
        f["input"] = path;
        results["fits"].push_back(std::move(f));
        std::printf("%s: I_sat = %.6g counts/s, P_sat = %.6g uW\n", path.c_str(),
                    fits.back().i_sat, fits.back().p_sat);
    }
    if (fits.size() == 2) {
        const double ratio = spsqkd::link::sil_enhancement(fits[0].i_sat, fits[1].i_sat);
        results["enhancement"] = {{"numerator", csv_paths[0]},
                                  {"denominator", csv_paths[1]},
                                  {"i_sat_ratio", ratio}};
        std::printf("I_sat ratio (first/second) = %.4f\n", ratio);
    }
    spsqkd::io::write_report(out_dir / "saturation_report.json",
                             spsqkd::io::make_envelope(cfg, std::nullopt, results));
    return 0;
}

int cmd_simulate(const CommonArgs& args, bool strict) {
    spsqkd::io::RunConfig cfg = resolve_config(args);
    const fs::path out_dir = ensure_out_dir(args);
    const std::uint64_t seed = resolve_seed(cfg);

    spsqkd::sim::SimConfig sim_cfg = cfg.sim_config();
    const auto result = spsqkd::sim::simulate(sim_cfg);

    spsqkd::io::write_report(out_dir / "simulate_report.json",
                             spsqkd::io::make_envelope(cfg, seed,
                                                       spsqkd::io::sim_result_to_json(result)));
    std::printf("pulses %llu  detected %llu  sifted %llu  qber %.5f  final key %.0f bits\n",
                static_cast<unsigned long long>(result.num_pulses),
                static_cast<unsigned long long>(result.detected),
                static_cast<unsigned long long>(result.sifted), result.empirical_qber,
                result.final_key_bits);
    std::printf("z(p_det) = %+.3f  z(qber) = %+.3f  secret-fraction rel diff = %.4f  [%s]\n",
                result.comparison.z_p_det, result.comparison.z_qber,
                result.comparison.s_rel_diff, result.comparison.all_pass ? "ok" : "FAIL");
    if (strict && !result.comparison.all_pass) {
        std::cerr << "strict mode: statistical comparison failed\n";
        return kExitStrict;
    }
    return 0;
}

int cmd_stability(const CommonArgs& args, const std::string& csv_path) {
    spsqkd::io::RunConfig cfg = resolve_config(args);
    const fs::path out_dir = ensure_out_dir(args);

    const auto cols = spsqkd::io::read_two_column_csv(csv_path, "time_s", "counts_per_s");
    spsqkd::photo::StabilityTrace trace;
    trace.time_s = cols.first;
    trace.counts_cps = cols.second;
    try {
        trace.validate();
    } catch (const std::invalid_argument& ex) {
        throw spsqkd::IoError("'" + csv_path + "': " + ex.what());
    }

    const auto rep = spsqkd::photo::stability_stats(trace, cfg.estimators.stability_window_s,
                                                    cfg.estimators.stability_blink_threshold);
    json results = spsqkd::io::stability_to_json(rep);
    results["input"] = csv_path;
    spsqkd::io::write_report(out_dir / "stability_report.json",
                             spsqkd::io::make_envelope(cfg, std::nullopt, results));
    std::printf("mean %.6g counts/s, rel std %.4f, blinking: %s\n", rep.mean, rep.rel_std,
                rep.blinking ? "yes" : "no");
    return 0;
}

int cmd_print_config(const CommonArgs& args) {
    const spsqkd::io::RunConfig cfg = resolve_config(args);
    std::cout << spsqkd::io::to_json(cfg).dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Finite-key BB84 key-rate analysis and SPS characterisation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand name

    CommonArgs args;
    app.add_option("--config", args.config_path,
                   "Config file path, or 'fig4_default' for the bundled profile (default)");
    app.add_option("--out", args.out_dir, "Output directory (default: current directory)");
    auto* seed_opt = app.add_option("--seed", "RNG seed for randomized commands");
    auto* ec_flag = app.add_flag("--ec-leak-scaled-by-q",
                                 "Scale the error-correction leak by q (overrides config)");
    bool strict = false;
    app.add_flag("--strict", strict, "Fail (exit 5) when statistical checks fail");

    std::string g2_csv;
    std::optional<double> rep_period;
    auto* sub_g2 = app.add_subcommand("fit-g2", "Pulsed g2(0) from an HBT histogram CSV");
    sub_g2->add_option("histogram", g2_csv, "CSV with header delay_ns,counts")->required();
    auto* rep_opt = sub_g2->add_option("--rep-period-ns", "Pulse period override (ns)");

    std::vector<std::string> sat_csvs;
    auto* sub_sat =
        app.add_subcommand("fit-saturation", "Three-level saturation fit from power sweeps");
    sub_sat
        ->add_option("datasets", sat_csvs,
                     "One or two CSVs with header power_uw,counts_per_s; two compute the "
                     "I_sat ratio")
        ->required()
        ->expected(1, 2);

    std::string stab_csv;
    auto* sub_stab = app.add_subcommand("stability", "Photostability statistics from a trace CSV");
    sub_stab->add_option("trace", stab_csv, "CSV with header time_s,counts_per_s")->required();

    auto* sub_sweep = app.add_subcommand("keyrate-sweep", "Key rate versus fibre distance");
    auto* sub_sim = app.add_subcommand("simulate", "Monte Carlo BB84 run with analytic comparison");
    auto* sub_print = app.add_subcommand("print-config", "Print the resolved config as JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    if (seed_opt->count() > 0) args.seed = seed_opt->as<std::uint64_t>();
    args.ec_flag_given = ec_flag->count() > 0;
    args.ec_leak_scaled_by_q = args.ec_flag_given;
    if (rep_opt->count() > 0) rep_period = rep_opt->as<double>();

    try {
        if (sub_sweep->parsed()) return cmd_keyrate_sweep(args);
        if (sub_g2->parsed()) return cmd_fit_g2(args, g2_csv, rep_period);
        if (sub_sat->parsed()) return cmd_fit_saturation(args, sat_csvs);
        if (sub_sim->parsed()) return cmd_simulate(args, strict);
        if (sub_stab->parsed()) return cmd_stability(args, stab_csv);
        if (sub_print->parsed()) return cmd_print_config(args);
    } catch (const spsqkd::ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const spsqkd::IoError& ex) {
        std::cerr << "I/O error: " << ex.what() << "\n";
        return kExitIo;
    } catch (const spsqkd::FitError& ex) {
        std::cerr << "estimation error: " << ex.what() << "\n";
        return kExitEstimation;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
