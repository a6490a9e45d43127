#include "spsqkd/report.hpp"

#include <cstdio>
#include <ctime>

#include "spsqkd/csv.hpp"

namespace spsqkd::io {

namespace {

using nlohmann::json;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

json make_envelope(const RunConfig& cfg, std::optional<std::uint64_t> seed, json results) {
    json env;
    env["tool"] = kToolName;
    env["version"] = kToolVersion;
    env["schema_version"] = kReportSchemaVersion;
    env["timestamp"] = utc_timestamp();
    env["config_hash"] = config_hash_hex(cfg);
    if (seed) {
        env["seed"] = *seed;
    } else {
        env["seed"] = nullptr;
    }
    env["flags"]["ec_leak_scaled_by_q"] = cfg.analysis.fk.ec_leak_scaled_by_q;
    env["flags"]["pm_mode"] =
        cfg.analysis.pm_mode == link::MultiphotonAccounting::detected ? "detected" : "source";
    env["flags"]["dark_qber"] = cfg.analysis.dark_qber;
    env["config"] = to_json(cfg);
    env["results"] = std::move(results);
    return env;
}

json keyrate_result_to_json(const finitekey::KeyRateResult& kr) {
    json j;
    j["p_det"] = kr.p_det;
    j["p_m_used"] = kr.p_m;
    j["e_used"] = kr.e_used;
    j["a"] = kr.a_corr;
    j["q"] = kr.q_ratio;
    j["e_tilde"] = kr.e_tilde;
    j["delta_n"] = kr.delta_n;
    j["raw_s"] = kr.raw_s;
    j["s_finite"] = kr.s_finite;
    j["k_bits_per_s"] = kr.k_rate;
    j["no_detections"] = kr.no_detections;
    j["zero_correction"] = kr.zero_correction;
    j["entropy_saturated"] = kr.entropy_saturated;
    return j;
}

json sweep_to_json(const std::vector<link::SweepPoint>& points, double r_s) {
    json rows = json::array();
    for (const auto& p : points) {
        json row = keyrate_result_to_json(p.kr);
        row["d_km"] = p.distance_km;
        row["r_s"] = r_s;
        rows.push_back(std::move(row));
    }
    return rows;
}

json comparison_to_json(const sim::ComparisonReport& c) {
    json j;
    j["p_det"] = {{"analytic", c.p_det_analytic},
                  {"empirical", c.p_det_empirical},
                  {"z", c.z_p_det},
                  {"pass", c.pass_p_det}};
    j["qber"] = {{"analytic", c.qber_analytic},
                 {"empirical", c.qber_empirical},
                 {"z", c.z_qber},
                 {"pass", c.pass_qber}};
    j["secret_fraction"] = {{"analytic", c.s_analytic},
                            {"empirical", c.s_empirical},
                            {"rel_diff", c.s_rel_diff},
                            {"pass", c.pass_secret}};
    j["all_pass"] = c.all_pass;
    return j;
}

json sim_result_to_json(const sim::SimResult& r) {
    json j;
    char hash_hex[17];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(r.config_hash));
    j["config_hash"] = hash_hex;
    j["seed"] = r.seed;
    j["num_pulses"] = r.num_pulses;
    j["emitted"] = {{"vacuum", r.emitted_vacuum},
                    {"single", r.emitted_single},
                    {"multi", r.emitted_multi}};
    j["detected"] = r.detected;
    j["multi_detected"] = r.multi_detected;
    j["dark_only_detections"] = r.dark_only_detections;
    j["sifted"] = r.sifted;
    j["sifted_errors"] = r.sifted_errors;
    j["pe_bits"] = r.pe_bits;
    j["pe_errors"] = r.pe_errors;
    j["key_bits"] = r.key_bits;
    j["empirical_p_det"] = r.empirical_p_det;
    j["empirical_qber"] = r.empirical_qber;
    j["empirical_p_m_among_emissions"] = r.empirical_p_m_among_emissions;
    j["empirical_a"] = r.empirical_a;
    j["no_detections"] = r.no_detections;
    j["empirical_finite_key"] = keyrate_result_to_json(r.empirical_finite_key);
    j["final_key_bits"] = r.final_key_bits;
    j["analytic_comparison"] = comparison_to_json(r.comparison);
    return j;
}

json g2_to_json(const photo::G2FitResult& r) {
    json j;
    j["g2_zero"] = r.g2_zero;
    j["uncertainty"] = r.g2_uncertainty;
    j["baseline"] = r.baseline;
    j["residual_norm"] = r.residual_norm;
    j["side_peaks_used"] = r.side_peaks_used;
    j["peaks"] = json::array();
    for (const auto& p : r.peaks) {
        j["peaks"].push_back({{"center_ns", p.center_ns},
                              {"amplitude", p.amplitude},
                              {"half_width_ns", p.half_width_ns},
                              {"area", p.area},
                              {"residual_norm", p.residual_norm},
                              {"iterations", p.iterations},
                              {"converged", p.converged}});
    }
    return j;
}

json saturation_to_json(const photo::SaturationFit& f) {
    json j;
    j["i_sat_cps"] = f.i_sat;
    j["p_sat_uw"] = f.p_sat;
    j["residual_norm"] = f.residual_norm;
    j["iterations"] = f.iterations;
    j["covariance"] = f.covariance;
    return j;
}

json stability_to_json(const photo::StabilityReport& r) {
    json j;
    j["mean_cps"] = r.mean;
    j["rel_std"] = r.rel_std;
    j["min_window_mean"] = r.min_window_mean;
    j["max_window_mean"] = r.max_window_mean;
    j["window_s"] = r.window_s;
    j["window_count"] = r.window_count;
    j["blink_threshold"] = r.blink_threshold;
    j["blinking"] = r.blinking;
    return j;
}

std::string sweep_csv(
    const std::vector<std::pair<double, std::vector<link::SweepPoint>>>& curves) {
    std::string out = "d_km,r_s,p_det,a,e_tilde,delta_n,s_finite,k_bits_per_s\n";
    for (const auto& [r_s, points] : curves) {
        for (const auto& p : points) {
            out += format_double(p.distance_km);
            out += ',';
            out += format_double(r_s);
            out += ',';
            out += format_double(p.kr.p_det);
            out += ',';
            out += format_double(p.kr.a_corr);
            out += ',';
            out += format_double(p.kr.e_tilde);
            out += ',';
            out += format_double(p.kr.delta_n);
            out += ',';
            out += format_double(p.kr.s_finite);
            out += ',';
            out += format_double(p.kr.k_rate);
            out += '\n';
        }
    }
    return out;
}

void write_report(const std::filesystem::path& path, const json& envelope) {
    write_file_atomic(path, envelope.dump(2) + "\n");
}

}  // namespace spsqkd::io
