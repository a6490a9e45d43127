#include "spsqkd/config.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string_view>

#include "spsqkd/errors.hpp"

namespace spsqkd::io {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

const json& object_at(const json& j, const std::string& path, const std::string& key) {
    if (!j.contains(key)) fail("missing key '" + path + key + "'");
    return j[key];
}

// Every section is parsed against an explicit key list; anything else is
// rejected with its full dotted path.
void reject_unknown(const json& j, const std::string& path,
                    std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) fail("'" + path + "' must be an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const auto& k : allowed) {
            if (item.key() == k) {
                known = true;
                break;
            }
        }
        if (!known) fail("unknown key '" + path + "." + item.key() + "'");
    }
}

double get_number(const json& j, const std::string& path, const std::string& key) {
    const json& v = object_at(j, path + ".", key);
    if (!v.is_number()) fail("'" + path + "." + key + "' must be a number");
    return v.get<double>();
}

std::uint64_t get_uint(const json& j, const std::string& path, const std::string& key) {
    const json& v = object_at(j, path + ".", key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        fail("'" + path + "." + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

bool get_bool(const json& j, const std::string& path, const std::string& key) {
    const json& v = object_at(j, path + ".", key);
    if (!v.is_boolean()) fail("'" + path + "." + key + "' must be a boolean");
    return v.get<bool>();
}

std::string get_string(const json& j, const std::string& path, const std::string& key) {
    const json& v = object_at(j, path + ".", key);
    if (!v.is_string()) fail("'" + path + "." + key + "' must be a string");
    return v.get<std::string>();
}

std::uint64_t fnv1a64_str(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

void RunConfig::validate() const {
    try {
        protocol.validate();
        source.validate();
        channel.validate();
    } catch (const std::invalid_argument& ex) {
        fail(std::string("invalid configuration: ") + ex.what());
    }
    if (sweep.d_min_km < 0.0 || sweep.d_max_km < sweep.d_min_km || sweep.d_step_km <= 0.0) {
        fail("invalid configuration: sweep distances must satisfy 0 <= min <= max, step > 0");
    }
    if (sweep.r_s_values.empty()) fail("invalid configuration: sweep.r_s_values is empty");
    for (double r : sweep.r_s_values) {
        if (r <= 0.0) fail("invalid configuration: repetition rates must be positive");
    }
    if (estimators.g2_side_peaks < 3) fail("invalid configuration: g2_side_peaks must be >= 3");
    if (estimators.g2_rep_period_ns <= 0.0) {
        fail("invalid configuration: g2_rep_period_ns must be positive");
    }
    if (estimators.stability_window_s <= 0.0 || estimators.stability_blink_threshold <= 0.0) {
        fail("invalid configuration: stability window and threshold must be positive");
    }
    if (simulation.num_pulses < 10000) {
        fail("invalid configuration: simulation.num_pulses must be at least 1e4");
    }
    if (simulation.distance_km < 0.0) {
        fail("invalid configuration: simulation.distance_km must be >= 0");
    }
}

sim::SimConfig RunConfig::sim_config() const {
    sim::SimConfig cfg;
    cfg.src = source;
    cfg.ch = channel;
    cfg.ch.distance_km = simulation.distance_km;
    cfg.params = protocol;
    cfg.num_pulses = simulation.num_pulses;
    cfg.seed = simulation.seed.value_or(0);
    cfg.analysis = analysis;
    return cfg;
}

RunConfig fig4_default_config() {
    RunConfig cfg;
    cfg.protocol.n = 1'000'000;
    cfg.protocol.m = 500'000;
    cfg.protocol.f_ec = 1.1;
    cfg.protocol.e = 0.02;
    cfg.eps_weights = {0.25, 0.25, 0.25, 0.25};
    cfg.protocol.eps = finitekey::split_epsilon(1e-10, cfg.eps_weights);

    cfg.source.p1 = 0.5;
    cfg.source.p_m = 0.07;
    cfg.source.r_s = 2e7;
    cfg.source.g2_zero = 0.07;

    cfg.channel.alpha_db_per_km = 3.5;
    cfg.channel.distance_km = 0.0;
    cfg.channel.eta_det = 0.6;
    cfg.channel.p_dark = 1e-6;

    cfg.analysis.fk.ec_leak_scaled_by_q = false;
    cfg.analysis.pm_mode = link::MultiphotonAccounting::detected;
    cfg.analysis.dark_qber = true;

    cfg.sweep.d_min_km = 0.0;
    cfg.sweep.d_max_km = 15.0;
    cfg.sweep.d_step_km = 0.25;
    cfg.sweep.r_s_values = {1e7, 2e7, 4e7};

    cfg.simulation.num_pulses = 10'000'000;
    cfg.simulation.distance_km = 2.0;
    cfg.simulation.seed = 20220719;
    return cfg;
}

RunConfig parse_config(const json& j) {
    RunConfig cfg;
    reject_unknown(j, "config",
                   {"protocol", "source", "channel", "analysis", "sweep", "estimators",
                    "simulation"});

    const json& p = object_at(j, "config.", "protocol");
    reject_unknown(p, "protocol", {"n", "m", "f_ec", "e", "eps_total", "eps_weights"});
    cfg.protocol.n = get_uint(p, "protocol", "n");
    cfg.protocol.m = get_uint(p, "protocol", "m");
    cfg.protocol.f_ec = get_number(p, "protocol", "f_ec");
    cfg.protocol.e = get_number(p, "protocol", "e");
    const double eps_total = get_number(p, "protocol", "eps_total");
    if (p.contains("eps_weights")) {
        const json& arr = p["eps_weights"];
        if (!arr.is_array() || arr.size() != 4) {
            fail("'protocol.eps_weights' must be an array of 4 numbers");
        }
        for (std::size_t i = 0; i < 4; ++i) {
            if (!arr[i].is_number()) fail("'protocol.eps_weights' must contain numbers");
            cfg.eps_weights[i] = arr[i].get<double>();
        }
    }
    try {
        cfg.protocol.eps = finitekey::split_epsilon(eps_total, cfg.eps_weights);
    } catch (const std::invalid_argument& ex) {
        fail(std::string("'protocol': ") + ex.what());
    }

    const json& s = object_at(j, "config.", "source");
    reject_unknown(s, "source", {"p1", "p_m", "r_s", "g2_zero"});
    cfg.source.p1 = get_number(s, "source", "p1");
    cfg.source.p_m = get_number(s, "source", "p_m");
    cfg.source.r_s = get_number(s, "source", "r_s");
    if (s.contains("g2_zero")) cfg.source.g2_zero = get_number(s, "source", "g2_zero");

    const json& c = object_at(j, "config.", "channel");
    reject_unknown(c, "channel", {"alpha_db_per_km", "eta_det", "p_dark"});
    cfg.channel.alpha_db_per_km = get_number(c, "channel", "alpha_db_per_km");
    cfg.channel.eta_det = get_number(c, "channel", "eta_det");
    cfg.channel.p_dark = get_number(c, "channel", "p_dark");
    cfg.channel.distance_km = 0.0;

    const json& a = object_at(j, "config.", "analysis");
    reject_unknown(a, "analysis", {"ec_leak_scaled_by_q", "pm_mode", "dark_qber"});
    cfg.analysis.fk.ec_leak_scaled_by_q = get_bool(a, "analysis", "ec_leak_scaled_by_q");
    const std::string mode = get_string(a, "analysis", "pm_mode");
    if (mode == "detected") {
        cfg.analysis.pm_mode = link::MultiphotonAccounting::detected;
    } else if (mode == "source") {
        cfg.analysis.pm_mode = link::MultiphotonAccounting::source_side;
    } else {
        fail("'analysis.pm_mode' must be \"detected\" or \"source\"");
    }
    cfg.analysis.dark_qber = get_bool(a, "analysis", "dark_qber");

    const json& w = object_at(j, "config.", "sweep");
    reject_unknown(w, "sweep", {"d_min_km", "d_max_km", "d_step_km", "r_s_values"});
    cfg.sweep.d_min_km = get_number(w, "sweep", "d_min_km");
    cfg.sweep.d_max_km = get_number(w, "sweep", "d_max_km");
    cfg.sweep.d_step_km = get_number(w, "sweep", "d_step_km");
    {
        const json& arr = object_at(w, "sweep.", "r_s_values");
        if (!arr.is_array() || arr.empty()) fail("'sweep.r_s_values' must be a non-empty array");
        cfg.sweep.r_s_values.clear();
        for (const auto& x : arr) {
            if (!x.is_number()) fail("'sweep.r_s_values' must contain numbers only");
            cfg.sweep.r_s_values.push_back(x.get<double>());
        }
    }

    const json& e = object_at(j, "config.", "estimators");
    reject_unknown(e, "estimators",
                   {"g2_side_peaks", "g2_shared_width", "g2_rep_period_ns",
                    "saturation_poisson_weights", "stability_window_s",
                    "stability_blink_threshold"});
    cfg.estimators.g2_side_peaks = static_cast<int>(get_uint(e, "estimators", "g2_side_peaks"));
    cfg.estimators.g2_shared_width = get_bool(e, "estimators", "g2_shared_width");
    cfg.estimators.g2_rep_period_ns = get_number(e, "estimators", "g2_rep_period_ns");
    cfg.estimators.saturation_poisson_weights =
        get_bool(e, "estimators", "saturation_poisson_weights");
    cfg.estimators.stability_window_s = get_number(e, "estimators", "stability_window_s");
    cfg.estimators.stability_blink_threshold =
        get_number(e, "estimators", "stability_blink_threshold");

    const json& sim = object_at(j, "config.", "simulation");
    reject_unknown(sim, "simulation", {"num_pulses", "distance_km", "seed"});
    cfg.simulation.num_pulses = get_uint(sim, "simulation", "num_pulses");
    cfg.simulation.distance_km = get_number(sim, "simulation", "distance_km");
    if (sim.contains("seed")) {
        const json& v = sim["seed"];
        if (v.is_null()) {
            cfg.simulation.seed.reset();
        } else if (v.is_number_unsigned() ||
                   (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            cfg.simulation.seed = v.get<std::uint64_t>();
        } else {
            fail("'simulation.seed' must be a non-negative integer or null");
        }
    } else {
        cfg.simulation.seed.reset();
    }

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& ex) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + ex.what());
    }
    return parse_config(j);
}

json to_json(const RunConfig& cfg) {
    json j;
    j["protocol"]["n"] = cfg.protocol.n;
    j["protocol"]["m"] = cfg.protocol.m;
    j["protocol"]["f_ec"] = cfg.protocol.f_ec;
    j["protocol"]["e"] = cfg.protocol.e;
    j["protocol"]["eps_total"] = cfg.protocol.eps.total;
    j["protocol"]["eps_weights"] = cfg.eps_weights;

    j["source"]["p1"] = cfg.source.p1;
    j["source"]["p_m"] = cfg.source.p_m;
    j["source"]["r_s"] = cfg.source.r_s;
    j["source"]["g2_zero"] = cfg.source.g2_zero;

    j["channel"]["alpha_db_per_km"] = cfg.channel.alpha_db_per_km;
    j["channel"]["eta_det"] = cfg.channel.eta_det;
    j["channel"]["p_dark"] = cfg.channel.p_dark;

    j["analysis"]["ec_leak_scaled_by_q"] = cfg.analysis.fk.ec_leak_scaled_by_q;
    j["analysis"]["pm_mode"] =
        cfg.analysis.pm_mode == link::MultiphotonAccounting::detected ? "detected" : "source";
    j["analysis"]["dark_qber"] = cfg.analysis.dark_qber;

    j["sweep"]["d_min_km"] = cfg.sweep.d_min_km;
    j["sweep"]["d_max_km"] = cfg.sweep.d_max_km;
    j["sweep"]["d_step_km"] = cfg.sweep.d_step_km;
    j["sweep"]["r_s_values"] = cfg.sweep.r_s_values;

    j["estimators"]["g2_side_peaks"] = cfg.estimators.g2_side_peaks;
    j["estimators"]["g2_shared_width"] = cfg.estimators.g2_shared_width;
    j["estimators"]["g2_rep_period_ns"] = cfg.estimators.g2_rep_period_ns;
    j["estimators"]["saturation_poisson_weights"] = cfg.estimators.saturation_poisson_weights;
    j["estimators"]["stability_window_s"] = cfg.estimators.stability_window_s;
    j["estimators"]["stability_blink_threshold"] = cfg.estimators.stability_blink_threshold;

    j["simulation"]["num_pulses"] = cfg.simulation.num_pulses;
    j["simulation"]["distance_km"] = cfg.simulation.distance_km;
    if (cfg.simulation.seed) {
        j["simulation"]["seed"] = *cfg.simulation.seed;
    } else {
        j["simulation"]["seed"] = nullptr;
    }
    return j;
}

std::uint64_t config_hash(const RunConfig& cfg) {
    return fnv1a64_str(to_json(cfg).dump());
}

std::string config_hash_hex(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    return std::string(buf);
}

}  // namespace spsqkd::io
