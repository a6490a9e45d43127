#include "spsqkd/bb84_sim.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "spsqkd/rng.hpp"

namespace spsqkd::sim {

namespace {

constexpr std::uint64_t kBlockSize = 65536;

std::uint64_t fnv1a64(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_u64(std::uint64_t h, std::uint64_t v) {
    return fnv1a64(h, &v, sizeof(v));
}

std::uint64_t hash_f64(std::uint64_t h, double v) {
    return hash_u64(h, std::bit_cast<std::uint64_t>(v));
}

struct BlockTally {
    std::uint64_t emitted_vacuum = 0, emitted_single = 0, emitted_multi = 0;
    std::uint64_t detected = 0, multi_detected = 0, dark_only = 0;
    std::uint64_t sifted = 0, sifted_errors = 0;
    std::uint64_t pe_bits = 0, pe_errors = 0;

    void merge(const BlockTally& o) {
        emitted_vacuum += o.emitted_vacuum;
        emitted_single += o.emitted_single;
        emitted_multi += o.emitted_multi;
        detected += o.detected;
        multi_detected += o.multi_detected;
        dark_only += o.dark_only;
        sifted += o.sifted;
        sifted_errors += o.sifted_errors;
        pe_bits += o.pe_bits;
        pe_errors += o.pe_errors;
    }
};

BlockTally simulate_block(const SimConfig& cfg, std::uint64_t block_index,
                          std::uint64_t pulses, double eta, double pe_fraction) {
    rng::Xoshiro256 stream = rng::block_stream(cfg.seed, block_index);
    const double p0 = cfg.src.p0();
    const double p1 = cfg.src.p1;
    const double e = cfg.params.e;
    const double p_dark = cfg.ch.p_dark;

    BlockTally t;
    for (std::uint64_t i = 0; i < pulses; ++i) {
        // 1. photon class
        const double u = stream.next_double();
        int photons;
        if (u < p0) {
            photons = 0;
            ++t.emitted_vacuum;
        } else if (u < p0 + p1) {
            photons = 1;
            ++t.emitted_single;
        } else {
            photons = 2;
            ++t.emitted_multi;
        }

        // 2. per-photon channel + detector loss
        int survivors = 0;
        for (int ph = 0; ph < photons; ++ph) {
            if (stream.next_bernoulli(eta)) ++survivors;
        }

        // 3. dark count
        const bool dark = stream.next_bernoulli(p_dark);
        if (survivors == 0 && !dark) continue;

        ++t.detected;
        if (photons == 2) ++t.multi_detected;
        if (survivors == 0) ++t.dark_only;

        // 4. basis sifting
        if (!stream.next_bit()) continue;
        ++t.sifted;

        // 5. bit value
        bool error;
        if (survivors == 0) {
            error = stream.next_bit();  // dark counts carry a random bit
        } else if (survivors == 2) {
            // Squashing: two detections, random assignment on conflict.
            const bool e1 = stream.next_bernoulli(e);
            const bool e2 = stream.next_bernoulli(e);
            error = (e1 == e2) ? e1 : stream.next_bit();
        } else {
            error = stream.next_bernoulli(e);
        }
        if (error) ++t.sifted_errors;

        // 6. parameter-estimation split
        if (stream.next_bernoulli(pe_fraction)) {
            ++t.pe_bits;
            if (error) ++t.pe_errors;
        }
    }
    return t;
}

}  // namespace

void SimConfig::validate() const {
    src.validate();
    ch.validate();
    params.validate();
    if (num_pulses < 10000) {
        throw std::invalid_argument("num_pulses must be at least 1e4");
    }
}

std::uint64_t config_hash(const SimConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = hash_f64(h, cfg.src.p1);
    h = hash_f64(h, cfg.src.p_m);
    h = hash_f64(h, cfg.src.r_s);
    h = hash_f64(h, cfg.ch.alpha_db_per_km);
    h = hash_f64(h, cfg.ch.distance_km);
    h = hash_f64(h, cfg.ch.eta_det);
    h = hash_f64(h, cfg.ch.p_dark);
    h = hash_u64(h, cfg.params.n);
    h = hash_u64(h, cfg.params.m);
    h = hash_f64(h, cfg.params.f_ec);
    h = hash_f64(h, cfg.params.e);
    h = hash_f64(h, cfg.params.eps.total);
    h = hash_f64(h, cfg.params.eps.smooth);
    h = hash_f64(h, cfg.params.eps.pa);
    h = hash_f64(h, cfg.params.eps.ec);
    h = hash_f64(h, cfg.params.eps.pe);
    h = hash_u64(h, cfg.num_pulses);
    h = hash_u64(h, cfg.seed);
    h = hash_u64(h, cfg.analysis.pm_mode == link::MultiphotonAccounting::detected ? 1 : 0);
    h = hash_u64(h, cfg.analysis.dark_qber ? 1 : 0);
    h = hash_u64(h, cfg.analysis.fk.ec_leak_scaled_by_q ? 1 : 0);
    return h;
}

AnalyticPrediction analytic_prediction(const SimConfig& cfg) {
    cfg.validate();
    AnalyticPrediction out;
    out.kr = link::link_budget(cfg.params, cfg.src, cfg.ch, cfg.analysis);
    out.e_eff = link::effective_qber(cfg.params.e, cfg.src, cfg.ch);
    out.config_hash = config_hash(cfg);
    return out;
}

SimResult simulate(const SimConfig& cfg) {
    cfg.validate();

    const double eta =
        link::transmittance(cfg.ch.alpha_db_per_km, cfg.ch.distance_km) * cfg.ch.eta_det;
    const double pe_fraction = static_cast<double>(cfg.params.m) /
                               static_cast<double>(cfg.params.n + cfg.params.m);

    BlockTally total;
    const std::uint64_t n_blocks = (cfg.num_pulses + kBlockSize - 1) / kBlockSize;
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
        const std::uint64_t pulses =
            std::min(kBlockSize, cfg.num_pulses - b * kBlockSize);
        total.merge(simulate_block(cfg, b, pulses, eta, pe_fraction));
    }

    SimResult r;
    r.config_hash = config_hash(cfg);
    r.seed = cfg.seed;
    r.num_pulses = cfg.num_pulses;
    r.emitted_vacuum = total.emitted_vacuum;
    r.emitted_single = total.emitted_single;
    r.emitted_multi = total.emitted_multi;
    r.detected = total.detected;
    r.multi_detected = total.multi_detected;
    r.dark_only_detections = total.dark_only;
    r.sifted = total.sifted;
    r.sifted_errors = total.sifted_errors;
    r.pe_bits = total.pe_bits;
    r.pe_errors = total.pe_errors;
    r.key_bits = total.sifted - total.pe_bits;

    const auto nd = static_cast<double>(cfg.num_pulses);
    r.empirical_p_det = static_cast<double>(r.detected) / nd;
    r.empirical_p_m_among_emissions = static_cast<double>(r.emitted_multi) / nd;
    r.no_detections = r.detected == 0;
    r.empirical_qber =
        r.pe_bits > 0 ? static_cast<double>(r.pe_errors) / static_cast<double>(r.pe_bits) : 0.0;
    r.empirical_a = r.detected > 0
                        ? static_cast<double>(r.detected - r.multi_detected) /
                              static_cast<double>(r.detected)
                        : 0.0;

    // Finite key from the empirical run: block sizes, QBER and multi-photon
    // statistics all taken from the counts.
    if (r.key_bits >= 1 && r.pe_bits >= 1 && r.empirical_qber < 0.5) {
        finitekey::ProtocolParams emp = cfg.params;
        emp.n = r.key_bits;
        emp.m = r.pe_bits;
        emp.e = r.empirical_qber;
        const double p_m_emp =
            cfg.analysis.pm_mode == link::MultiphotonAccounting::detected
                ? static_cast<double>(r.multi_detected) / nd
                : cfg.src.p_m;
        r.empirical_finite_key =
            finitekey::evaluate(emp, r.empirical_p_det, p_m_emp, cfg.src.r_s, cfg.analysis.fk);
        r.final_key_bits = r.empirical_finite_key.s_finite * nd;
    }

    r.comparison = compare_to_analytic(r, analytic_prediction(cfg));
    return r;
}

namespace {

double binomial_z(std::uint64_t count, std::uint64_t trials, double p) {
    if (trials == 0) return 0.0;
    const double expectation = static_cast<double>(trials) * p;
    const double var = expectation * (1.0 - p);
    if (var <= 0.0) {
        return static_cast<double>(count) == expectation ? 0.0
               : std::numeric_limits<double>::infinity();
    }
    return (static_cast<double>(count) - expectation) / std::sqrt(var);
}

}  // namespace

ComparisonReport compare_to_analytic(const SimResult& result, const AnalyticPrediction& analytic) {
    if (result.config_hash != analytic.config_hash) {
        throw std::invalid_argument(
            "compare_to_analytic: config hash mismatch between simulation and analytic reference");
    }

    ComparisonReport c;
    c.p_det_analytic = analytic.kr.p_det;
    c.p_det_empirical = result.empirical_p_det;
    c.z_p_det = binomial_z(result.detected, result.num_pulses, analytic.kr.p_det);

    c.qber_analytic = analytic.e_eff;
    c.qber_empirical = result.empirical_qber;
    c.z_qber = binomial_z(result.pe_errors, result.pe_bits, analytic.e_eff);

    c.s_analytic = analytic.kr.s_finite;
    // Secret fraction with the analytic block-size terms (q, e_tilde, delta,
    // EC leak) but the empirical multi-photon correction. The fixed terms are
    // recovered from the identity raw = q A (1 - h(min(et/A, 0.5))) - fixed.
    const double p_m_emp = static_cast<double>(result.multi_detected) /
                           static_cast<double>(result.num_pulses);
    const double a_emp =
        result.empirical_p_det > 0.0
            ? std::max(0.0, (result.empirical_p_det - p_m_emp) / result.empirical_p_det)
            : 0.0;
    const double q = analytic.kr.q_ratio;
    const double et = analytic.kr.e_tilde;
    const double a_ana = analytic.kr.a_corr;
    const double h_ana =
        a_ana > 0.0 ? finitekey::binary_entropy(std::min(et / a_ana, 0.5)) : 0.0;
    const double fixed_terms = q * a_ana * (1.0 - h_ana) - analytic.kr.raw_s;
    double raw_emp = -fixed_terms;
    if (a_emp > 0.0) {
        const double h_emp = finitekey::binary_entropy(std::min(et / a_emp, 0.5));
        raw_emp = q * a_emp * (1.0 - h_emp) - fixed_terms;
    }
    c.s_empirical = std::max(raw_emp, 0.0);

    const double denom = std::max(std::abs(c.s_analytic), std::abs(c.s_empirical));
    c.s_rel_diff = denom > 0.0 ? std::abs(c.s_analytic - c.s_empirical) / denom : 0.0;

    c.pass_p_det = std::abs(c.z_p_det) < 3.0;
    c.pass_qber = std::abs(c.z_qber) < 3.0;
    c.pass_secret = c.s_rel_diff < 0.05;
    c.all_pass = c.pass_p_det && c.pass_qber && c.pass_secret;
    return c;
}

}  // namespace spsqkd::sim
