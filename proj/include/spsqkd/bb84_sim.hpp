#pragma once

#include <cstdint>

#include "spsqkd/finitekey.hpp"
#include "spsqkd/link_model.hpp"

namespace spsqkd::sim {

struct SimConfig {
    link::SourceModel src;
    link::ChannelModel ch;
    finitekey::ProtocolParams params;
    std::uint64_t num_pulses = 0;  // >= 1e4
    std::uint64_t seed = 0;        // fully determines the run
    link::AnalysisOptions analysis;

    void validate() const;
};

// Hash over every run-determining field (model parameters, pulse count, seed,
// analysis flags). Stable across platforms; embedded in results so stale
// analytic references are rejected.
std::uint64_t config_hash(const SimConfig& cfg);

// Analytic reference for one simulated configuration.
struct AnalyticPrediction {
    finitekey::KeyRateResult kr;
    double e_eff = 0.0;  // expected QBER including dark-count random bits
    std::uint64_t config_hash = 0;
};

AnalyticPrediction analytic_prediction(const SimConfig& cfg);

struct ComparisonReport {
    double p_det_analytic = 0.0, p_det_empirical = 0.0, z_p_det = 0.0;
    double qber_analytic = 0.0, qber_empirical = 0.0, z_qber = 0.0;
    // Secret fraction at the protocol block sizes, fed with empirical vs
    // analytic detection/multi-photon statistics.
    double s_analytic = 0.0, s_empirical = 0.0, s_rel_diff = 0.0;
    bool pass_p_det = false;   // |z| < 3
    bool pass_qber = false;    // |z| < 3
    bool pass_secret = false;  // relative difference < 5%
    bool all_pass = false;
};

struct SimResult {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::uint64_t num_pulses = 0;

    std::uint64_t emitted_vacuum = 0;
    std::uint64_t emitted_single = 0;
    std::uint64_t emitted_multi = 0;

    std::uint64_t detected = 0;
    std::uint64_t multi_detected = 0;      // detections from multi-photon pulses
    std::uint64_t dark_only_detections = 0;

    std::uint64_t sifted = 0;
    std::uint64_t sifted_errors = 0;
    std::uint64_t pe_bits = 0;    // parameter-estimation sample
    std::uint64_t pe_errors = 0;
    std::uint64_t key_bits = 0;   // sifted - pe_bits

    double empirical_p_det = 0.0;
    double empirical_qber = 0.0;  // on the PE sample
    double empirical_p_m_among_emissions = 0.0;
    double empirical_a = 0.0;     // (detected - multi_detected) / detected
    bool no_detections = false;

    // Finite-key evaluation at the empirical block sizes (n = key_bits,
    // m = pe_bits) with the empirical QBER and detection statistics.
    finitekey::KeyRateResult empirical_finite_key;
    double final_key_bits = 0.0;  // s_finite * num_pulses

    ComparisonReport comparison;
};

// Seeded Monte Carlo of the BB84 link. Per pulse, in fixed draw order:
//   1. photon class from {p0, p1, p_m} (multi-photon simulated as 2 photons)
//   2. per-photon survival with eta = eta_ch * eta_det
//   3. dark count with p_dark
//   4. basis match (probability 0.5) for clicked pulses
//   5. bit errors: photon clicks flip with probability e; two surviving
//      photons are squashed (conflicting results give a random bit);
//      dark-only clicks give a random bit
//   6. PE-sample assignment with probability m / (n + m)
// Pulses run in blocks of 65536 with streams derived from (seed, block), so
// results are bit-identical regardless of execution order or thread count.
SimResult simulate(const SimConfig& cfg);

// z-scores for P_det and QBER (3 sigma gates) plus the secret-fraction
// comparison (5% gate). Throws std::invalid_argument when the prediction's
// config hash does not match the result's.
ComparisonReport compare_to_analytic(const SimResult& result, const AnalyticPrediction& analytic);

}  // namespace spsqkd::sim
