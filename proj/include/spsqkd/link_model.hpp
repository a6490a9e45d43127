#pragma once

#include <span>
#include <vector>

#include "spsqkd/finitekey.hpp"

namespace spsqkd::link {

// Per-pulse photon-number behaviour of the source. The multi-photon bucket is
// treated as exactly two photons for loss propagation; the remainder
// p0 = 1 - p1 - p_m is vacuum.
struct SourceModel {
    double p1 = 0.0;       // exactly one photon per trigger
    double p_m = 0.0;      // multi-photon emission probability
    double r_s = 1.0;      // repetition rate, pulses/s
    double g2_zero = 0.0;  // measured g2(0), informational only

    void validate() const;
    double p0() const { return 1.0 - p1 - p_m; }
};

struct ChannelModel {
    double alpha_db_per_km = 0.0;
    double distance_km = 0.0;
    double eta_det = 1.0;  // detector efficiency
    double p_dark = 0.0;   // dark-count probability per gate

    void validate() const;
};

// Fibre transmittance 10^(-alpha d / 10).
double transmittance(double alpha_db_per_km, double distance_km);

// Probability of at least one click per pulse, photon losses and dark counts
// included:
//   eta = eta_ch * eta_det
//   P_noclick = p0 + p1 (1-eta) + p_m (1-eta)^2
//   P_det = 1 - P_noclick (1 - p_dark)
double detection_probability(const SourceModel& src, const ChannelModel& ch);

// Source-side multi-photon probability, unchanged by the channel (the
// conservative tagged-pulse bound: a multi-photon emission is insecure whether
// or not its photons survive).
double multiphoton_probability_after_channel(const SourceModel& src, const ChannelModel& ch);

// Probability that a pulse is multi-photon AND produces a click:
// p_m (1 - (1-eta)^2 (1 - p_dark)). This is the multi-photon fraction actually
// present among detections.
double detected_multiphoton_probability(const SourceModel& src, const ChannelModel& ch);

// QBER including dark-count contributions: dark-only clicks carry a random
// bit, so e_eff = (e P_click_photonic + 0.5 P_dark_only) / P_det.
double effective_qber(double intrinsic_e, const SourceModel& src, const ChannelModel& ch);

enum class MultiphotonAccounting {
    source_side,  // A uses the source P_m unchanged
    detected,     // A uses the detected multi-photon probability
};

struct AnalysisOptions {
    finitekey::Options fk;
    MultiphotonAccounting pm_mode = MultiphotonAccounting::detected;
    bool dark_qber = true;  // grow the QBER with dark counts
};

// One operating point: transmittance -> detection -> finite-key chain.
finitekey::KeyRateResult link_budget(const finitekey::ProtocolParams& params,
                                     const SourceModel& src, const ChannelModel& ch,
                                     const AnalysisOptions& opts = {});

struct SweepPoint {
    double distance_km = 0.0;
    finitekey::KeyRateResult kr;
};

// Key rate versus distance. `distances` must be non-empty, non-negative and
// strictly increasing; zero-key points are results, not errors. Output order
// follows the input distances.
std::vector<SweepPoint> keyrate_curve(const finitekey::ProtocolParams& params,
                                      const SourceModel& src,
                                      const ChannelModel& ch_template,
                                      std::span<const double> distances,
                                      const AnalysisOptions& opts = {});

// Ratio of two fitted saturation count rates (SIL enhancement, fibre-coupling
// efficiency). Throws on non-positive inputs.
double sil_enhancement(double i_sat_numerator, double i_sat_denominator);

}  // namespace spsqkd::link
