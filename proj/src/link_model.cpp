#include "spsqkd/link_model.hpp"

#include <cmath>
#include <stdexcept>

namespace spsqkd::link {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

struct ClickProbabilities {
    double p_click_photonic = 0.0;  // at least one photon arrives
    double p_dark_only = 0.0;       // no photon, dark count fires
    double p_det = 0.0;             // any click
};

ClickProbabilities click_probabilities(const SourceModel& src, const ChannelModel& ch) {
    const double eta = transmittance(ch.alpha_db_per_km, ch.distance_km) * ch.eta_det;
    const double miss = 1.0 - eta;
    const double p_noclick = src.p0() + src.p1 * miss + src.p_m * miss * miss;
    ClickProbabilities out;
    out.p_click_photonic = 1.0 - p_noclick;
    out.p_dark_only = p_noclick * ch.p_dark;
    out.p_det = 1.0 - p_noclick * (1.0 - ch.p_dark);
    return out;
}

}  // namespace

void SourceModel::validate() const {
    require(p1 >= 0.0 && p1 <= 1.0, "p1 must be in [0, 1]");
    require(p_m >= 0.0 && p_m <= 1.0, "p_m must be in [0, 1]");
    require(p1 + p_m <= 1.0, "p1 + p_m must not exceed 1");
    require(r_s > 0.0, "repetition rate must be > 0");
}

void ChannelModel::validate() const {
    require(alpha_db_per_km >= 0.0, "fibre attenuation must be >= 0");
    require(distance_km >= 0.0, "distance must be >= 0");
    require(eta_det > 0.0 && eta_det <= 1.0, "detector efficiency must be in (0, 1]");
    require(p_dark >= 0.0 && p_dark < 1.0, "dark-count probability must be in [0, 1)");
}

double transmittance(double alpha_db_per_km, double distance_km) {
    require(alpha_db_per_km >= 0.0, "fibre attenuation must be >= 0");
    require(distance_km >= 0.0, "distance must be >= 0");
    return std::pow(10.0, -alpha_db_per_km * distance_km / 10.0);
}

double detection_probability(const SourceModel& src, const ChannelModel& ch) {
    src.validate();
    ch.validate();
    return click_probabilities(src, ch).p_det;
}

double multiphoton_probability_after_channel(const SourceModel& src, const ChannelModel& ch) {
    src.validate();
    ch.validate();
    return src.p_m;
}

double detected_multiphoton_probability(const SourceModel& src, const ChannelModel& ch) {
    src.validate();
    ch.validate();
    const double eta = transmittance(ch.alpha_db_per_km, ch.distance_km) * ch.eta_det;
    const double miss = 1.0 - eta;
    return src.p_m * (1.0 - miss * miss * (1.0 - ch.p_dark));
}

double effective_qber(double intrinsic_e, const SourceModel& src, const ChannelModel& ch) {
    require(intrinsic_e >= 0.0 && intrinsic_e < 0.5, "intrinsic QBER must be in [0, 0.5)");
    src.validate();
    ch.validate();
    const ClickProbabilities p = click_probabilities(src, ch);
    if (p.p_det <= 0.0) return intrinsic_e;
    return (intrinsic_e * p.p_click_photonic + 0.5 * p.p_dark_only) / p.p_det;
}

finitekey::KeyRateResult link_budget(const finitekey::ProtocolParams& params,
                                     const SourceModel& src, const ChannelModel& ch,
                                     const AnalysisOptions& opts) {
    params.validate();
    src.validate();
    ch.validate();

    const double p_det = detection_probability(src, ch);
    const double p_m = opts.pm_mode == MultiphotonAccounting::detected
                           ? detected_multiphoton_probability(src, ch)
                           : multiphoton_probability_after_channel(src, ch);

    finitekey::ProtocolParams point = params;
    if (opts.dark_qber) {
        point.e = std::min(effective_qber(params.e, src, ch), 0.4999999999);
    }
    return finitekey::evaluate(point, p_det, p_m, src.r_s, opts.fk);
}

std::vector<SweepPoint> keyrate_curve(const finitekey::ProtocolParams& params,
                                      const SourceModel& src,
                                      const ChannelModel& ch_template,
                                      std::span<const double> distances,
                                      const AnalysisOptions& opts) {
    require(!distances.empty(), "distance list must not be empty");
    for (std::size_t i = 0; i < distances.size(); ++i) {
        require(distances[i] >= 0.0, "distances must be non-negative");
        if (i > 0) require(distances[i] > distances[i - 1], "distances must be strictly increasing");
    }

    std::vector<SweepPoint> out;
    out.reserve(distances.size());
    for (double d : distances) {
        ChannelModel ch = ch_template;
        ch.distance_km = d;
        out.push_back({d, link_budget(params, src, ch, opts)});
    }
    return out;
}

double sil_enhancement(double i_sat_numerator, double i_sat_denominator) {
    require(i_sat_numerator > 0.0 && i_sat_denominator > 0.0,
            "saturated count rates must be positive");
    return i_sat_numerator / i_sat_denominator;
}

}  // namespace spsqkd::link
