#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "spsqkd/link_model.hpp"
#include "spsqkd/rng.hpp"

using namespace spsqkd;

namespace {

finitekey::ProtocolParams fig4_params() {
    finitekey::ProtocolParams p;
    p.n = 1'000'000;
    p.m = 500'000;
    p.f_ec = 1.1;
    p.e = 0.02;
    p.eps = finitekey::split_epsilon(1e-10);
    return p;
}

link::SourceModel fig4_source() {
    link::SourceModel s;
    s.p1 = 0.5;
    s.p_m = 0.07;
    s.r_s = 2e7;
    s.g2_zero = 0.07;
    return s;
}

link::ChannelModel fig4_channel(double d) {
    link::ChannelModel c;
    c.alpha_db_per_km = 3.5;
    c.distance_km = d;
    c.eta_det = 0.6;
    c.p_dark = 1e-6;
    return c;
}

}  // namespace

TEST_SUITE("link_model") {

TEST_CASE("transmittance: frozen values") {
    CHECK(link::transmittance(3.5, 0.0) == 1.0);
    CHECK(link::transmittance(3.5, 2.0) == doctest::Approx(0.19952623149688797).epsilon(1e-12));
    CHECK(link::transmittance(3.5, 8.0) == doctest::Approx(1.584893192461114e-3).epsilon(1e-12));
    CHECK_THROWS_AS(link::transmittance(-1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(link::transmittance(3.5, -1.0), std::invalid_argument);
}

TEST_CASE("transmittance: multiplicative and strictly decreasing") {
    rng::Xoshiro256 r(21);
    for (int i = 0; i < 500; ++i) {
        const double alpha = 5.0 * r.next_double();
        const double d1 = 10.0 * r.next_double();
        const double d2 = 10.0 * r.next_double();
        const double joint = link::transmittance(alpha, d1 + d2);
        const double split = link::transmittance(alpha, d1) * link::transmittance(alpha, d2);
        CHECK(std::abs(joint - split) <= 1e-12 * std::max(joint, split));
    }
    double prev = link::transmittance(3.5, 0.0);
    for (double d = 0.5; d < 20.0; d += 0.5) {
        const double cur = link::transmittance(3.5, d);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("detection_probability: limits and frozen example") {
    link::SourceModel ideal;
    ideal.p1 = 1.0;
    ideal.p_m = 0.0;
    ideal.r_s = 1e6;
    link::ChannelModel lossless;
    lossless.alpha_db_per_km = 0.0;
    lossless.distance_km = 0.0;
    lossless.eta_det = 1.0;
    lossless.p_dark = 0.0;
    CHECK(link::detection_probability(ideal, lossless) == 1.0);

    // opaque channel, no dark counts
    auto opaque = fig4_channel(1e5);
    opaque.p_dark = 0.0;
    CHECK(link::detection_probability(fig4_source(), opaque) == 0.0);

    // eta = 0.1 spec example: p0 = 0.43, p1 = 0.5, p_m = 0.07, p_dark = 1e-6
    link::SourceModel src = fig4_source();
    link::ChannelModel ch;
    ch.alpha_db_per_km = 10.0;  // eta_ch = 0.1 at 1 km
    ch.distance_km = 1.0;
    ch.eta_det = 1.0;
    ch.p_dark = 1e-6;
    const double p = link::detection_probability(src, ch);
    CHECK(p == doctest::Approx(0.06330093670000003).epsilon(1e-9));
    CHECK(p == doctest::Approx(0.0634).epsilon(2.5e-3));
}

TEST_CASE("detection_probability: monotone in every efficiency knob") {
    rng::Xoshiro256 r(22);
    for (int i = 0; i < 300; ++i) {
        link::SourceModel s;
        s.p1 = 0.4 * r.next_double();
        s.p_m = 0.2 * r.next_double();
        s.r_s = 1e6;
        link::ChannelModel c;
        c.alpha_db_per_km = 0.5 + 4.0 * r.next_double();
        c.distance_km = 5.0 * r.next_double();
        c.eta_det = 0.2 + 0.7 * r.next_double();
        c.p_dark = 1e-6 * r.next_double();
        const double base = link::detection_probability(s, c);

        auto c2 = c;
        c2.distance_km *= 0.9;  // higher eta_ch
        CHECK(link::detection_probability(s, c2) >= base);
        c2 = c;
        c2.eta_det = std::min(1.0, c.eta_det + 0.05);
        CHECK(link::detection_probability(s, c2) >= base);
        c2 = c;
        c2.p_dark = c.p_dark + 1e-6;
        CHECK(link::detection_probability(s, c2) >= base);
        auto s2 = s;
        s2.p1 = std::min(1.0 - s.p_m, s.p1 + 0.05);
        CHECK(link::detection_probability(s2, c) >= base);
        s2 = s;
        s2.p_m = std::min(1.0 - s.p1, s.p_m + 0.05);
        CHECK(link::detection_probability(s2, c) >= base);
    }
}

TEST_CASE("detection_probability agrees with direct Monte Carlo sampling") {
    const auto src = fig4_source();
    const auto ch = fig4_channel(2.0);
    const double p = link::detection_probability(src, ch);
    const double eta = link::transmittance(ch.alpha_db_per_km, ch.distance_km) * ch.eta_det;

    rng::Xoshiro256 r(23);
    const int n = 1'000'000;
    int clicks = 0;
    for (int i = 0; i < n; ++i) {
        const double u = r.next_double();
        int photons = 0;
        if (u >= src.p0()) photons = u < src.p0() + src.p1 ? 1 : 2;
        int survivors = 0;
        for (int k = 0; k < photons; ++k) {
            if (r.next_bernoulli(eta)) ++survivors;
        }
        if (survivors > 0 || r.next_bernoulli(ch.p_dark)) ++clicks;
    }
    const double sigma = std::sqrt(p * (1.0 - p) / n);
    CHECK(std::abs(clicks / static_cast<double>(n) - p) < 3.0 * sigma);
}

TEST_CASE("multiphoton_probability_after_channel is channel-independent") {
    const auto src = fig4_source();
    CHECK(link::multiphoton_probability_after_channel(src, fig4_channel(0.0)) == 0.07);
    CHECK(link::multiphoton_probability_after_channel(src, fig4_channel(2.0)) == 0.07);
    CHECK(link::multiphoton_probability_after_channel(src, fig4_channel(50.0)) == 0.07);
    auto pure = src;
    pure.p_m = 0.0;
    CHECK(link::multiphoton_probability_after_channel(pure, fig4_channel(2.0)) == 0.0);
}

TEST_CASE("detected_multiphoton_probability") {
    const auto src = fig4_source();
    const auto ch = fig4_channel(2.0);
    const double eta = link::transmittance(3.5, 2.0) * 0.6;
    const double expected = 0.07 * (1.0 - (1.0 - eta) * (1.0 - eta) * (1.0 - 1e-6));
    CHECK(link::detected_multiphoton_probability(src, ch) ==
          doctest::Approx(expected).epsilon(1e-14));
    CHECK(link::detected_multiphoton_probability(src, ch) <= src.p_m);

    link::ChannelModel unity;
    unity.alpha_db_per_km = 0.0;
    unity.distance_km = 0.0;
    unity.eta_det = 1.0;
    unity.p_dark = 0.0;
    CHECK(link::detected_multiphoton_probability(src, unity) ==
          doctest::Approx(0.07).epsilon(1e-14));
}

TEST_CASE("effective_qber: limits and monotone growth") {
    const auto src = fig4_source();
    // negligible dark counts at zero distance
    CHECK(link::effective_qber(0.02, src, fig4_channel(0.0)) ==
          doctest::Approx(0.02).epsilon(1e-4));
    // dark-dominated: all clicks are random bits
    auto dead = fig4_channel(1e4);
    CHECK(link::effective_qber(0.02, src, dead) == doctest::Approx(0.5).epsilon(1e-6));
    double prev = 0.0;
    for (double d = 0.0; d < 20.0; d += 0.5) {
        const double cur = link::effective_qber(0.02, src, fig4_channel(d));
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("keyrate_curve: published parameter set") {
    const auto params = fig4_params();
    const auto src = fig4_source();
    std::vector<double> ds;
    for (double d = 0.0; d <= 15.0; d += 0.25) ds.push_back(d);
    const auto curve = link::keyrate_curve(params, src, fig4_channel(0.0), ds);
    REQUIRE(curve.size() == ds.size());

    // frozen oracle values for the default analysis mode
    CHECK(curve[0].kr.k_rate == doctest::Approx(537226.0651845222).epsilon(1e-9));
    CHECK(curve[0].kr.p_det == doctest::Approx(0.3588006412).epsilon(1e-12));
    CHECK(curve[0].kr.k_rate > 1e5);
    CHECK(curve[0].kr.k_rate < 1e7);

    // monotone non-increasing, zero tail past the cutoff
    bool seen_zero = false;
    double cutoff = -1.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].kr.k_rate <= curve[i - 1].kr.k_rate + 1e-9);
        if (!seen_zero && curve[i].kr.k_rate == 0.0) {
            seen_zero = true;
            cutoff = curve[i].distance_km;
        }
        if (seen_zero) CHECK(curve[i].kr.k_rate == 0.0);
    }
    REQUIRE(seen_zero);
    CHECK(cutoff > 4.0);   // within a factor of 2 of the published ~8 km
    CHECK(cutoff < 16.0);
    CHECK(cutoff == doctest::Approx(8.75).epsilon(1e-12));  // frozen, 0.25 km grid
}

TEST_CASE("keyrate_curve: ideal link at d = 0 approaches q A R_s") {
    finitekey::ProtocolParams p;
    p.n = static_cast<std::uint64_t>(1e18);
    p.m = static_cast<std::uint64_t>(1e18);
    p.f_ec = 1.0;
    p.e = 0.0;
    p.eps = finitekey::split_epsilon(1e-10);
    link::SourceModel src;
    src.p1 = 1.0;
    src.p_m = 0.0;
    src.r_s = 2e7;
    link::ChannelModel ch;
    ch.alpha_db_per_km = 3.5;
    ch.distance_km = 0.0;
    ch.eta_det = 1.0;
    ch.p_dark = 0.0;
    const std::vector<double> d0{0.0};
    const auto curve = link::keyrate_curve(p, src, ch, d0);
    const double expected = p.q_ratio() * 1.0 * 2e7;  // q A R_s
    CHECK(curve[0].kr.k_rate == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("keyrate_curve: conservative source-side mode dies early") {
    const auto params = fig4_params();
    const auto src = fig4_source();
    link::AnalysisOptions conservative;
    conservative.pm_mode = link::MultiphotonAccounting::source_side;
    conservative.dark_qber = false;
    std::vector<double> ds{0.0, 0.5, 1.0, 2.0, 3.0};
    const auto curve = link::keyrate_curve(params, src, fig4_channel(0.0), ds, conservative);
    CHECK(curve[0].kr.k_rate > 0.0);
    CHECK(curve[1].kr.k_rate == 0.0);  // the tagged-fraction bound collapses fast
    CHECK(curve[3].kr.k_rate == 0.0);
    // by 3 km every detection may be multi-photon: p_det < source P_m
    CHECK(curve[4].kr.a_corr == 0.0);
    CHECK(curve[4].kr.zero_correction);
}

TEST_CASE("keyrate_curve: input validation") {
    const auto params = fig4_params();
    const auto src = fig4_source();
    const auto ch = fig4_channel(0.0);
    CHECK_THROWS_AS(link::keyrate_curve(params, src, ch, std::vector<double>{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(link::keyrate_curve(params, src, ch, std::vector<double>{-1.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(link::keyrate_curve(params, src, ch, std::vector<double>{1.0, 1.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(link::keyrate_curve(params, src, ch, std::vector<double>{2.0, 1.0}),
                    std::invalid_argument);
}

TEST_CASE("sil_enhancement: published ratios") {
    CHECK(link::sil_enhancement(1.05e7, 1.67e6) == doctest::Approx(6.287425149700598).epsilon(1e-12));
    CHECK(link::sil_enhancement(1.05e7, 1.67e6) == doctest::Approx(6.29).epsilon(1e-3));
    CHECK(link::sil_enhancement(5.0, 5.0) == 1.0);
    // SMF coupling efficiency: same ratio with the fibre rate on top
    CHECK(link::sil_enhancement(2.43e5, 5.46e5) == doctest::Approx(0.44505494505494503).epsilon(1e-12));
    CHECK_THROWS_AS(link::sil_enhancement(0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(link::sil_enhancement(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("model validation") {
    auto src = fig4_source();
    src.p1 = 0.95;  // p1 + p_m > 1
    CHECK_THROWS_AS(src.validate(), std::invalid_argument);
    src = fig4_source();
    src.r_s = 0.0;
    CHECK_THROWS_AS(src.validate(), std::invalid_argument);
    auto ch = fig4_channel(1.0);
    ch.eta_det = 0.0;
    CHECK_THROWS_AS(ch.validate(), std::invalid_argument);
    ch = fig4_channel(1.0);
    ch.p_dark = 1.0;
    CHECK_THROWS_AS(ch.validate(), std::invalid_argument);
}

}  // TEST_SUITE
