#include "spsqkd/finitekey.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace spsqkd::finitekey {

namespace {

constexpr double kLn2 = 0.6931471805599453;

// log2 via natural-log ratio; all magnitudes here are fine in double.
double log2x(double x) { return std::log(x) / kLn2; }

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void EpsilonBudget::validate() const {
    for (double c : {smooth, pa, ec, pe}) {
        require(c > 0.0 && c < 1.0, "epsilon component must be in (0, 1)");
    }
    require(total > 0.0 && total < 1.0, "eps_total must be in (0, 1)");
    const double sum = smooth + pa + ec + pe;
    require(std::abs(sum - total) <= 1e-12 * total,
            "epsilon components must sum to eps_total within 1e-12 relative");
}

EpsilonBudget split_epsilon(double eps_total) {
    return split_epsilon(eps_total, {0.25, 0.25, 0.25, 0.25});
}

EpsilonBudget split_epsilon(double eps_total, const std::array<double, 4>& weights) {
    require(eps_total > 0.0 && eps_total < 1.0, "eps_total must be in (0, 1)");
    double wsum = 0.0;
    for (double w : weights) {
        require(w > 0.0, "epsilon weights must be positive");
        wsum += w;
    }
    require(std::abs(wsum - 1.0) <= 1e-12, "epsilon weights must sum to 1");
    EpsilonBudget b;
    b.total = eps_total;
    b.smooth = weights[0] * eps_total;
    b.pa = weights[1] * eps_total;
    b.ec = weights[2] * eps_total;
    b.pe = weights[3] * eps_total;
    return b;
}

void ProtocolParams::validate() const {
    require(n >= 1, "n must be >= 1");
    require(m >= 1, "m must be >= 1");
    require(f_ec >= 1.0, "f_EC must be >= 1");
    require(e >= 0.0 && e < 0.5, "QBER e must be in [0, 0.5)");
    eps.validate();
}

double ProtocolParams::q_ratio() const {
    return 0.5 * static_cast<double>(n) / static_cast<double>(n + m);
}

double binary_entropy(double x) {
    if (!(x >= 0.0 && x <= 1.0)) {
        throw std::domain_error("binary_entropy: argument outside [0, 1]");
    }
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * log2x(x) - (1.0 - x) * log2x(1.0 - x);
}

double qber_upper_bound(double e, std::uint64_t m, double eps_pe) {
    require(m >= 1, "m must be >= 1");
    require(e >= 0.0 && e < 0.5, "e must be in [0, 0.5)");
    require(eps_pe > 0.0 && eps_pe < 1.0, "eps_pe must be in (0, 1)");
    const double xi = std::sqrt(std::log(2.0 / eps_pe) / (2.0 * static_cast<double>(m)));
    return std::min(e + xi, 0.5);
}

double finite_size_delta(std::uint64_t n, double eps_smooth, double eps_pa) {
    require(n >= 1, "n must be >= 1");
    require(eps_smooth > 0.0 && eps_smooth < 1.0, "eps_smooth must be in (0, 1)");
    require(eps_pa > 0.0 && eps_pa < 1.0, "eps_pa must be in (0, 1)");
    const double nd = static_cast<double>(n);
    return 7.0 * std::sqrt(log2x(2.0 / eps_smooth) / nd) + (2.0 / nd) * log2x(1.0 / eps_pa);
}

double multiphoton_correction(double p_det, double p_m) {
    if (!(p_det > 0.0 && p_det <= 1.0)) {
        throw std::domain_error(
            "multiphoton_correction: no detections (p_det must be in (0, 1])");
    }
    if (!(p_m >= 0.0 && p_m <= p_det)) {
        throw std::domain_error(
            "multiphoton_correction: p_m must be in [0, p_det]");
    }
    return (p_det - p_m) / p_det;
}

SecretFraction secret_fraction(const ProtocolParams& params, double a_corr,
                               double e_tilde, double delta_n, const Options& opts) {
    params.validate();
    require(a_corr >= 0.0 && a_corr <= 1.0, "A must be in [0, 1]");
    require(e_tilde >= 0.0 && e_tilde <= 0.5, "e_tilde must be in [0, 0.5]");
    require(delta_n >= 0.0, "delta_n must be >= 0");

    const double q = params.q_ratio();
    const double leak_scale = opts.ec_leak_scaled_by_q ? q : 1.0;
    const double leak = leak_scale * params.f_ec * binary_entropy(params.e);

    SecretFraction out;
    if (a_corr == 0.0) {
        // Division by A short-circuited: every detection may be multi-photon,
        // no entropy term survives.
        out.zero_correction = true;
        out.raw_s = -leak - delta_n;
    } else {
        double arg = e_tilde / a_corr;
        if (arg >= 0.5) {
            out.entropy_saturated = true;
            arg = 0.5;
        }
        out.raw_s = q * a_corr * (1.0 - binary_entropy(arg)) - leak - delta_n;
    }
    out.s_finite = std::max(out.raw_s, 0.0);
    return out;
}

double key_rate(double s_finite, double r_s) {
    require(s_finite >= 0.0, "s_finite must be >= 0");
    require(r_s > 0.0, "repetition rate must be > 0");
    return s_finite * r_s;
}

KeyRateResult evaluate(const ProtocolParams& params, double p_det, double p_m,
                       double r_s, const Options& opts) {
    params.validate();
    require(p_det >= 0.0 && p_det <= 1.0, "p_det must be in [0, 1]");
    require(p_m >= 0.0 && p_m <= 1.0, "p_m must be in [0, 1]");
    require(r_s > 0.0, "repetition rate must be > 0");

    KeyRateResult r;
    r.p_det = p_det;
    r.p_m = p_m;
    r.e_used = params.e;
    r.q_ratio = params.q_ratio();
    r.e_tilde = qber_upper_bound(params.e, params.m, params.eps.pe);
    r.delta_n = opts.delta ? opts.delta(params.n, params.eps.smooth, params.eps.pa)
                           : finite_size_delta(params.n, params.eps.smooth, params.eps.pa);

    if (p_det <= 0.0) {
        r.no_detections = true;
        r.a_corr = 0.0;
    } else if (p_m >= p_det) {
        // Invalid regime for the bound: treat as fully tagged.
        r.a_corr = 0.0;
    } else {
        r.a_corr = multiphoton_correction(p_det, p_m);
    }

    const SecretFraction s = secret_fraction(params, r.a_corr, r.e_tilde, r.delta_n, opts);
    r.raw_s = s.raw_s;
    r.s_finite = s.s_finite;
    r.zero_correction = s.zero_correction;
    r.entropy_saturated = s.entropy_saturated;
    r.k_rate = key_rate(r.s_finite, r_s);
    return r;
}

}  // namespace spsqkd::finitekey
