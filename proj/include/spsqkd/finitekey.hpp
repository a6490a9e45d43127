#pragma once

#include <array>
#include <cstdint>
#include <functional>

namespace spsqkd::finitekey {

// Failure-probability budget for the finite-key bound. All components live in
// (0, 1) and must re-sum to `total` within 1e-12 relative.
struct EpsilonBudget {
    double total = 0.0;
    double smooth = 0.0;  // smoothing parameter of the smooth min-entropy
    double pa = 0.0;      // privacy amplification
    double ec = 0.0;      // error correction
    double pe = 0.0;      // parameter estimation
    void validate() const;
};

// Split a total failure probability into the four components.
// The default policy is equal quarters; `weights` must sum to 1 within 1e-12.
EpsilonBudget split_epsilon(double eps_total);
EpsilonBudget split_epsilon(double eps_total, const std::array<double, 4>& weights);

// Security and post-processing parameters of one protocol run.
struct ProtocolParams {
    std::uint64_t n = 0;  // bits kept for classical post-processing
    std::uint64_t m = 0;  // bits sacrificed for parameter estimation
    double f_ec = 1.0;    // reconciliation inefficiency, >= 1
    double e = 0.0;       // true QBER, in [0, 0.5)
    EpsilonBudget eps;

    void validate() const;
    // Ratio of remaining bits after parameter estimation to all measured bits,
    // 0.5 n / (n + m); the 0.5 is basis sifting.
    double q_ratio() const;
};

// Binary entropy h(x) = -x log2 x - (1-x) log2(1-x), with h(0) = h(1) = 0.
// Throws std::domain_error outside [0, 1].
double binary_entropy(double x);

// One-sided Hoeffding upper confidence bound on the QBER estimated from m
// bits: e + sqrt(ln(2/eps_pe) / (2m)), capped at 0.5.
double qber_upper_bound(double e, std::uint64_t m, double eps_pe);

// Finite-size penalty on the extractable secret fraction:
// 7 sqrt(log2(2/eps_smooth)/n) + (2/n) log2(1/eps_pa). Vanishes as n grows.
double finite_size_delta(std::uint64_t n, double eps_smooth, double eps_pa);

// Multi-photon correction A = (p_det - p_m) / p_det. Throws std::domain_error
// when p_det is zero (no detections) or when p_m exceeds p_det.
double multiphoton_correction(double p_det, double p_m);

// Alternate finite-size penalties can be swapped in here.
using DeltaStrategy = std::function<double(std::uint64_t n, double eps_smooth, double eps_pa)>;

struct Options {
    // Scale the error-correction leak f_EC h(e) by q instead of applying it
    // unscaled. Off by default; recorded in report metadata.
    bool ec_leak_scaled_by_q = false;
    DeltaStrategy delta;  // empty -> finite_size_delta
};

struct SecretFraction {
    double raw_s = 0.0;      // value before clamping; negative means abort
    double s_finite = 0.0;   // max(raw_s, 0)
    bool zero_correction = false;    // A == 0, entropy term short-circuited
    bool entropy_saturated = false;  // e_tilde / A >= 0.5, entropy term saturated
};

// Secret bits per pulse:
//   raw_s = q A (1 - h(min(e_tilde/A, 0.5))) - f_EC h(e) - delta_n
SecretFraction secret_fraction(const ProtocolParams& params, double a_corr,
                               double e_tilde, double delta_n,
                               const Options& opts = {});

// K = S_finite * R_s, secret bits per second.
double key_rate(double s_finite, double r_s);

// Every intermediate of the finite-key evaluation for one operating point.
struct KeyRateResult {
    double p_det = 0.0;
    double p_m = 0.0;     // multi-photon probability used in A
    double e_used = 0.0;  // QBER fed into the bound
    double a_corr = 0.0;
    double q_ratio = 0.0;
    double e_tilde = 0.0;
    double delta_n = 0.0;
    double raw_s = 0.0;
    double s_finite = 0.0;
    double k_rate = 0.0;
    bool no_detections = false;
    bool zero_correction = false;
    bool entropy_saturated = false;
};

// Full chain: e_tilde, delta, A, secret fraction, key rate. Graceful at the
// edges: p_det == 0 reports no_detections, p_m >= p_det clamps A to 0 with the
// zero_correction diagnostic (zero-key regions are results, not errors).
KeyRateResult evaluate(const ProtocolParams& params, double p_det, double p_m,
                       double r_s, const Options& opts = {});

}  // namespace spsqkd::finitekey
