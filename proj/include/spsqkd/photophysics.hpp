#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace spsqkd::photo {

// Coincidence histogram from a Hanbury Brown-Twiss measurement under pulsed
// excitation. Bins are uniformly spaced; peaks sit at multiples of the pulse
// period.
struct HBTHistogram {
    std::vector<double> bin_centers;  // ns
    std::vector<double> counts;       // >= 0
    double rep_period_ns = 0.0;

    void validate() const;
    double bin_width() const;
};

struct BinnedCoincidences {
    HBTHistogram hist;
    std::uint64_t kept = 0;
    std::uint64_t dropped = 0;  // events outside [-window, +window]
};

// Histogram raw coincidence delays into a symmetric window around zero.
// Requires window/bin_width >= 8 and a non-empty event list; kept + dropped
// always equals the input size.
BinnedCoincidences bin_coincidences(std::span<const double> delays_ns,
                                    double bin_width_ns, double window_ns,
                                    double rep_period_ns);

struct PeakFit {
    double center_ns = 0.0;
    double amplitude = 0.0;
    double half_width_ns = 0.0;  // Lorentzian HWHM
    double area = 0.0;           // pi * amplitude * half_width
    double residual_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

struct G2FitResult {
    double g2_zero = 0.0;
    // Sample standard deviation of the side-peak areas relative to their mean.
    double g2_uncertainty = 0.0;
    double baseline = 0.0;  // global constant fitted from inter-peak valleys
    std::vector<PeakFit> peaks;  // ordered by center, zero-delay peak included
    double residual_norm = 0.0;
    int side_peaks_used = 0;  // per side
};

struct G2FitOptions {
    int side_peaks = 6;         // per side, reference-area average
    bool shared_width = false;  // fit one HWHM jointly across all peaks
};

// Pulsed g2(0): Lorentzian fit of every comb peak, g2(0) = area of the
// zero-delay peak over the mean side-peak area. Needs at least 3 side peaks on
// each side; throws FitError otherwise or when a peak fit does not converge.
G2FitResult fit_pulsed_g2(const HBTHistogram& hist, const G2FitOptions& opts = {});

struct SaturationData {
    std::vector<double> powers_uw;  // strictly increasing, >= 0
    std::vector<double> rates_cps;  // >= 0

    void validate() const;
};

struct SaturationFit {
    double i_sat = 0.0;  // counts/s
    double p_sat = 0.0;  // uW
    double residual_norm = 0.0;
    std::array<double, 4> covariance{};  // row-major 2x2 over (i_sat, p_sat)
    int iterations = 0;
};

struct SaturationOptions {
    bool poisson_weights = false;  // weight residuals by 1/sqrt(max(rate, 1))
};

// Three-level saturation model I(P) = I_sat P / (P + P_sat).
double saturation_model(double power_uw, double i_sat, double p_sat);

// Nonlinear least squares of the saturation model. Initialisation
// I_sat = 2 max(rates), P_sat = median(powers); throws FitError on
// unidentifiable (all-equal rates) or non-converging data.
SaturationFit fit_saturation(const SaturationData& data, const SaturationOptions& opts = {});

struct StabilityTrace {
    std::vector<double> time_s;      // strictly increasing, uniform within 1%
    std::vector<double> counts_cps;  // >= 0

    void validate() const;
};

struct StabilityReport {
    double mean = 0.0;
    double rel_std = 0.0;  // sample std of the raw trace over its mean
    double min_window_mean = 0.0;
    double max_window_mean = 0.0;
    double window_s = 0.0;
    double blink_threshold = 0.0;
    std::size_t window_count = 0;
    bool blinking = false;  // some window mean deviates from the global mean
                            // by more than blink_threshold (relative)
};

// Windowed photostability statistics; trace must span at least 10 windows.
StabilityReport stability_stats(const StabilityTrace& trace, double window_s,
                                double blink_threshold = 0.3);

}  // namespace spsqkd::photo
