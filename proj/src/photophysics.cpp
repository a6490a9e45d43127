#include "spsqkd/photophysics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "spsqkd/curvefit.hpp"
#include "spsqkd/errors.hpp"

namespace spsqkd::photo {

namespace {

void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

double lorentzian(double t, double amplitude, double half_width, double center) {
    const double w2 = half_width * half_width;
    const double dt = t - center;
    return amplitude * w2 / (dt * dt + w2);
}

struct PeakWindow {
    int comb_index = 0;          // peak sits at comb_index * rep_period
    std::size_t first = 0, last = 0;  // bin range [first, last)
};

double window_max(const HBTHistogram& h, const PeakWindow& w) {
    double m = h.counts[w.first];
    for (std::size_t i = w.first; i < w.last; ++i) m = std::max(m, h.counts[i]);
    return m;
}

}  // namespace

void HBTHistogram::validate() const {
    require(bin_centers.size() == counts.size(), "bin_centers/counts size mismatch");
    require(bin_centers.size() >= 2, "histogram needs at least two bins");
    require(rep_period_ns > 0.0, "rep_period must be > 0");
    const double w = bin_centers[1] - bin_centers[0];
    require(w > 0.0, "bin centers must be strictly increasing");
    for (std::size_t i = 1; i < bin_centers.size(); ++i) {
        const double d = bin_centers[i] - bin_centers[i - 1];
        require(d > 0.0, "bin centers must be strictly increasing");
        require(std::abs(d - w) <= 1e-9 * w, "bin spacing must be uniform");
    }
    for (double c : counts) require(c >= 0.0, "counts must be non-negative");
    require(rep_period_ns >= 4.0 * w, "rep_period must span at least 4 bins");
}

double HBTHistogram::bin_width() const { return bin_centers[1] - bin_centers[0]; }

BinnedCoincidences bin_coincidences(std::span<const double> delays_ns,
                                    double bin_width_ns, double window_ns,
                                    double rep_period_ns) {
    require(!delays_ns.empty(), "empty coincidence event list");
    require(bin_width_ns > 0.0, "bin width must be > 0");
    require(window_ns > 0.0, "window must be > 0");
    require(window_ns / bin_width_ns >= 8.0, "window must span at least 8 bins");

    const auto half_bins = static_cast<long>(std::llround(window_ns / bin_width_ns));
    const std::size_t nbins = static_cast<std::size_t>(2 * half_bins + 1);

    BinnedCoincidences out;
    out.hist.rep_period_ns = rep_period_ns;
    out.hist.bin_centers.resize(nbins);
    out.hist.counts.assign(nbins, 0.0);
    for (std::size_t i = 0; i < nbins; ++i) {
        out.hist.bin_centers[i] = (static_cast<long>(i) - half_bins) * bin_width_ns;
    }

    for (double t : delays_ns) {
        const auto k = static_cast<long>(std::llround(t / bin_width_ns));
        if (k < -half_bins || k > half_bins) {
            ++out.dropped;
            continue;
        }
        out.hist.counts[static_cast<std::size_t>(k + half_bins)] += 1.0;
        ++out.kept;
    }
    out.hist.validate();
    return out;
}

namespace {

// Mean over bins farther than rep_period/3 from every comb position, after
// subtracting `model` (the fitted comb) when provided.
double valley_baseline(const HBTHistogram& h, const std::vector<double>* model = nullptr) {
    const double period = h.rep_period_ns;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < h.bin_centers.size(); ++i) {
        const double t = h.bin_centers[i];
        const double frac = std::abs(t - period * std::round(t / period));
        if (frac > period / 3.0) {
            sum += h.counts[i] - (model ? (*model)[i] : 0.0);
            ++count;
        }
    }
    if (count == 0) return *std::min_element(h.counts.begin(), h.counts.end());
    return sum / static_cast<double>(count);
}

std::vector<PeakWindow> comb_windows(const HBTHistogram& h, int side_peaks) {
    const double period = h.rep_period_ns;
    const double half = period / 2.0;
    const double t_lo = h.bin_centers.front();
    const double t_hi = h.bin_centers.back();

    // A peak is usable when its full half-period window fits the histogram.
    const int k_max = static_cast<int>(std::floor(t_hi / period - 0.5 + 1e-9));
    const int k_min = static_cast<int>(std::ceil(t_lo / period + 0.5 - 1e-9));
    const int avail_pos = std::max(0, k_max);
    const int avail_neg = std::max(0, -k_min);
    const int n_side = std::min({side_peaks, avail_pos, avail_neg});
    if (n_side < 3) {
        throw FitError("fit_pulsed_g2: fewer than 3 full side peaks per side (have " +
                       std::to_string(std::min(avail_pos, avail_neg)) + ")");
    }

    std::vector<PeakWindow> windows;
    for (int k = -n_side; k <= n_side; ++k) {
        const double c = k * period;
        PeakWindow w;
        w.comb_index = k;
        const auto lo = std::lower_bound(h.bin_centers.begin(), h.bin_centers.end(), c - half);
        const auto hi = std::upper_bound(h.bin_centers.begin(), h.bin_centers.end(), c + half - 1e-12);
        w.first = static_cast<std::size_t>(lo - h.bin_centers.begin());
        w.last = static_cast<std::size_t>(hi - h.bin_centers.begin());
        if (w.last <= w.first + 4) throw FitError("fit_pulsed_g2: peak window has too few bins");
        windows.push_back(w);
    }
    return windows;
}

// Tail contribution of every fitted peak except `skip` at time t.
double other_peak_tails(const std::vector<PeakFit>& peaks, std::size_t skip, double t) {
    double v = 0.0;
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        if (i == skip) continue;
        v += lorentzian(t, peaks[i].amplitude, peaks[i].half_width_ns, peaks[i].center_ns);
    }
    return v;
}

// `tails[i]` holds the neighbour-comb contribution at bin i (zero on the first
// pass, fitted tails on the refinement pass).
PeakFit fit_one_peak(const HBTHistogram& h, const PeakWindow& w, double baseline,
                     const std::vector<double>& tails) {
    const double period = h.rep_period_ns;
    const double c0 = w.comb_index * period;
    const std::size_t nbins = w.last - w.first;

    fit::ResidualFn fn = [&](std::span<const double> p, std::span<double> r) {
        for (std::size_t i = 0; i < nbins; ++i) {
            const std::size_t bin = w.first + i;
            r[i] = h.counts[bin] - baseline - tails[bin] -
                   lorentzian(h.bin_centers[bin], p[0], p[1], p[2]);
        }
    };

    const double amp0 = std::max(window_max(h, w) - baseline, 0.0);
    const double hw0 = std::max(2.0 * h.bin_width(), period / 25.0);
    const auto res = fit::levenberg_marquardt(fn, nbins, {amp0, hw0, c0});

    PeakFit peak;
    peak.amplitude = res.params[0];
    peak.half_width_ns = std::abs(res.params[1]);
    peak.center_ns = res.params[2];
    peak.area = std::numbers::pi * peak.amplitude * peak.half_width_ns;
    peak.residual_norm = res.residual_norm;
    peak.iterations = res.iterations;
    peak.converged = res.converged;
    return peak;
}

std::vector<PeakFit> fit_shared_width(const HBTHistogram& h,
                                      const std::vector<PeakWindow>& windows,
                                      double baseline, const std::vector<double>& tails) {
    const double period = h.rep_period_ns;
    std::size_t total = 0;
    for (const auto& w : windows) total += w.last - w.first;

    // Parameter layout: [hw, amp_0, c_0, amp_1, c_1, ...]
    std::vector<double> init;
    init.push_back(std::max(2.0 * h.bin_width(), period / 25.0));
    for (const auto& w : windows) {
        init.push_back(std::max(window_max(h, w) - baseline, 0.0));
        init.push_back(w.comb_index * period);
    }

    fit::ResidualFn fn = [&](std::span<const double> p, std::span<double> r) {
        std::size_t at = 0;
        for (std::size_t wi = 0; wi < windows.size(); ++wi) {
            const auto& w = windows[wi];
            const double amp = p[1 + 2 * wi];
            const double c = p[2 + 2 * wi];
            for (std::size_t i = w.first; i < w.last; ++i) {
                r[at++] = h.counts[i] - baseline - tails[i] -
                          lorentzian(h.bin_centers[i], amp, p[0], c);
            }
        }
    };

    const auto res = fit::levenberg_marquardt(fn, total, std::move(init));
    if (!res.converged) {
        throw FitError("fit_pulsed_g2: shared-width joint fit did not converge after " +
                       std::to_string(res.iterations) + " iterations");
    }

    std::vector<PeakFit> peaks;
    const double hw = std::abs(res.params[0]);
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        PeakFit p;
        p.amplitude = res.params[1 + 2 * wi];
        p.half_width_ns = hw;
        p.center_ns = res.params[2 + 2 * wi];
        p.area = std::numbers::pi * p.amplitude * p.half_width_ns;
        p.residual_norm = res.residual_norm;
        p.iterations = res.iterations;
        p.converged = true;
        peaks.push_back(p);
    }
    return peaks;
}

std::vector<PeakFit> fit_comb(const HBTHistogram& h, const std::vector<PeakWindow>& windows,
                              double baseline, const std::vector<double>& tails,
                              bool shared_width) {
    if (shared_width) return fit_shared_width(h, windows, baseline, tails);
    std::vector<PeakFit> peaks;
    std::string failures;
    for (const auto& w : windows) {
        peaks.push_back(fit_one_peak(h, w, baseline, tails));
        if (!peaks.back().converged) {
            failures += " peak@" + std::to_string(w.comb_index * h.rep_period_ns) + "ns(" +
                        std::to_string(peaks.back().iterations) + " iters)";
        }
    }
    if (!failures.empty()) {
        throw FitError("fit_pulsed_g2: peak fits did not converge:" + failures);
    }
    return peaks;
}

}  // namespace

G2FitResult fit_pulsed_g2(const HBTHistogram& hist, const G2FitOptions& opts) {
    hist.validate();
    require(opts.side_peaks >= 3, "side_peaks must be >= 3");

    const auto windows = comb_windows(hist, opts.side_peaks);
    G2FitResult out;
    out.side_peaks_used = (static_cast<int>(windows.size()) - 1) / 2;

    // First pass: valley-estimated constant background, no tail model. The
    // refinement pass subtracts the fitted neighbour tails so the small
    // zero-delay peak is not biased by them, and re-derives the baseline from
    // the comb-subtracted valleys.
    std::vector<double> tails(hist.counts.size(), 0.0);
    out.baseline = valley_baseline(hist);
    out.peaks = fit_comb(hist, windows, out.baseline, tails, opts.shared_width);

    std::vector<double> comb_model(hist.counts.size(), 0.0);
    for (const auto& peak : out.peaks) {
        for (std::size_t i = 0; i < hist.counts.size(); ++i) {
            comb_model[i] +=
                lorentzian(hist.bin_centers[i], peak.amplitude, peak.half_width_ns, peak.center_ns);
        }
    }
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const auto& w = windows[wi];
        for (std::size_t i = w.first; i < w.last; ++i) {
            tails[i] = other_peak_tails(out.peaks, wi, hist.bin_centers[i]);
        }
    }
    out.baseline = valley_baseline(hist, &comb_model);
    out.peaks = fit_comb(hist, windows, out.baseline, tails, opts.shared_width);

    double center_area = 0.0;
    double side_sum = 0.0, side_sq = 0.0;
    std::size_t side_n = 0;
    for (std::size_t i = 0; i < out.peaks.size(); ++i) {
        const int k = windows[i].comb_index;
        const double a = out.peaks[i].area;
        if (k == 0) {
            center_area = a;
        } else {
            side_sum += a;
            side_sq += a * a;
            ++side_n;
        }
        if (!opts.shared_width) {
            out.residual_norm = std::hypot(out.residual_norm, out.peaks[i].residual_norm);
        }
    }
    if (opts.shared_width) out.residual_norm = out.peaks.front().residual_norm;
    const double side_mean = side_sum / static_cast<double>(side_n);
    if (!(side_mean > 0.0)) {
        throw FitError("fit_pulsed_g2: side peaks have non-positive mean area");
    }
    out.g2_zero = std::max(center_area / side_mean, 0.0);
    const double var = (side_sq - side_sum * side_sum / static_cast<double>(side_n)) /
                       static_cast<double>(side_n - 1);
    out.g2_uncertainty = std::sqrt(std::max(var, 0.0)) / side_mean;
    return out;
}

void SaturationData::validate() const {
    require(powers_uw.size() == rates_cps.size(), "powers/rates size mismatch");
    require(powers_uw.size() >= 4, "saturation data needs at least 4 points");
    for (std::size_t i = 0; i < powers_uw.size(); ++i) {
        require(powers_uw[i] >= 0.0, "powers must be non-negative");
        require(rates_cps[i] >= 0.0, "rates must be non-negative");
        if (i > 0) require(powers_uw[i] > powers_uw[i - 1], "powers must be strictly increasing");
    }
}

double saturation_model(double power_uw, double i_sat, double p_sat) {
    return i_sat * power_uw / (power_uw + p_sat);
}

SaturationFit fit_saturation(const SaturationData& data, const SaturationOptions& opts) {
    data.validate();

    const double rate_max = *std::max_element(data.rates_cps.begin(), data.rates_cps.end());
    const double rate_min = *std::min_element(data.rates_cps.begin(), data.rates_cps.end());
    if (rate_max <= 0.0 || rate_max - rate_min <= 1e-12 * rate_max) {
        throw FitError("fit_saturation: rates are constant, model is unidentifiable");
    }

    const std::size_t n = data.powers_uw.size();
    std::vector<double> weights(n, 1.0);
    if (opts.poisson_weights) {
        for (std::size_t i = 0; i < n; ++i) {
            weights[i] = 1.0 / std::sqrt(std::max(data.rates_cps[i], 1.0));
        }
    }

    fit::ResidualFn fn = [&](std::span<const double> p, std::span<double> r) {
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = weights[i] *
                   (data.rates_cps[i] - saturation_model(data.powers_uw[i], p[0], p[1]));
        }
    };

    const double i0 = 2.0 * rate_max;
    const double p0 = data.powers_uw[n / 2];  // median; powers are sorted
    const auto res = fit::levenberg_marquardt(fn, n, {i0, std::max(p0, 1e-6)});
    if (!res.converged) {
        throw FitError("fit_saturation: no convergence after " +
                       std::to_string(res.iterations) + " iterations");
    }

    SaturationFit out;
    out.i_sat = res.params[0];
    out.p_sat = res.params[1];
    out.residual_norm = res.residual_norm;
    out.iterations = res.iterations;
    if (res.covariance.size() == 4) {
        std::copy(res.covariance.begin(), res.covariance.end(), out.covariance.begin());
    }
    if (!(out.i_sat > 0.0) || !(out.p_sat > 0.0)) {
        throw FitError("fit_saturation: fit landed on non-physical parameters");
    }
    return out;
}

void StabilityTrace::validate() const {
    require(time_s.size() == counts_cps.size(), "time/intensity size mismatch");
    require(time_s.size() >= 2, "stability trace needs at least 2 samples");
    const double n_steps = static_cast<double>(time_s.size() - 1);
    const double dt_mean = (time_s.back() - time_s.front()) / n_steps;
    require(dt_mean > 0.0, "timestamps must be strictly increasing");
    for (std::size_t i = 1; i < time_s.size(); ++i) {
        const double dt = time_s[i] - time_s[i - 1];
        require(dt > 0.0, "timestamps must be strictly increasing");
        require(std::abs(dt - dt_mean) <= 0.01 * dt_mean, "sampling jitter exceeds 1%");
    }
    for (double c : counts_cps) require(c >= 0.0, "intensities must be non-negative");
}

StabilityReport stability_stats(const StabilityTrace& trace, double window_s,
                                double blink_threshold) {
    trace.validate();
    require(window_s > 0.0, "window must be > 0");
    require(blink_threshold > 0.0, "blink threshold must be > 0");
    const double duration = trace.time_s.back() - trace.time_s.front();
    require(duration >= 10.0 * window_s, "trace must span at least 10 windows");

    const std::size_t n = trace.counts_cps.size();
    double sum = 0.0;
    for (double c : trace.counts_cps) sum += c;
    const double mean = sum / static_cast<double>(n);

    double sq = 0.0;
    for (double c : trace.counts_cps) sq += (c - mean) * (c - mean);
    const double sample_std = std::sqrt(sq / static_cast<double>(n - 1));

    StabilityReport rep;
    rep.mean = mean;
    rep.rel_std = mean > 0.0 ? sample_std / mean : 0.0;
    rep.window_s = window_s;
    rep.blink_threshold = blink_threshold;

    const auto n_windows = static_cast<std::size_t>(std::floor(duration / window_s));
    rep.window_count = n_windows;
    rep.min_window_mean = std::numeric_limits<double>::infinity();
    rep.max_window_mean = -std::numeric_limits<double>::infinity();

    // Means over complete windows only; trailing samples beyond the last full
    // window stay in the global statistics.
    const double t0 = trace.time_s.front();
    std::size_t i = 0;
    for (std::size_t w = 0; w < n_windows; ++w) {
        const double t_end = t0 + (static_cast<double>(w) + 1.0) * window_s;
        double wsum = 0.0;
        std::size_t wn = 0;
        while (i < n && trace.time_s[i] < t_end) {
            wsum += trace.counts_cps[i];
            ++wn;
            ++i;
        }
        if (wn == 0) continue;
        const double wmean = wsum / static_cast<double>(wn);
        rep.min_window_mean = std::min(rep.min_window_mean, wmean);
        rep.max_window_mean = std::max(rep.max_window_mean, wmean);
        if (mean > 0.0 && std::abs(wmean - mean) > blink_threshold * mean) {
            rep.blinking = true;
        }
    }
    return rep;
}

}  // namespace spsqkd::photo
