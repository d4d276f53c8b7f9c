#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "ionsim/error.hpp"
#include "ionsim/rng.hpp"
#include "ionsim/units.hpp"

// State-selective fluorescence readout of the ion qubit.
//
// |↑⟩ (F=1) scatters the detection light: counts arrive at bright + dark
// rate until an off-resonant pump event drops the ion into |↓⟩, after which
// only the dark rate remains. |↓⟩ sees the dark rate throughout. The pump
// event is exponential with rate `leakage_rate`; it is what makes |↑⟩
// readout worse than |↓⟩.
namespace ionsim {

enum class IonState { down, up };

inline const char* to_string(IonState s) { return s == IonState::up ? "up" : "down"; }

enum class ReadoutClassifier { threshold, likelihood };

struct ReadoutModel {
    double bright_rate = 10.0 * units::kHz;  // counts/s above background
    double dark_rate = 0.0;                  // background + detector dark counts/s
    double leakage_rate = 0.0;               // |↑⟩ → |↓⟩ pumping rate, 1/s
    double window = 1.38 * units::ms;
    int threshold = 1;
    ReadoutClassifier classifier = ReadoutClassifier::threshold;

    void validate() const {
        if (!(bright_rate >= 0.0) || !(dark_rate >= 0.0) || !(leakage_rate >= 0.0)) {
            throw invalid_argument("readout rates must be >= 0");
        }
        if (!(window > 0.0)) throw invalid_argument("readout window must be positive");
        if (threshold < 0) throw invalid_argument("readout threshold must be >= 0");
    }
};

struct ReadoutResult {
    IonState classified = IonState::down;
    int counts = 0;
    std::vector<double> arrivals;  // filled only for the likelihood classifier
};

/// More than `threshold` counts reads as bright.
inline IonState threshold_classifier(int counts, int threshold) {
    if (threshold < 0) throw invalid_argument("threshold must be >= 0");
    return counts > threshold ? IonState::up : IonState::down;
}

/// P(N ≤ k) for N ~ Poisson(mean).
inline double poisson_cdf(int k, double mean) {
    if (k < 0) return 0.0;
    if (mean <= 0.0) return 1.0;
    return boost::math::gamma_q(static_cast<double>(k) + 1.0, mean);
}

/// P(N ≤ k | ↓).
inline double dark_count_cdf(int k, const ReadoutModel& m) { return poisson_cdf(k, m.dark_rate * m.window); }

/// P(N ≤ k | ↑): no-leak term plus the leak-time mixture.
inline double bright_count_cdf(int k, const ReadoutModel& m) {
    const double T = m.window;
    const double g = m.leakage_rate;
    const double survive = std::exp(-g * T);
    double cdf = survive * poisson_cdf(k, (m.bright_rate + m.dark_rate) * T);
    if (g > 0.0) {
        auto integrand = [&](double tau) {
            return g * std::exp(-g * tau) * poisson_cdf(k, m.bright_rate * tau + m.dark_rate * T);
        };
        // Smooth integrand: composite 30-point Gauss-Legendre is exact to
        // rounding here.
        constexpr int panels = 16;
        for (int i = 0; i < panels; ++i) {
            cdf += boost::math::quadrature::gauss<double, 30>::integrate(integrand, T * i / panels,
                                                                         T * (i + 1) / panels);
        }
    }
    return cdf;
}

struct ReadoutFidelities {
    double up = 0.0;
    double down = 0.0;
    double average() const { return 0.5 * (up + down); }
};

inline ReadoutFidelities analytic_threshold_fidelities(const ReadoutModel& m, int threshold) {
    return {1.0 - bright_count_cdf(threshold, m), dark_count_cdf(threshold, m)};
}

inline ReadoutFidelities analytic_threshold_fidelities(const ReadoutModel& m) {
    return analytic_threshold_fidelities(m, m.threshold);
}

/// Threshold maximising the analytic average fidelity over [0, max_threshold].
inline int optimal_threshold(const ReadoutModel& m, int max_threshold = 100) {
    int best = 0;
    double best_avg = -1.0;
    for (int k = 0; k <= max_threshold; ++k) {
        const double avg = analytic_threshold_fidelities(m, k).average();
        if (avg > best_avg) {
            best_avg = avg;
            best = k;
        }
    }
    return best;
}

namespace detail {
inline double log_sum_exp(const std::vector<double>& terms) {
    double hi = -std::numeric_limits<double>::infinity();
    for (double t : terms) hi = std::max(hi, t);
    if (!std::isfinite(hi)) return hi;
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - hi);
    return hi + std::log(sum);
}

inline double log_rate_power(double rate, std::size_t n) {
    if (n == 0) return 0.0;
    return rate > 0.0 ? static_cast<double>(n) * std::log(rate) : -std::numeric_limits<double>::infinity();
}
}  // namespace detail

/// log-likelihood of a sorted arrival record under |↓⟩.
inline double dark_log_likelihood(const std::vector<double>& arrivals, const ReadoutModel& m) {
    return detail::log_rate_power(m.dark_rate, arrivals.size()) - m.dark_rate * m.window;
}

/// log-likelihood of a sorted arrival record under |↑⟩, integrating the
/// unknown leak time exactly: between consecutive arrivals the count of
/// pre-leak arrivals is fixed, so each piece is an elementary integral.
inline double bright_log_likelihood(const std::vector<double>& arrivals, const ReadoutModel& m) {
    const double T = m.window;
    const double g = m.leakage_rate;
    const double rb = m.bright_rate;
    const double rd = m.dark_rate;
    const std::size_t n = arrivals.size();
    std::vector<double> terms;
    terms.push_back(-g * T + detail::log_rate_power(rb + rd, n) - (rb + rd) * T);
    if (g > 0.0) {
        const double k = g + rb;
        for (std::size_t j = 0; j <= n; ++j) {
            const double a = j == 0 ? 0.0 : arrivals[j - 1];
            const double b = j == n ? T : arrivals[j];
            if (!(b > a)) continue;
            // ∫_a^b g e^{-kτ} dτ = (g/k)(e^{-ka} − e^{-kb})
            const double log_piece = std::log(g / k) - k * a + std::log(-std::expm1(-k * (b - a)));
            terms.push_back(log_piece + detail::log_rate_power(rb + rd, j) + detail::log_rate_power(rd, n - j) -
                            rd * T);
        }
    }
    return detail::log_sum_exp(terms);
}

/// Equal-prior likelihood-ratio decision on the arrival times.
inline IonState likelihood_classifier(const std::vector<double>& arrivals, const ReadoutModel& m) {
    return bright_log_likelihood(arrivals, m) > dark_log_likelihood(arrivals, m) ? IonState::up : IonState::down;
}

template <class Rng>
ReadoutResult simulate_readout(IonState truth, const ReadoutModel& m, Rng& rng) {
    const double T = m.window;
    const double leak = truth == IonState::up ? std::min(exponential(rng, m.leakage_rate), T) : 0.0;
    const double bright_time = truth == IonState::up ? leak : 0.0;
    ReadoutResult out;
    if (m.classifier == ReadoutClassifier::threshold) {
        const double mean = m.bright_rate * bright_time + m.dark_rate * T;
        if (mean > 0.0) {
            boost::random::poisson_distribution<int, double> counts(mean);
            out.counts = counts(rng);
        }
        out.classified = threshold_classifier(out.counts, m.threshold);
        return out;
    }
    // Piecewise-constant-rate Poisson process: bright + dark before the leak,
    // dark after.
    double t = 0.0;
    while (true) {
        const double rate = t < bright_time ? m.bright_rate + m.dark_rate : m.dark_rate;
        const double next = t + exponential(rng, rate);
        if (t < bright_time && next >= bright_time) {
            t = bright_time;  // memoryless: restart at the rate change
            continue;
        }
        if (!(next < T)) break;
        t = next;
        out.arrivals.push_back(t);
    }
    out.counts = static_cast<int>(out.arrivals.size());
    out.classified = likelihood_classifier(out.arrivals, m);
    return out;
}

/// Solves for the dark and leakage rates at which the threshold classifier
/// reads |↑⟩ and |↓⟩ with the requested analytic fidelities.
inline ReadoutModel calibrate_readout(double target_up, double target_down, double window, double bright_rate,
                                      int threshold = 1) {
    auto open_unit = [](double v) { return v > 0.5 && v < 1.0; };
    if (!open_unit(target_up) || !open_unit(target_down)) {
        throw Error("infeasible", "readout targets must lie in (0.5, 1); perfect readout needs a zero dark rate");
    }
    ReadoutModel m;
    m.window = window;
    m.bright_rate = bright_rate;
    m.threshold = threshold;
    m.validate();

    // P(N ≤ k | ↓) = Q(k+1, μ) = target  →  μ = Q⁻¹(k+1, target)
    m.dark_rate = boost::math::gamma_q_inv(static_cast<double>(threshold) + 1.0, target_down) / window;

    m.leakage_rate = 0.0;
    const double best_up = analytic_threshold_fidelities(m).up;
    if (best_up < target_up) {
        throw Error("infeasible", "bright rate " + std::to_string(bright_rate) +
                                      " counts/s cannot reach |up> fidelity " + std::to_string(target_up) +
                                      " even without leakage (max " + std::to_string(best_up) + ")");
    }
    auto residual = [&](double g) {
        ReadoutModel trial = m;
        trial.leakage_rate = g;
        return analytic_threshold_fidelities(trial).up - target_up;
    };
    double hi = 1.0 / window;
    while (residual(hi) > 0.0) hi *= 2.0;
    boost::uintmax_t iters = 200;
    const auto [lo_root, hi_root] = boost::math::tools::toms748_solve(
        residual, 0.0, hi, best_up - target_up, residual(hi), boost::math::tools::eps_tolerance<double>(48), iters);
    m.leakage_rate = 0.5 * (lo_root + hi_root);
    return m;
}

}  // namespace ionsim
