#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ionsim/budget.hpp"
#include "ionsim/error.hpp"
#include "ionsim/montecarlo.hpp"
#include "ionsim/readout.hpp"

// Correlation statistics, error attribution and projected-improvement
// scenarios computed from click records.
namespace ionsim {

/// √(p(1−p)/n), zero for n = 0.
inline double wald_error(double p, double n) { return n > 0.0 ? std::sqrt(p * (1.0 - p) / n) : 0.0; }

struct CorrelationMatrix {
    // [photon ν0/ν1][ion ↓/↑]
    std::array<std::array<std::uint64_t, 2>, 2> counts{};

    std::uint64_t column_total(PhotonFrequency f) const {
        const auto& c = counts[f == PhotonFrequency::nu1];
        return c[0] + c[1];
    }
    std::uint64_t total() const { return column_total(PhotonFrequency::nu0) + column_total(PhotonFrequency::nu1); }

    /// P(↓|ν0) with its binomial error.
    Measured fidelity_nu0() const { return conditional(PhotonFrequency::nu0, 0); }
    /// P(↑|ν1) with its binomial error.
    Measured fidelity_nu1() const { return conditional(PhotonFrequency::nu1, 1); }

    /// Mean of the two conditionals; error is half their quadrature sum.
    Measured average() const {
        const auto a = fidelity_nu0();
        const auto b = fidelity_nu1();
        return {0.5 * (a.value + b.value), 0.5 * std::hypot(a.sigma, b.sigma)};
    }

    void add(const ClickRecord& r) {
        if (!r.is_click()) return;
        ++counts[r.photon == PhotonOutcome::nu1][r.ion == IonState::up];
    }

    void merge(const CorrelationMatrix& o) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) counts[i][j] += o.counts[i][j];
    }

    friend bool operator==(const CorrelationMatrix&, const CorrelationMatrix&) = default;

private:
    Measured conditional(PhotonFrequency f, int ion) const {
        const double n = static_cast<double>(column_total(f));
        if (n == 0.0) return {0.0, 0.0};
        const double p = static_cast<double>(counts[f == PhotonFrequency::nu1][ion]) / n;
        return {p, wald_error(p, n)};
    }
};

inline CorrelationMatrix correlation_matrix(std::span<const ClickRecord> records) {
    CorrelationMatrix m;
    for (const auto& r : records) m.add(r);
    if (m.total() == 0) throw Error("empty-data", "no clicks in the record set");
    return m;
}

/// Correlation matrix from a run summary (same tallies).
inline CorrelationMatrix correlation_matrix(const ExperimentSummary& s) {
    CorrelationMatrix m;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) m.counts[i][j] = s.counts[i][j];
    if (m.total() == 0) throw Error("empty-data", "no clicks in the run");
    return m;
}

/// Expected conditional fidelities from the click-path table, with the
/// readout fidelities supplied by the caller.
struct AnalyticCorrelation {
    double fidelity_nu0 = 0.0;
    double fidelity_nu1 = 0.0;
    double average() const { return 0.5 * (fidelity_nu0 + fidelity_nu1); }
};

inline AnalyticCorrelation analytic_correlation(const ShotModel& m, const ReadoutFidelities& readout) {
    double joint[2][2] = {{0, 0}, {0, 0}};
    for (const auto& path : enumerate_click_paths(m)) {
        const int col = path.detected == PhotonOutcome::nu1;
        const double p_read_up = path.ion == IonState::up ? readout.up : 1.0 - readout.down;
        joint[col][1] += path.probability * p_read_up;
        joint[col][0] += path.probability * (1.0 - p_read_up);
    }
    auto cond = [&](int col, int ion) {
        const double n = joint[col][0] + joint[col][1];
        return n > 0.0 ? joint[col][ion] / n : 0.0;
    };
    return {cond(0, 0), cond(1, 1)};
}

inline ReadoutFidelities model_readout_fidelities(const ReadoutModel& m) {
    if (m.classifier != ReadoutClassifier::threshold) {
        throw invalid_argument("analytic readout fidelities are only available for the threshold classifier");
    }
    return analytic_threshold_fidelities(m);
}

/// Infidelity sources, in the order a click is checked against its truth.
enum class ErrorSource { dark_count, pi_leak, spectrometer, readout, other };
inline constexpr std::array kErrorSources = {ErrorSource::dark_count, ErrorSource::pi_leak, ErrorSource::spectrometer,
                                             ErrorSource::readout, ErrorSource::other};

inline const char* to_string(ErrorSource s) {
    switch (s) {
        case ErrorSource::dark_count: return "dark_count";
        case ErrorSource::pi_leak: return "pi_leak";
        case ErrorSource::spectrometer: return "spectrometer";
        case ErrorSource::readout: return "readout";
        case ErrorSource::other: return "other";
    }
    return "?";
}

struct ErrorBudget {
    std::uint64_t clicks = 0;
    std::uint64_t correct = 0;
    std::array<std::uint64_t, kErrorSources.size()> wrong{};

    Measured fraction(ErrorSource s) const { return share(wrong[static_cast<std::size_t>(s)]); }
    Measured correct_fraction() const { return share(correct); }

private:
    Measured share(std::uint64_t n) const {
        const double p = clicks ? static_cast<double>(n) / clicks : 0.0;
        return {p, wald_error(p, static_cast<double>(clicks))};
    }
};

/// Attributes every wrongly correlated click to the first stage whose
/// sampled outcome left the ideal path. A click is correct when it pairs
/// ν0 with ↓ or ν1 with ↑.
inline ErrorBudget error_budget(std::span<const ClickRecord> records) {
    ErrorBudget b;
    for (const auto& r : records) {
        if (!r.is_click()) continue;
        if (!r.truth) throw Error("diagnostics-missing", "error budget needs records generated with diagnostics");
        ++b.clicks;
        const bool ok = (r.photon == PhotonOutcome::nu1) == (r.ion == IonState::up);
        if (ok) {
            ++b.correct;
            continue;
        }
        const auto& t = *r.truth;
        ErrorSource src = ErrorSource::other;
        if (t.dark_click) {
            src = ErrorSource::dark_count;
        } else if (t.branch == Branch::pi) {
            src = ErrorSource::pi_leak;
        } else if ((t.branch == Branch::nu1) != (r.photon == PhotonOutcome::nu1)) {
            src = ErrorSource::spectrometer;
        } else if (t.ion != r.ion) {
            src = ErrorSource::readout;
        }
        ++b.wrong[static_cast<std::size_t>(src)];
    }
    if (b.clicks == 0) throw Error("empty-data", "no clicks in the record set");
    return b;
}

/// Stage replacements for a projected setup. Unset fields keep the base
/// configuration.
struct ScenarioSubstitutions {
    std::optional<double> preparation;  // pump and transfer treated as one stage
    std::optional<double> readout_fidelity;
    std::optional<double> readout_window;
    std::optional<double> readout_bright_rate;
    std::optional<double> grating_efficiency;
    std::optional<double> spectrometer_fidelity;
    std::optional<double> free_space_collection;  // replaces fibre coupling, drops the detector QE stage
    std::optional<double> cycle_time;             // 0 drops dead time
};

/// The projected upgrade path: deterministic preparation, fast high-fidelity
/// readout, a better grating, and detection straight off the collection
/// optic.
inline ScenarioSubstitutions improved_substitutions() {
    ScenarioSubstitutions s;
    s.preparation = 1.0;
    s.readout_fidelity = 0.994;
    s.readout_window = 176.0 * units::us;
    s.readout_bright_rate = 100.0 * units::kHz;
    s.grating_efficiency = 0.55;
    s.spectrometer_fidelity = 0.999;
    s.free_space_collection = 0.143;
    s.cycle_time = 0.0;
    return s;
}

struct ScenarioResult {
    ExperimentConfig config;
    double fidelity = 0.0;           // analytic average correlation fidelity
    double per_shot_success = 0.0;   // click probability
    double cycle_time = 0.0;
    double cycle_rate = 0.0;
    double success_rate = 0.0;       // clicks per second
    std::vector<std::string> substitutions;
    bool assumption_dependent = false;
};

inline ScenarioResult improvement_scenario(const ExperimentConfig& base, const ScenarioSubstitutions& subs) {
    ScenarioResult out;
    ExperimentConfig cfg = base;
    auto log = [&](std::string line) { out.substitutions.push_back(std::move(line)); };

    if (subs.preparation) {
        // A perfect transfer is modelled as a resonant microwave pulse and the
        // remaining error is folded into the pump.
        cfg.microwave.detuning = 0.0;
        cfg.microwave.sample_detuning = false;
        cfg.pump_fidelity = *subs.preparation;
        log(fmt::format("state preparation -> {}", *subs.preparation));
    }
    if (subs.readout_fidelity || subs.readout_window || subs.readout_bright_rate) {
        const double window = subs.readout_window.value_or(cfg.readout.window);
        const double bright = subs.readout_bright_rate.value_or(cfg.readout.bright_rate);
        const auto now = analytic_threshold_fidelities(cfg.readout);
        const double up = subs.readout_fidelity.value_or(now.up);
        const double down = subs.readout_fidelity.value_or(now.down);
        const auto classifier = cfg.readout.classifier;
        cfg.readout = calibrate_readout(up, down, window, bright, cfg.readout.threshold);
        cfg.readout.classifier = classifier;
        cfg.timings.readout = window;
        log(fmt::format("readout fidelity up {} / down {} in {} us at bright rate {} counts/s", up, down,
                        window / units::us, bright));
    }
    if (subs.free_space_collection) {
        cfg.fibre_efficiency = {*subs.free_space_collection, 0.0};
        std::erase_if(cfg.throughput.stages, [](const BudgetStage& s) {
            return s.name == "fibre coupling" || s.name == "PMT quantum efficiency";
        });
        log(fmt::format("collection -> {} free space; fibre coupling and PMT quantum efficiency stages removed",
                        *subs.free_space_collection));
    }
    if (subs.grating_efficiency) {
        bool found = false;
        for (auto& s : cfg.throughput.stages) {
            if (s.name == "grating and optics") {
                s.factor = {*subs.grating_efficiency, 0.0};
                found = true;
            }
        }
        if (!found) cfg.throughput.stages.push_back({"grating and optics", {*subs.grating_efficiency, 0.0}});
        log(fmt::format("grating efficiency -> {}", *subs.grating_efficiency));
    }
    if (subs.spectrometer_fidelity) {
        cfg.spectrometer.nu0 = {*subs.spectrometer_fidelity, 0.0};
        cfg.spectrometer.nu1 = {*subs.spectrometer_fidelity, 0.0};
        log(fmt::format("spectrometer classification -> {}", *subs.spectrometer_fidelity));
    }
    if (subs.cycle_time) {
        cfg.timings.cycle_time = *subs.cycle_time;
        log(*subs.cycle_time > 0.0 ? fmt::format("cycle time -> {} us", *subs.cycle_time / units::us)
                                   : std::string("cycle time -> sum of protocol steps (no dead time)"));
    }
    cfg.scenario = out.substitutions.empty() ? base.scenario : Scenario::improved;

    const ShotModel model = resolve_model(cfg);
    out.fidelity = analytic_correlation(model, model_readout_fidelities(cfg.readout)).average();
    out.per_shot_success = click_probability(model);
    out.cycle_time = model.cycle_time;
    out.cycle_rate = 1.0 / model.cycle_time;
    out.success_rate = out.per_shot_success * out.cycle_rate;
    out.assumption_dependent = !out.substitutions.empty();
    out.config = std::move(cfg);
    return out;
}

/// Grouped-bar chart of the conditional outcome fractions per photon
/// frequency, with the ideal outcome drawn as wire frames.
inline std::string correlation_svg(const CorrelationMatrix& m) {
    constexpr double W = 480, H = 360, left = 60, bottom = 300, top = 30, bar = 70, gap = 10, group = 200;
    const double plot_h = bottom - top;
    std::string svg = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" "
        "font-family=\"sans-serif\" font-size=\"12\">\n",
        W, H, W, H);
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", left, bottom, W - 20,
                       bottom);
    svg += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", left, top, left, bottom);
    for (int tick = 0; tick <= 4; ++tick) {
        const double y = bottom - plot_h * tick / 4.0;
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.2f}</text>\n", left - 6, y + 4,
                           tick / 4.0);
    }
    const char* photon_names[] = {"nu0", "nu1"};
    const char* ion_names[] = {"down", "up"};
    const char* colours[] = {"#3b6fb6", "#d9822b"};
    for (int col = 0; col < 2; ++col) {
        const double n = static_cast<double>(m.counts[col][0] + m.counts[col][1]);
        const double x0 = left + 30 + col * group;
        for (int ion = 0; ion < 2; ++ion) {
            const double frac = n > 0 ? m.counts[col][ion] / n : 0.0;
            const double ideal = ion == col ? 1.0 : 0.0;
            const double x = x0 + ion * (bar + gap);
            const double h = plot_h * frac;
            svg += fmt::format(
                "<rect class=\"measured\" x=\"{}\" y=\"{:.3f}\" width=\"{}\" height=\"{:.3f}\" fill=\"{}\">"
                "<title>{} {}: {} ({:.4f})</title></rect>\n",
                x, bottom - h, bar, h, colours[ion], photon_names[col], ion_names[ion], m.counts[col][ion], frac);
            const double hi = plot_h * ideal;
            svg += fmt::format(
                "<rect class=\"ideal\" x=\"{}\" y=\"{:.3f}\" width=\"{}\" height=\"{:.3f}\" fill=\"none\" "
                "stroke=\"black\" stroke-dasharray=\"4 2\"/>\n",
                x, bottom - hi, bar, hi);
            svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", x + bar / 2, bottom + 16,
                               ion_names[ion]);
        }
        svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-weight=\"bold\">{}</text>\n",
                           x0 + bar + gap / 2, bottom + 36, photon_names[col]);
    }
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">average fidelity {}%</text>\n", W / 2, 18,
                       format_concise(m.average(), 100.0));
    svg += "</svg>\n";
    return svg;
}

}  // namespace ionsim
