#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "ionsim/atom_model.hpp"
#include "ionsim/budget.hpp"
#include "ionsim/error.hpp"
#include "ionsim/protocol.hpp"
#include "ionsim/readout.hpp"
#include "ionsim/rng.hpp"
#include "ionsim/spectrometer.hpp"

// Shot-level simulation of the correlation experiment on classical
// probabilities. Each shot walks the stages in order: preparation, photon
// branch, fibre collection, spectrometer survival, spectrometer
// classification, ion readout.
namespace ionsim {

enum class Scenario { paper_default, improved, custom };

inline const char* to_string(Scenario s) {
    switch (s) {
        case Scenario::paper_default: return "paper-default";
        case Scenario::improved: return "improved";
        case Scenario::custom: return "custom";
    }
    return "?";
}

struct PhotonSource {
    /// Per-shot probability that a prepared ion emits a collectible σ photon
    /// (either frequency). This is the generation factor of the coincidence
    /// budget.
    Measured generation{0.116, 0.004};
    /// Fraction of generated σ photons that are ν1.
    double nu1_share = 0.5;
    /// Fraction of π photons that leak into the collected stream.
    double pi_leak_fraction = 0.0;
};

struct ExperimentConfig {
    std::uint64_t shots = 14'883'327;
    std::uint64_t seed = 20211;
    Scenario scenario = Scenario::paper_default;
    bool diagnostics = false;

    ProtocolTimings timings{};
    double pump_fidelity = 1.0;
    MicrowaveSettings microwave{};
    PhotonSource photon{};
    Measured fibre_efficiency{0.027, 0.003};
    ThroughputChain throughput{};
    ClassificationMatrix spectrometer{};
    double dark_rate = 0.0;  // per spectrometer PMT, counts/s
    ReadoutModel readout{};

    void validate() const {
        if (shots < 1) throw invalid_argument("experiment needs at least one shot");
        auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!unit(pump_fidelity) || !unit(photon.generation.value) || !unit(photon.nu1_share) ||
            !unit(photon.pi_leak_fraction) || !unit(fibre_efficiency.value)) {
            throw invalid_argument("experiment probabilities must lie in [0, 1]");
        }
        // π emission is modelled at half the σ generation (1/3 : 2/3 branching).
        if (photon.generation.value * 1.5 > 1.0 + 1e-12 && photon.pi_leak_fraction > 0.0) {
            throw invalid_argument("σ generation plus π emission exceeds 1");
        }
        spectrometer.validate();
        readout.validate();
        (void)throughput.product();
    }
};

enum class PreparationResult : std::uint8_t { ready, transfer_failed, pump_failed };
enum class Branch : std::uint8_t { none, nu0, nu1, pi };
enum class PhotonOutcome : std::uint8_t { none, nu0, nu1 };

inline const char* to_string(PreparationResult p) {
    switch (p) {
        case PreparationResult::ready: return "ready";
        case PreparationResult::transfer_failed: return "transfer_failed";
        case PreparationResult::pump_failed: return "pump_failed";
    }
    return "?";
}
inline const char* to_string(Branch b) {
    switch (b) {
        case Branch::none: return "none";
        case Branch::nu0: return "nu0";
        case Branch::nu1: return "nu1";
        case Branch::pi: return "pi";
    }
    return "?";
}
inline const char* to_string(PhotonOutcome p) {
    switch (p) {
        case PhotonOutcome::none: return "none";
        case PhotonOutcome::nu0: return "nu0";
        case PhotonOutcome::nu1: return "nu1";
    }
    return "?";
}

/// Ground truth behind a record, kept only when diagnostics are on.
struct ShotTruth {
    PreparationResult prep = PreparationResult::ready;
    Branch branch = Branch::none;
    IonState ion = IonState::down;
    bool dark_click = false;

    friend bool operator==(const ShotTruth&, const ShotTruth&) = default;
};

struct ClickRecord {
    std::uint64_t shot = 0;
    PhotonOutcome photon = PhotonOutcome::none;
    IonState ion = IonState::down;
    double timestamp = 0.0;  // s since the first cycle
    std::optional<ShotTruth> truth;

    bool is_click() const { return photon != PhotonOutcome::none; }

    friend bool operator==(const ClickRecord&, const ClickRecord&) = default;
};

/// Stage probabilities resolved once per experiment.
struct ShotModel {
    double p_ready = 0.0;
    double p_transfer_failed = 0.0;
    double p_pump_failed = 0.0;
    double p_nu1 = 0.0;  // given ready
    double p_nu0 = 0.0;
    double p_pi = 0.0;
    double p_collect_sigma = 0.0;
    double p_collect_pi = 0.0;
    double p_survive = 0.0;
    double p_dark_click = 0.0;  // per PMT per gate
    ClassificationMatrix spectrometer;
    ReadoutModel readout;
    double cycle_time = 0.0;
    double microwave_detuning = 0.0;
    bool diagnostics = false;
};

/// Resolves an ExperimentConfig. With `sample_detuning` the microwave
/// detuning is drawn once per experiment from the master seed.
inline ShotModel resolve_model(const ExperimentConfig& cfg) {
    cfg.validate();
    ShotModel m;
    m.microwave_detuning = cfg.microwave.detuning;
    if (cfg.microwave.sample_detuning) {
        auto rng = make_stream(cfg.seed, StreamDomain::experiment, 0);
        boost::random::normal_distribution<double> draw(cfg.microwave.detuning, cfg.microwave.detuning_sigma);
        m.microwave_detuning = draw(rng);
    }
    const auto prep = simulate_state_prep(cfg.pump_fidelity, cfg.microwave, m.microwave_detuning);
    m.p_ready = prep.ready;
    m.p_transfer_failed = prep.transfer_failed;
    m.p_pump_failed = prep.pump_failed;
    const double gen = cfg.photon.generation.value;
    m.p_nu1 = gen * cfg.photon.nu1_share;
    m.p_nu0 = gen - m.p_nu1;
    m.p_pi = cfg.photon.pi_leak_fraction > 0.0 ? 0.5 * gen : 0.0;
    m.p_collect_sigma = cfg.fibre_efficiency.value;
    m.p_collect_pi = cfg.fibre_efficiency.value * cfg.photon.pi_leak_fraction;
    m.p_survive = cfg.throughput.product().value;
    m.p_dark_click = dark_click_probability(cfg.dark_rate, cfg.timings.photon_gate);
    m.spectrometer = cfg.spectrometer;
    m.readout = cfg.readout;
    m.cycle_time = build_sequence(cfg.timings).total();
    m.diagnostics = cfg.diagnostics;
    return m;
}

namespace detail {

inline IonState ion_state_after(PreparationResult prep, Branch branch) {
    if (prep == PreparationResult::transfer_failed) return IonState::down;
    if (prep == PreparationResult::pump_failed) return IonState::up;
    return branch == Branch::nu0 ? IonState::down : IonState::up;
}

inline PhotonFrequency frequency_of(Branch b) {
    // π light ends in S|1,−1⟩ and sits with ν1 on the spectrometer.
    return b == Branch::nu0 ? PhotonFrequency::nu0 : PhotonFrequency::nu1;
}

inline PhotonOutcome outcome_of(PhotonFrequency f) {
    return f == PhotonFrequency::nu0 ? PhotonOutcome::nu0 : PhotonOutcome::nu1;
}

}  // namespace detail

/// One shot. Every stage draws from the shot's own counter stream.
inline ClickRecord run_shot(const ShotModel& m, std::uint64_t seed, std::uint64_t shot) {
    auto rng = make_stream(seed, StreamDomain::shot, shot);
    ShotTruth truth;

    const double u_prep = uniform01(rng);
    truth.prep = u_prep < m.p_ready                         ? PreparationResult::ready
                 : u_prep < m.p_ready + m.p_transfer_failed ? PreparationResult::transfer_failed
                                                            : PreparationResult::pump_failed;
    const double u_branch = uniform01(rng);
    if (truth.prep == PreparationResult::ready) {
        truth.branch = u_branch < m.p_nu1                    ? Branch::nu1
                       : u_branch < m.p_nu1 + m.p_nu0          ? Branch::nu0
                       : u_branch < m.p_nu1 + m.p_nu0 + m.p_pi ? Branch::pi
                                                               : Branch::none;
    }
    truth.ion = detail::ion_state_after(truth.prep, truth.branch);

    PhotonOutcome photon = PhotonOutcome::none;
    const double u_collect = uniform01(rng);
    const double u_survive = uniform01(rng);
    if (truth.branch != Branch::none) {
        const double p_collect = truth.branch == Branch::pi ? m.p_collect_pi : m.p_collect_sigma;
        if (u_collect < p_collect && u_survive < m.p_survive) {
            photon = detail::outcome_of(classify_photon(detail::frequency_of(truth.branch), m.spectrometer, rng));
        }
    }
    if (m.p_dark_click > 0.0) {
        const bool d0 = bernoulli(rng, m.p_dark_click);
        const bool d1 = bernoulli(rng, m.p_dark_click);
        if (photon == PhotonOutcome::none && d0 != d1) {
            photon = d0 ? PhotonOutcome::nu0 : PhotonOutcome::nu1;
            truth.dark_click = true;
        }
    }

    ClickRecord rec;
    rec.shot = shot;
    rec.photon = photon;
    rec.ion = simulate_readout(truth.ion, m.readout, rng).classified;
    rec.timestamp = static_cast<double>(shot) * m.cycle_time;
    if (m.diagnostics) rec.truth = truth;
    return rec;
}

/// One way a shot can end in a click, with its probability.
struct ClickPath {
    PreparationResult prep;
    Branch branch;
    IonState ion;
    PhotonOutcome detected;
    bool dark_click;
    double probability;
};

/// Exhaustive enumeration of click-producing stage outcomes.
inline std::vector<ClickPath> enumerate_click_paths(const ShotModel& m) {
    std::vector<ClickPath> paths;
    const double pd = m.p_dark_click;
    const std::pair<PreparationResult, double> preps[] = {{PreparationResult::ready, m.p_ready},
                                                          {PreparationResult::transfer_failed, m.p_transfer_failed},
                                                          {PreparationResult::pump_failed, m.p_pump_failed}};
    for (const auto& [prep, p_prep] : preps) {
        if (p_prep <= 0.0) continue;
        std::vector<std::pair<Branch, double>> branches;
        if (prep == PreparationResult::ready) {
            branches = {{Branch::nu1, m.p_nu1},
                        {Branch::nu0, m.p_nu0},
                        {Branch::pi, m.p_pi},
                        {Branch::none, 1.0 - m.p_nu1 - m.p_nu0 - m.p_pi}};
        } else {
            branches = {{Branch::none, 1.0}};
        }
        for (const auto& [branch, p_branch] : branches) {
            const double p = p_prep * p_branch;
            if (p <= 0.0) continue;
            const IonState ion = detail::ion_state_after(prep, branch);
            double p_real = 0.0;
            if (branch != Branch::none) {
                p_real = (branch == Branch::pi ? m.p_collect_pi : m.p_collect_sigma) * m.p_survive;
                const auto truth_f = detail::frequency_of(branch);
                const double right = m.spectrometer.correct(truth_f);
                const auto wrong_f = truth_f == PhotonFrequency::nu0 ? PhotonFrequency::nu1 : PhotonFrequency::nu0;
                paths.push_back({prep, branch, ion, detail::outcome_of(truth_f), false, p * p_real * right});
                paths.push_back({prep, branch, ion, detail::outcome_of(wrong_f), false, p * p_real * (1.0 - right)});
            }
            const double p_single_dark = pd * (1.0 - pd);
            paths.push_back({prep, branch, ion, PhotonOutcome::nu0, true, p * (1.0 - p_real) * p_single_dark});
            paths.push_back({prep, branch, ion, PhotonOutcome::nu1, true, p * (1.0 - p_real) * p_single_dark});
        }
    }
    std::erase_if(paths, [](const ClickPath& c) { return !(c.probability > 0.0); });
    return paths;
}

inline double click_probability(const ShotModel& m) {
    double p = 0.0;
    for (const auto& path : enumerate_click_paths(m)) p += path.probability;
    return p;
}

struct ExperimentSummary {
    std::uint64_t shots = 0;
    std::uint64_t clicks = 0;
    std::uint64_t prepared = 0;   // diagnostics only
    std::uint64_t generated = 0;  // diagnostics only
    std::uint64_t counts[2][2] = {{0, 0}, {0, 0}};  // [photon ν0/ν1][ion ↓/↑]
    double analytic_click_probability = 0.0;
    double cycle_time = 0.0;

    double observed_rate() const { return shots ? static_cast<double>(clicks) / shots : 0.0; }
    double expected_clicks() const { return analytic_click_probability * static_cast<double>(shots); }
    double binomial_sigma_clicks() const {
        const double p = analytic_click_probability;
        return std::sqrt(static_cast<double>(shots) * p * (1.0 - p));
    }

    void add(const ClickRecord& r) {
        ++shots;
        if (r.truth) {
            prepared += r.truth->prep == PreparationResult::ready;
            generated += r.truth->branch == Branch::nu0 || r.truth->branch == Branch::nu1;
        }
        if (!r.is_click()) return;
        ++clicks;
        ++counts[r.photon == PhotonOutcome::nu1][r.ion == IonState::up];
    }

    void merge(const ExperimentSummary& o) {
        shots += o.shots;
        clicks += o.clicks;
        prepared += o.prepared;
        generated += o.generated;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) counts[i][j] += o.counts[i][j];
    }
};

using RecordSink = std::function<void(const ClickRecord&)>;

/// Runs `cfg.shots` shots on `workers` threads. Records reach `sink` in
/// shot order and are identical for any worker count.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg, const RecordSink& sink = {},
                                        unsigned workers = 1) {
    const ShotModel model = resolve_model(cfg);
    workers = std::max(1u, workers);
    constexpr std::uint64_t kChunk = 1 << 15;

    ExperimentSummary summary;
    summary.analytic_click_probability = click_probability(model);
    summary.cycle_time = model.cycle_time;

    std::vector<std::vector<ClickRecord>> batch(workers);
    for (std::uint64_t begin = 0; begin < cfg.shots; begin += kChunk * workers) {
        auto fill = [&](unsigned w) {
            const std::uint64_t lo = begin + w * kChunk;
            const std::uint64_t hi = std::min(cfg.shots, lo + kChunk);
            auto& out = batch[w];
            out.clear();
            for (std::uint64_t s = lo; s < hi; ++s) out.push_back(run_shot(model, cfg.seed, s));
        };
        if (workers == 1) {
            fill(0);
        } else {
            std::vector<std::jthread> pool;
            for (unsigned w = 0; w < workers; ++w) pool.emplace_back(fill, w);
        }
        for (const auto& chunk : batch) {
            for (const auto& rec : chunk) {
                summary.add(rec);
                if (sink) sink(rec);
            }
        }
    }
    return summary;
}

/// Draws `clicks` records directly from the click-conditioned distribution.
/// Shot indices advance by geometric gaps at the analytic click rate so
/// timestamps look like a real run.
inline std::vector<ClickRecord> importance_mode(const ExperimentConfig& cfg, std::uint64_t clicks) {
    const ShotModel model = resolve_model(cfg);
    const auto paths = enumerate_click_paths(model);
    double total = 0.0;
    for (const auto& p : paths) total += p.probability;
    if (!(total > 0.0)) throw Error("no-clicks", "configuration can never produce a click");
    std::vector<double> cumulative;
    double acc = 0.0;
    for (const auto& p : paths) cumulative.push_back(acc += p.probability / total);

    std::vector<ClickRecord> out;
    out.reserve(clicks);
    std::uint64_t shot = 0;
    const double p_click = std::min(1.0, total);
    for (std::uint64_t i = 0; i < clicks; ++i) {
        auto rng = make_stream(cfg.seed, StreamDomain::conditioned_click, i);
        std::uint64_t gap = 1;
        if (p_click < 1.0) {
            gap += static_cast<std::uint64_t>(std::floor(std::log1p(-uniform01(rng)) / std::log1p(-p_click)));
        }
        shot += gap;
        const double u = uniform01(rng);
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        const auto& path = paths[std::min<std::size_t>(it - cumulative.begin(), paths.size() - 1)];

        ClickRecord rec;
        rec.shot = shot - 1;
        rec.photon = path.detected;
        rec.ion = simulate_readout(path.ion, model.readout, rng).classified;
        rec.timestamp = static_cast<double>(rec.shot) * model.cycle_time;
        if (model.diagnostics) rec.truth = ShotTruth{path.prep, path.branch, path.ion, path.dark_click};
        out.push_back(rec);
    }
    return out;
}

}  // namespace ionsim
