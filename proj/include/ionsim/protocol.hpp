#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "ionsim/atom_model.hpp"
#include "ionsim/error.hpp"
#include "ionsim/lindblad.hpp"
#include "ionsim/units.hpp"

// The experimental cycle: optical pumping, microwave transfer, optical
// excitation, photon gate, ion readout. Timing bookkeeping plus the two
// dynamical pieces that set the photon rate: the detuned microwave π-pulse
// and the calibrated optical excitation pulse.
namespace ionsim {

struct ProtocolTimings {
    double pump = 10.0 * units::us;
    double microwave = 17.0 * units::us;
    double excitation = 51.0 * units::ns;
    double photon_gate = 200.0 * units::ns;
    double readout = 1.38 * units::ms;
    /// Measured cycle length; whatever the listed steps leave over is dead time.
    double cycle_time = 1411.0 * units::us;
};

struct ProtocolStep {
    std::string name;
    double duration = 0.0;
};

struct ProtocolSequence {
    std::vector<ProtocolStep> steps;

    double total() const {
        double sum = 0.0;
        for (const auto& s : steps) sum += s.duration;
        return sum;
    }
    double cycle_rate() const { return 1.0 / total(); }
};

inline constexpr double kReferenceCycleTime = 1411.0 * units::us;

/// Ordered timeline with a trailing dead-time step that pads the cycle to
/// `timings.cycle_time`. A cycle_time of zero means "no padding".
inline ProtocolSequence build_sequence(const ProtocolTimings& timings) {
    ProtocolSequence seq;
    seq.steps = {
        {"optical pump", timings.pump},
        {"microwave pi-pulse", timings.microwave},
        {"optical excitation", timings.excitation},
        {"photon gate", timings.photon_gate},
        {"ion readout", timings.readout},
    };
    for (const auto& s : seq.steps) {
        if (!(s.duration > 0.0)) throw invalid_argument("protocol step '" + s.name + "' must have positive duration");
    }
    const double active = seq.total();
    if (timings.cycle_time > 0.0) {
        if (timings.cycle_time < active) {
            throw invalid_argument("cycle time is shorter than the sum of protocol steps");
        }
        if (timings.cycle_time > active) seq.steps.push_back({"dead time", timings.cycle_time - active});
    }
    return seq;
}

/// The sequence must fit the reference 1411 µs cycle to within 3 %.
inline bool within_reference_cycle(const ProtocolSequence& seq) {
    return seq.total() <= kReferenceCycleTime * 1.03;
}

/// Two-level Rabi formula: Ω²/Ω'² · sin²(Ω' t / 2), Ω' = √(Ω² + (2πδ)²).
/// `rabi` in rad/s, `detuning` in Hz.
inline double rabi_transfer_probability(double rabi, double detuning, double duration) {
    if (!(rabi >= 0.0) || !(duration >= 0.0)) throw invalid_argument("Rabi frequency and duration must be >= 0");
    const double delta = units::two_pi * detuning;
    const double generalized_sq = rabi * rabi + delta * delta;
    if (generalized_sq == 0.0) return 0.0;
    const double s = std::sin(0.5 * std::sqrt(generalized_sq) * duration);
    return rabi * rabi / generalized_sq * s * s;
}

inline double rabi_from_pi_time(double pi_time) {
    if (!(pi_time > 0.0)) throw invalid_argument("pi time must be positive");
    return std::numbers::pi / pi_time;
}

struct MicrowaveSettings {
    double pi_time = 17.0 * units::us;
    double frequency = 12.637855 * units::GHz;
    double detuning = 9.0 * units::kHz;
    double detuning_sigma = 2.0 * units::kHz;
    bool sample_detuning = false;
};

/// Zeeman shift per mF that makes the nominal drive frequency sit `detuning`
/// away from the S|0,0⟩ ↔ S|1,−1⟩ resonance. Informational only; the field
/// magnitude is not an input anywhere.
inline double implied_zeeman_shift(const MicrowaveSettings& mw, const LevelSplittings& s) {
    // resonance = ground − z, drive = resonance + detuning
    return s.ground_hyperfine - (mw.frequency - mw.detuning);
}

struct PreparationOutcome {
    double ready = 0.0;            // S|1,−1⟩
    double transfer_failed = 0.0;  // left in |↓⟩
    double pump_failed = 0.0;      // elsewhere in F=1
};

inline PreparationOutcome simulate_state_prep(double pump_fidelity, const MicrowaveSettings& mw,
                                              double detuning) {
    if (!(pump_fidelity >= 0.0 && pump_fidelity <= 1.0)) {
        throw invalid_argument("pump fidelity must lie in [0, 1]");
    }
    const double transfer = rabi_transfer_probability(rabi_from_pi_time(mw.pi_time), detuning, mw.pi_time);
    return {pump_fidelity * transfer, pump_fidelity * (1.0 - transfer), 1.0 - pump_fidelity};
}

inline PreparationOutcome simulate_state_prep(double pump_fidelity, const MicrowaveSettings& mw) {
    return simulate_state_prep(pump_fidelity, mw, mw.detuning);
}

/// Microwave drive S|0,0⟩ ↔ S|1,−1⟩ as a Lindblad drive term.
inline DriveTerm microwave_drive(double rabi, double detuning, double duration) {
    return DriveTerm{levels::down, levels::ready, rabi, detuning, 0.0, Envelope::rectangular, 0.0, duration};
}

/// Population reaching S|1,−1⟩ from |↓⟩ under the full 8-level engine.
inline double lindblad_transfer_probability(double rabi, double detuning, double duration,
                                            const CollapseSet& collapse = CollapseSet::from_rate(0.0),
                                            const StepControl& control = {}) {
    if (duration == 0.0) return 0.0;
    const DriveTerm drive = microwave_drive(rabi, detuning, duration);
    const auto result = evolve(DensityMatrix::pure(levels::down), std::span(&drive, 1), collapse, 0.0, duration, control);
    return result.final_state.population(levels::ready);
}

struct ExcitationPulse {
    double rabi = 0.0;  // rad/s on S|1,−1⟩ ↔ P|1,−1⟩
    double duration = 51.0 * units::ns;
    double lifetime = 8.1 * units::ns;
    double ringdown_lifetimes = 10.0;
    /// Also drive the other π-allowed lines of the same laser, detuned by
    /// their hyperfine and Zeeman offsets.
    bool couple_neighbors = false;
    LevelSplittings splittings{};
};

inline std::vector<DriveTerm> excitation_drives(const ExcitationPulse& pulse) {
    std::vector<DriveTerm> drives{
        {levels::ready, levels::excited, pulse.rabi, 0.0, 0.0, Envelope::rectangular, 0.0, pulse.duration}};
    if (pulse.couple_neighbors) {
        const double laser = resonance_frequency(levels::ready, levels::excited, pulse.splittings);
        const std::pair<HyperfineLevel, HyperfineLevel> neighbors[] = {
            {levels::S1p, levels::P1p}, {levels::S00, levels::P10}, {levels::S10, levels::P00}};
        for (const auto& [lower, upper] : neighbors) {
            drives.push_back({lower, upper, pulse.rabi, transition_detuning(lower, upper, laser, pulse.splittings),
                              0.0, Envelope::rectangular, 0.0, pulse.duration});
        }
    }
    return drives;
}

inline EvolutionResult simulate_excitation(const ExcitationPulse& pulse, const StepControl& control = {}) {
    if (!(pulse.duration > 0.0)) throw invalid_argument("excitation pulse duration must be positive");
    const auto drives = excitation_drives(pulse);
    const auto collapse = CollapseSet::from_lifetime(pulse.lifetime);
    const double t_end = pulse.duration + pulse.ringdown_lifetimes * pulse.lifetime;
    return evolve(DensityMatrix::pure(levels::ready), drives, collapse, 0.0, t_end, control);
}

inline GenerationProbabilities excitation_yield(const ExcitationPulse& pulse, const StepControl& control = {}) {
    return photon_generation_probabilities(simulate_excitation(pulse, control));
}

struct RabiCalibration {
    double rabi = 0.0;
    GenerationProbabilities achieved;
    std::size_t evaluations = 0;
};

/// Finds the optical Rabi frequency at which the pulse leaves `target` in
/// each of |↑⟩ and |↓⟩. The response is monotone in Ω on the bracket; the
/// solver asserts that on every point it evaluates.
inline RabiCalibration calibrate_optical_rabi(double target, ExcitationPulse pulse, const StepControl& control = {}) {
    if (!(target > 0.0)) throw invalid_argument("generation target must be positive");
    if (target >= 0.5) {
        throw Error("unreachable-target", "generation target " + std::to_string(target) +
                                              " is at or above the saturated ceiling 0.5");
    }
    std::vector<std::pair<double, double>> samples;
    auto yield_at = [&](double rabi) {
        pulse.rabi = rabi;
        const auto g = excitation_yield(pulse, control);
        const double y = 0.5 * (g.nu1 + g.nu0);
        samples.emplace_back(rabi, y);
        return y;
    };

    const double gamma = 1.0 / pulse.lifetime;
    double hi = gamma;
    const double cap = 1e3 * gamma;
    while (yield_at(hi) < target) {
        hi *= 2.0;
        if (hi > cap) {
            throw Error("unreachable-target", "generation target " + std::to_string(target) +
                                                  " not reached by this pulse duration");
        }
    }
    boost::uintmax_t max_iter = 100;
    const auto [lo_root, hi_root] = boost::math::tools::toms748_solve(
        [&](double rabi) { return rabi == 0.0 ? -target : yield_at(rabi) - target; }, 0.0, hi, -target,
        samples.back().second - target, boost::math::tools::eps_tolerance<double>(40), max_iter);

    std::sort(samples.begin(), samples.end());
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (samples[i].second + 1e-9 < samples[i - 1].second) {
            throw Error("non-monotone", "generation probability is not monotone in Rabi frequency near " +
                                            std::to_string(samples[i].first) + " rad/s");
        }
    }

    RabiCalibration out;
    out.rabi = 0.5 * (lo_root + hi_root);
    pulse.rabi = out.rabi;
    out.achieved = excitation_yield(pulse, control);
    out.evaluations = samples.size() + 1;
    return out;
}

}  // namespace ionsim
