#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>

#include "ionsim/atom_model.hpp"
#include "ionsim/error.hpp"
#include "ionsim/units.hpp"

// Dense Lindblad evolution of the 8-level S1/2 ⊕ P1/2 system.
//
// The Hamiltonian is written in a rotating frame chosen per drive, with the
// rotating-wave approximation applied to every coupling. Spontaneous emission
// uses one collapse operator per decay channel, L_k = √(Γ b_k) |lower⟩⟨upper|,
// and the integrated emission ∫ Tr(L_k ρ L_k†) dt is carried alongside ρ so
// channel yields come out of the same adaptive integration.
namespace ionsim {

using Complex = std::complex<double>;
using Matrix8 = Eigen::Matrix<Complex, 8, 8>;

struct DensityMatrix {
    Matrix8 rho = Matrix8::Zero();

    static DensityMatrix pure(const HyperfineLevel& level) {
        DensityMatrix out;
        const auto i = index_of(level);
        out.rho(i, i) = 1.0;
        return out;
    }

    double population(const HyperfineLevel& level) const {
        const auto i = index_of(level);
        return rho(i, i).real();
    }

    std::array<double, kNumLevels> populations() const {
        std::array<double, kNumLevels> out{};
        for (std::size_t i = 0; i < kNumLevels; ++i) out[i] = rho(i, i).real();
        return out;
    }

    double p_manifold_population() const {
        double p = 0.0;
        for (std::size_t i = 4; i < kNumLevels; ++i) p += rho(i, i).real();
        return p;
    }

    Complex trace() const { return rho.trace(); }
    double hermiticity_error() const { return (rho - rho.adjoint()).norm(); }
    double purity() const { return (rho * rho).trace().real(); }

    double min_eigenvalue() const {
        const Matrix8 h = 0.5 * (rho + rho.adjoint());
        Eigen::SelfAdjointEigenSolver<Matrix8> solver(h, Eigen::EigenvaluesOnly);
        return solver.eigenvalues().minCoeff();
    }
};

struct InvariantTolerances {
    double hermiticity = 1e-10;
    double trace = 1e-9;
    double positivity = 1e-9;
};

/// Empty string when all invariants hold, otherwise a description of the
/// first violation.
inline std::string check_invariants(const DensityMatrix& state, const InvariantTolerances& tol = {}) {
    if (const double h = state.hermiticity_error(); h > tol.hermiticity) {
        return "hermiticity error " + std::to_string(h);
    }
    if (const Complex tr = state.trace(); std::abs(tr - 1.0) > tol.trace) {
        return "trace deviates from 1 by " + std::to_string(std::abs(tr - 1.0));
    }
    if (const double lo = state.min_eigenvalue(); lo < -tol.positivity) {
        return "negative eigenvalue " + std::to_string(lo);
    }
    return {};
}

enum class Envelope { rectangular };

/// Coherent coupling between two levels, active on [start, stop).
/// `rabi` is an angular frequency (rad/s); `detuning` is drive minus
/// resonance in Hz.
struct DriveTerm {
    HyperfineLevel lower;
    HyperfineLevel upper;
    double rabi = 0.0;
    double detuning = 0.0;
    double phase = 0.0;
    Envelope envelope = Envelope::rectangular;
    double start = 0.0;
    double stop = 0.0;

    bool active(double t) const { return t >= start && t < stop; }

    void validate() const {
        if (!is_drivable(lower, upper)) {
            throw invalid_argument("drive couples a non-dipole-allowed pair " + to_string(lower) +
                                   " <-> " + to_string(upper));
        }
        if (!(rabi >= 0.0) || !std::isfinite(rabi)) throw invalid_argument("drive Rabi frequency must be >= 0");
        if (!(stop > start)) throw invalid_argument("drive stop time must exceed start time");
        if (!std::isfinite(detuning) || !std::isfinite(phase)) throw invalid_argument("drive parameters must be finite");
    }
};

struct CollapseOperator {
    TransitionChannel channel;
    double rate = 0.0;  // Γ · branching fraction, 1/s

    Matrix8 dense() const {
        Matrix8 out = Matrix8::Zero();
        out(index_of(channel.lower), index_of(channel.upper)) = std::sqrt(rate);
        return out;
    }
};

struct CollapseSet {
    double gamma = 0.0;
    std::vector<CollapseOperator> operators;

    static CollapseSet from_lifetime(double lifetime) {
        if (!(lifetime > 0.0)) throw invalid_argument("excited-state lifetime must be positive");
        return from_rate(1.0 / lifetime);
    }

    /// Γ = 0 still yields the twelve channels (at zero rate) so emission
    /// bookkeeping keeps a fixed shape.
    static CollapseSet from_rate(double gamma) {
        if (!(gamma >= 0.0)) throw invalid_argument("decay rate must be >= 0");
        CollapseSet out;
        out.gamma = gamma;
        for (const auto& ch : all_decay_channels()) out.operators.push_back({ch, gamma * ch.branching});
        return out;
    }

    Matrix8 sum_dagger_product() const {
        Matrix8 out = Matrix8::Zero();
        for (const auto& op : operators) {
            const Matrix8 l = op.dense();
            out += l.adjoint() * l;
        }
        return out;
    }
};

/// Diagonal rotating-frame energies (rad/s) implied by a set of drives.
/// Each connected component of the drive graph is anchored at zero on its
/// first level; a closed loop whose detunings do not sum to zero has no
/// common frame and is rejected.
inline std::array<double, kNumLevels> rotating_frame_energies(std::span<const DriveTerm> drives) {
    std::array<std::optional<double>, kNumLevels> energy{};
    struct Edge {
        std::size_t to;
        double shift;
    };
    std::array<std::vector<Edge>, kNumLevels> adjacency;
    double scale = 1.0;
    for (const auto& d : drives) {
        const auto l = index_of(d.lower);
        const auto u = index_of(d.upper);
        const double delta = units::two_pi * d.detuning;
        adjacency[l].push_back({u, -delta});
        adjacency[u].push_back({l, +delta});
        scale = std::max(scale, std::abs(delta));
    }
    for (std::size_t root = 0; root < kNumLevels; ++root) {
        if (energy[root]) continue;
        energy[root] = 0.0;
        std::queue<std::size_t> todo;
        todo.push(root);
        while (!todo.empty()) {
            const auto i = todo.front();
            todo.pop();
            for (const auto& e : adjacency[i]) {
                const double candidate = *energy[i] + e.shift;
                if (!energy[e.to]) {
                    energy[e.to] = candidate;
                    todo.push(e.to);
                } else if (std::abs(*energy[e.to] - candidate) > 1e-12 * scale) {
                    throw invalid_argument("drive set forms a loop with no common rotating frame");
                }
            }
        }
    }
    std::array<double, kNumLevels> out{};
    for (std::size_t i = 0; i < kNumLevels; ++i) out[i] = *energy[i];
    return out;
}

/// Rotating-frame Hamiltonian (ħ = 1, rad/s) for the drives active at `t`.
/// The frame is fixed by all drives in the list, so detuning terms persist
/// between pulses while off-diagonal couplings switch with the envelopes.
inline Matrix8 assemble_hamiltonian(std::span<const DriveTerm> drives, double t) {
    for (const auto& d : drives) d.validate();
    const auto frame = rotating_frame_energies(drives);
    Matrix8 h = Matrix8::Zero();
    for (std::size_t i = 0; i < kNumLevels; ++i) h(i, i) = frame[i];
    for (const auto& d : drives) {
        if (!d.active(t)) continue;
        const auto l = index_of(d.lower);
        const auto u = index_of(d.upper);
        const Complex coupling = 0.5 * d.rabi * std::polar(1.0, d.phase);
        h(u, l) += coupling;
        h(l, u) += std::conj(coupling);
    }
    return h;
}

struct StepControl {
    double abs_tol = 1e-12;
    double rel_tol = 1e-10;
    /// Spacing of stored trajectory samples; 0 keeps only the end points.
    double sample_interval = 0.0;
    /// Smallest step tolerated before the integration is declared broken.
    /// Zero means 1e-14 of the span.
    double min_step = 0.0;
    std::size_t max_steps = 5'000'000;
    bool check_invariants = true;
    InvariantTolerances tolerances{};
};

struct TrajectorySample {
    double time = 0.0;
    DensityMatrix state;
    std::vector<double> emissions;
};

struct EvolutionResult {
    std::vector<TrajectorySample> trajectory;
    std::vector<TransitionChannel> channels;
    std::vector<double> cumulative_emission;
    std::array<double, kNumLevels> final_populations{};
    DensityMatrix final_state;
    std::size_t accepted_steps = 0;

    double emission(const HyperfineLevel& upper, const HyperfineLevel& lower) const {
        for (std::size_t k = 0; k < channels.size(); ++k) {
            if (channels[k].upper == upper && channels[k].lower == lower) return cumulative_emission[k];
        }
        return 0.0;
    }
};

namespace detail {

inline constexpr std::size_t kRhoReals = 2 * kNumLevels * kNumLevels;

using OdeState = std::vector<double>;

inline Eigen::Map<Matrix8> as_matrix(OdeState& x) {
    return Eigen::Map<Matrix8>(reinterpret_cast<Complex*>(x.data()));
}
inline Eigen::Map<const Matrix8> as_matrix(const OdeState& x) {
    return Eigen::Map<const Matrix8>(reinterpret_cast<const Complex*>(x.data()));
}

struct LindbladRhs {
    Matrix8 hamiltonian;
    std::vector<std::size_t> lower;
    std::vector<std::size_t> upper;
    std::vector<double> rate;
    std::array<double, kNumLevels> half_loss{};  // ½ Σ_k γ_k on each upper level

    void operator()(const OdeState& x, OdeState& dxdt, double /*t*/) const {
        const auto rho = as_matrix(x);
        auto drho = as_matrix(dxdt);
        const Complex minus_i(0.0, -1.0);
        drho.noalias() = minus_i * (hamiltonian * rho);
        drho.noalias() -= minus_i * (rho * hamiltonian);
        for (std::size_t i = 0; i < kNumLevels; ++i) {
            for (std::size_t j = 0; j < kNumLevels; ++j) {
                drho(i, j) -= (half_loss[i] + half_loss[j]) * rho(i, j);
            }
        }
        for (std::size_t k = 0; k < rate.size(); ++k) {
            const double flux = rate[k] * rho(upper[k], upper[k]).real();
            drho(lower[k], lower[k]) += flux;
            dxdt[kRhoReals + k] = flux;
        }
    }
};

}  // namespace detail

/// Integrates ρ from t_begin to t_end. Drive switch-on/off times and sample
/// times are integration breakpoints, so rectangular envelopes never sit
/// inside a step. No renormalisation is applied: an invariant violation on
/// any accepted step throws.
inline EvolutionResult evolve(const DensityMatrix& initial, std::span<const DriveTerm> drives,
                              const CollapseSet& collapse, double t_begin, double t_end,
                              const StepControl& control = {}) {
    namespace odeint = boost::numeric::odeint;
    if (!(t_end > t_begin)) throw invalid_argument("evolution time span must be positive");
    if (const auto why = check_invariants(initial, control.tolerances); !why.empty()) {
        throw invalid_argument("initial density matrix invalid: " + why);
    }
    for (const auto& d : drives) d.validate();

    const std::size_t n_channels = collapse.operators.size();
    detail::LindbladRhs rhs;
    for (const auto& op : collapse.operators) {
        rhs.lower.push_back(index_of(op.channel.lower));
        rhs.upper.push_back(index_of(op.channel.upper));
        rhs.rate.push_back(op.rate);
        rhs.half_loss[index_of(op.channel.upper)] += 0.5 * op.rate;
    }

    std::vector<double> breakpoints{t_begin, t_end};
    for (const auto& d : drives) {
        for (double edge : {d.start, d.stop}) {
            if (edge > t_begin && edge < t_end) breakpoints.push_back(edge);
        }
    }
    std::vector<double> sample_times{t_begin};
    if (control.sample_interval > 0.0) {
        for (double ts = t_begin + control.sample_interval; ts < t_end; ts += control.sample_interval) {
            sample_times.push_back(ts);
            breakpoints.push_back(ts);
        }
    }
    sample_times.push_back(t_end);
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    double fastest = collapse.gamma;
    for (const auto& d : drives) {
        fastest = std::max({fastest, d.rabi, units::two_pi * std::abs(d.detuning)});
    }
    const double span = t_end - t_begin;
    const double min_step = control.min_step > 0.0 ? control.min_step : 1e-14 * span;

    detail::OdeState x(detail::kRhoReals + n_channels, 0.0);
    detail::as_matrix(x) = initial.rho;

    EvolutionResult result;
    result.channels.reserve(n_channels);
    for (const auto& op : collapse.operators) result.channels.push_back(op.channel);

    auto snapshot = [&](double t) {
        TrajectorySample s;
        s.time = t;
        s.state.rho = detail::as_matrix(x);
        s.emissions.assign(x.begin() + detail::kRhoReals, x.end());
        result.trajectory.push_back(std::move(s));
    };
    snapshot(t_begin);
    std::size_t next_sample = 1;

    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<detail::OdeState>>(
        control.abs_tol, control.rel_tol);
    double dt = fastest > 0.0 ? 1e-2 / fastest : span;
    DensityMatrix probe;

    auto system = [&rhs](const detail::OdeState& s, detail::OdeState& ds, double t) { rhs(s, ds, t); };

    for (std::size_t seg = 0; seg + 1 < breakpoints.size(); ++seg) {
        const double seg_begin = breakpoints[seg];
        const double seg_end = breakpoints[seg + 1];
        rhs.hamiltonian = assemble_hamiltonian(drives, 0.5 * (seg_begin + seg_end));
        stepper.reset();
        double t = seg_begin;
        while (t < seg_end) {
            const bool reaches_end = dt >= seg_end - t;
            double step = reaches_end ? seg_end - t : dt;
            const auto outcome = stepper.try_step(system, x, t, step);
            if (outcome == odeint::fail) {
                dt = step;
                if (dt < min_step) {
                    throw Error("step-underflow", "integrator step underflow at t = " + std::to_string(t) +
                                                      " s (step " + std::to_string(dt) + " s)");
                }
                continue;
            }
            // try_step advanced t and proposed the next step size.
            if (reaches_end) t = seg_end;
            dt = reaches_end ? std::max(dt, step) : step;
            if (++result.accepted_steps > control.max_steps) {
                throw Error("step-limit", "integrator exceeded " + std::to_string(control.max_steps) +
                                              " steps at t = " + std::to_string(t) + " s");
            }
            if (control.check_invariants) {
                probe.rho = detail::as_matrix(x);
                if (auto why = check_invariants(probe, control.tolerances); !why.empty()) {
                    throw Error("invariant-violation",
                                "density matrix invariant broken at t = " + std::to_string(t) + " s: " + why);
                }
            }
        }
        while (next_sample < sample_times.size() && sample_times[next_sample] <= seg_end) {
            snapshot(sample_times[next_sample]);
            ++next_sample;
        }
    }

    result.final_state.rho = detail::as_matrix(x);
    result.final_populations = result.final_state.populations();
    result.cumulative_emission.assign(x.begin() + detail::kRhoReals, x.end());
    return result;
}

struct GenerationProbabilities {
    double nu1 = 0.0;  // decay into |↑⟩
    double nu0 = 0.0;  // decay into |↓⟩
    double residual_excited = 0.0;
    std::optional<std::string> warning;
};

/// Photon yields read off the absorbing qubit populations. Both |↑⟩ and |↓⟩
/// are dark to the excitation pulse, so their final populations equal the
/// probability of the corresponding photon. Warns if the P manifold has not
/// emptied.
inline GenerationProbabilities photon_generation_probabilities(const EvolutionResult& result) {
    GenerationProbabilities out;
    out.nu1 = result.final_state.population(levels::up);
    out.nu0 = result.final_state.population(levels::down);
    out.residual_excited = result.final_state.p_manifold_population();
    if (out.residual_excited > 1e-4) {
        out.warning = "P-manifold population " + std::to_string(out.residual_excited) +
                      " at final time; ring-down too short";
    }
    return out;
}

}  // namespace ionsim
