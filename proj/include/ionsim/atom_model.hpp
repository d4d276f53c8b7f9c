#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "ionsim/error.hpp"
#include "ionsim/units.hpp"

// Level structure of the 171Yb+ S1/2 and P1/2 hyperfine manifolds.
//
// Only the eight levels reachable by the entanglement protocol are modelled.
// The D3/2 leak is omitted: it is repumped in the lab and never shows up in
// the correlation data.
namespace ionsim {

enum class Manifold { S, P };

struct HyperfineLevel {
    Manifold manifold = Manifold::S;
    int F = 0;
    int mF = 0;

    friend constexpr bool operator==(const HyperfineLevel&, const HyperfineLevel&) = default;
};

constexpr bool is_valid(const HyperfineLevel& level) {
    return (level.F == 0 || level.F == 1) && (level.mF >= -level.F && level.mF <= level.F);
}

inline constexpr std::size_t kNumLevels = 8;

namespace levels {
inline constexpr HyperfineLevel S00{Manifold::S, 0, 0};
inline constexpr HyperfineLevel S1m{Manifold::S, 1, -1};
inline constexpr HyperfineLevel S10{Manifold::S, 1, 0};
inline constexpr HyperfineLevel S1p{Manifold::S, 1, 1};
inline constexpr HyperfineLevel P00{Manifold::P, 0, 0};
inline constexpr HyperfineLevel P1m{Manifold::P, 1, -1};
inline constexpr HyperfineLevel P10{Manifold::P, 1, 0};
inline constexpr HyperfineLevel P1p{Manifold::P, 1, 1};

// Qubit and protocol aliases.
inline constexpr HyperfineLevel down = S00;   // |↓⟩, partner of ν0
inline constexpr HyperfineLevel up = S10;     // |↑⟩, partner of ν1
inline constexpr HyperfineLevel ready = S1m;  // microwave target, optical pulse source
inline constexpr HyperfineLevel excited = P1m;
}  // namespace levels

inline constexpr std::array<HyperfineLevel, kNumLevels> kCanonicalLevels{
    levels::S00, levels::S1m, levels::S10, levels::S1p,
    levels::P00, levels::P1m, levels::P10, levels::P1p,
};

inline std::string to_string(const HyperfineLevel& level) {
    return std::string(level.manifold == Manifold::S ? "S" : "P") + "|" + std::to_string(level.F) +
           "," + std::to_string(level.mF) + ">";
}

// Canonical ordering: S manifold before P, F ascending, mF ascending.
constexpr std::size_t index_of(const HyperfineLevel& level) {
    if (!is_valid(level)) throw invalid_argument("not a hyperfine level: " + to_string(level));
    const std::size_t base = level.manifold == Manifold::S ? 0 : 4;
    return base + (level.F == 0 ? 0 : static_cast<std::size_t>(level.mF + 2));
}

class Basis {
public:
    constexpr std::size_t size() const { return kNumLevels; }
    constexpr const HyperfineLevel& operator[](std::size_t i) const { return kCanonicalLevels[i]; }
    constexpr std::size_t index(const HyperfineLevel& level) const { return index_of(level); }
    constexpr auto begin() const { return kCanonicalLevels.begin(); }
    constexpr auto end() const { return kCanonicalLevels.end(); }
};

constexpr Basis build_basis() { return Basis{}; }

/// One spontaneous-decay path P → S. `q` is the photon's spherical
/// polarization index, so mF(lower) = mF(upper) - q.
struct TransitionChannel {
    HyperfineLevel upper;
    HyperfineLevel lower;
    int q = 0;
    double branching = 0.0;
};

/// Decay branches of one P1/2 level. The fractions are the squared
/// angular coupling coefficients for J = 1/2 → 1/2 with I = 1/2; every
/// allowed branch carries 1/3 and F=1,mF=0 → F=1,mF=0 vanishes. The test
/// suite rederives them from Clebsch-Gordan algebra.
inline std::vector<TransitionChannel> branching_table(const HyperfineLevel& upper) {
    if (!is_valid(upper) || upper.manifold != Manifold::P) {
        throw invalid_argument("branching_table needs a P-manifold level, got " + to_string(upper));
    }
    constexpr double third = 1.0 / 3.0;
    std::vector<TransitionChannel> out;
    for (const auto& lower : kCanonicalLevels) {
        if (lower.manifold != Manifold::S) continue;
        const int q = upper.mF - lower.mF;
        if (std::abs(q) > 1) continue;
        if (upper.F == 0 && lower.F == 0) continue;
        if (upper.F == 1 && lower.F == 1 && upper.mF == 0 && lower.mF == 0) continue;
        out.push_back({upper, lower, q, third});
    }
    return out;
}

/// All twelve decay channels in canonical (upper, lower) order.
inline std::vector<TransitionChannel> all_decay_channels() {
    std::vector<TransitionChannel> out;
    for (const auto& level : kCanonicalLevels) {
        if (level.manifold != Manifold::P) continue;
        auto rows = branching_table(level);
        out.insert(out.end(), rows.begin(), rows.end());
    }
    return out;
}

inline std::string channel_label(const TransitionChannel& ch) {
    return to_string(ch.upper) + "->" + to_string(ch.lower);
}

struct LevelSplittings {
    double ground_hyperfine = 12.6428 * units::GHz;
    double excited_hyperfine = 2.1 * units::GHz;
    double optical_carrier = 811.3 * units::THz;
    /// Linear Zeeman shift of S F=1 per unit mF. The P F=1 shift uses the
    /// g_F ratio 1/3 relative to the ground state.
    double zeeman_shift_per_mF = 0.0;

    void validate() const {
        if (!(ground_hyperfine > 0) || !(excited_hyperfine > 0) || !(optical_carrier > 0)) {
            throw invalid_argument("level splittings must be positive");
        }
        if (!std::isfinite(zeeman_shift_per_mF)) throw invalid_argument("zeeman shift must be finite");
    }
};

inline constexpr double kExcitedZeemanRatio = 1.0 / 3.0;

/// Absolute level frequency with S|0,0⟩ at zero and P|0,0⟩ at the carrier.
inline double level_frequency(const HyperfineLevel& level, const LevelSplittings& s) {
    if (level.manifold == Manifold::S) {
        return level.F == 0 ? 0.0 : s.ground_hyperfine + s.zeeman_shift_per_mF * level.mF;
    }
    return level.F == 0
               ? s.optical_carrier
               : s.optical_carrier + s.excited_hyperfine +
                     kExcitedZeemanRatio * s.zeeman_shift_per_mF * level.mF;
}

inline double resonance_frequency(const HyperfineLevel& lower, const HyperfineLevel& upper,
                                  const LevelSplittings& s) {
    return level_frequency(upper, s) - level_frequency(lower, s);
}

/// Electric-dipole S↔P coupling: |ΔmF| ≤ 1, no F=0↔F=0, and the
/// mF=0 ↔ mF=0 line between F=1 levels is dark.
inline bool is_optical_dipole_allowed(const HyperfineLevel& lower, const HyperfineLevel& upper) {
    if (!is_valid(lower) || !is_valid(upper)) return false;
    if (lower.manifold != Manifold::S || upper.manifold != Manifold::P) return false;
    if (std::abs(upper.mF - lower.mF) > 1) return false;
    if (lower.F == 0 && upper.F == 0) return false;
    if (lower.F == 1 && upper.F == 1 && lower.mF == 0 && upper.mF == 0) return false;
    return true;
}

/// Magnetic-dipole ground hyperfine coupling S F=0 ↔ S F=1.
inline bool is_microwave_allowed(const HyperfineLevel& lower, const HyperfineLevel& upper) {
    if (!is_valid(lower) || !is_valid(upper)) return false;
    if (lower.manifold != Manifold::S || upper.manifold != Manifold::S) return false;
    if (lower.F != 0 || upper.F != 1) return false;
    return std::abs(upper.mF - lower.mF) <= 1;
}

inline bool is_drivable(const HyperfineLevel& lower, const HyperfineLevel& upper) {
    return is_optical_dipole_allowed(lower, upper) || is_microwave_allowed(lower, upper);
}

/// Signed detuning (drive − resonance) in Hz.
inline double transition_detuning(const HyperfineLevel& lower, const HyperfineLevel& upper,
                                  double drive_frequency, const LevelSplittings& s) {
    return drive_frequency - resonance_frequency(lower, upper, s);
}

inline double transition_detuning(const TransitionChannel& ch, double drive_frequency,
                                  const LevelSplittings& s) {
    return transition_detuning(ch.lower, ch.upper, drive_frequency, s);
}

/// Photonic frequency label carried by a decay into the qubit subspace.
enum class PhotonFrequency { nu0, nu1 };

/// ν1 ↔ |↑⟩, ν0 ↔ |↓⟩; any other destination is outside the qubit.
inline std::optional<PhotonFrequency> photon_label(const HyperfineLevel& destination) {
    if (destination == levels::up) return PhotonFrequency::nu1;
    if (destination == levels::down) return PhotonFrequency::nu0;
    return std::nullopt;
}

}  // namespace ionsim
