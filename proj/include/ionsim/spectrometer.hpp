#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ionsim/atom_model.hpp"
#include "ionsim/budget.hpp"
#include "ionsim/error.hpp"
#include "ionsim/rng.hpp"
#include "ionsim/units.hpp"

// UV hyperfine spectrometer: grating geometry, spot-based resolution,
// photon classification and throughput.
namespace ionsim {

struct GratingSpec {
    double line_density = 4320.0 * units::per_mm;
    double ruled_width = 128.0 * units::mm;
    double ruled_height = 102.0 * units::mm;
    double operating_angle = 59.0 * units::deg;
    int order = 1;
    double beam_diameter = 22.0 * units::mm;

    void validate() const {
        if (!(line_density > 0.0)) throw invalid_argument("grating line density must be positive");
        if (order < 1) throw invalid_argument("diffraction order must be >= 1");
        if (!(beam_diameter > 0.0)) throw invalid_argument("beam diameter must be positive");
        if (beam_diameter > ruled_width) throw invalid_argument("beam diameter exceeds the ruled width");
    }
};

inline constexpr double kQubitWavelength = 369.5 * units::nm;

/// Littrow angle from m λ = 2 d sin θ.
inline double littrow_angle(const GratingSpec& g, double wavelength) {
    if (!(wavelength >= 0.0)) throw invalid_argument("wavelength must be >= 0");
    const double arg = g.order * wavelength * g.line_density / 2.0;
    if (arg > 1.0) {
        throw Error("unphysical-geometry", "no Littrow solution: m*lambda*rho/2 = " + std::to_string(arg) + " > 1");
    }
    return std::asin(arg);
}

/// Order times the number of illuminated lines.
inline double resolving_power(const GratingSpec& g) {
    g.validate();
    return g.order * g.beam_diameter * g.line_density;
}

/// Two focused spots with 1/e² diameters and centre separation.
struct SpotPair {
    double diameter0 = 47.4 * units::um;
    double diameter1 = 46.6 * units::um;
    double separation = 82.0 * units::um;

    double radius0() const { return 0.5 * diameter0; }
    double radius1() const { return 0.5 * diameter1; }
    double mean_radius() const { return 0.25 * (diameter0 + diameter1); }

    void validate() const {
        if (!(diameter0 > 0.0) || !(diameter1 > 0.0)) throw invalid_argument("spot diameters must be positive");
        if (!(separation >= 0.0)) throw invalid_argument("spot separation must be >= 0");
    }
};

/// Frequency resolution implied by a known splitting producing the given
/// spot separation, measured in mean 1/e² radii.
inline double resolution_from_spots(const SpotPair& spots, double frequency_separation) {
    spots.validate();
    if (!(spots.separation > 0.0)) throw invalid_argument("spot separation must be positive");
    return frequency_separation / (spots.separation / spots.mean_radius());
}

/// Cross-talk of a knife edge on the midpoint between the spot centres:
/// mean power fraction of each Gaussian spot landing on the other side.
/// A spot with 1/e² radius w has a transverse marginal of standard
/// deviation w/2.
inline double gaussian_overlap_infidelity(const SpotPair& spots) {
    spots.validate();
    const double half = 0.5 * spots.separation;
    auto tail = [&](double w) { return 0.5 * std::erfc(half / (0.5 * w) / std::numbers::sqrt2); };
    return 0.5 * (tail(spots.radius0()) + tail(spots.radius1()));
}

/// Normalised field-mode overlap ∫E0E1 / √(∫E0² ∫E1²) of the two spots.
inline double field_mode_overlap(const SpotPair& spots) {
    spots.validate();
    const double w0 = spots.radius0();
    const double w1 = spots.radius1();
    const double sum = w0 * w0 + w1 * w1;
    return 2.0 * w0 * w1 / sum * std::exp(-spots.separation * spots.separation / sum);
}

/// Probability of reading the right PMT given a click.
struct ClassificationMatrix {
    Measured nu0{0.980, 0.006};
    Measured nu1{0.972, 0.004};

    double correct(PhotonFrequency f) const { return f == PhotonFrequency::nu0 ? nu0.value : nu1.value; }

    void validate() const {
        for (double v : {nu0.value, nu1.value}) {
            if (!(v >= 0.5 && v <= 1.0)) throw invalid_argument("classification fidelities must lie in [0.5, 1]");
        }
    }
};

template <class Rng>
PhotonFrequency classify_photon(PhotonFrequency truth, const ClassificationMatrix& m, Rng& rng) {
    if (bernoulli(rng, m.correct(truth))) return truth;
    return truth == PhotonFrequency::nu0 ? PhotonFrequency::nu1 : PhotonFrequency::nu0;
}

/// Fibre-to-detector efficiency stages.
struct ThroughputChain {
    std::vector<BudgetStage> stages{
        {"fibre coupling", {0.79, 0.02}},
        {"grating and optics", {0.25, 0.03}},
        {"PMT quantum efficiency", {0.19, 0.0}},
    };

    /// Product with quadrature-propagated uncertainty. A zero stage gives
    /// a zero product.
    Measured product() const {
        if (stages.empty()) throw invalid_argument("throughput chain has no stages");
        for (const auto& s : stages) {
            if (!(s.factor.value >= 0.0 && s.factor.value <= 1.0)) {
                throw invalid_argument("throughput stage '" + s.name + "' must lie in [0, 1]");
            }
            if (s.factor.value == 0.0) return {0.0, 0.0};
        }
        return compose_budget(stages).product;
    }
};

template <class Rng>
bool detection_survival(const ThroughputChain& chain, Rng& rng) {
    return bernoulli(rng, chain.product().value);
}

/// Probability of at least one dark count on one PMT during the gate.
inline double dark_click_probability(double dark_rate, double gate) {
    if (!(dark_rate >= 0.0) || !(gate >= 0.0)) throw invalid_argument("dark rate and gate must be >= 0");
    return -std::expm1(-dark_rate * gate);
}

}  // namespace ionsim
