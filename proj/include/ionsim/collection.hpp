#pragma once

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss.hpp>

#include "ionsim/error.hpp"
#include "ionsim/units.hpp"

namespace ionsim {

/// Normalised dipole radiation pattern (per steradian) with θ measured
/// from the quantization axis. q = 0 is the π pattern sin²θ, q = ±1 the σ
/// pattern (1 + cos²θ)/2; both integrate to 1 over the sphere.
inline double dipole_pattern(int q, double theta) {
    if (std::abs(q) > 1) throw invalid_argument("dipole polarization index must be -1, 0 or +1");
    const double c = std::cos(theta);
    if (q == 0) return 3.0 / (8.0 * std::numbers::pi) * (1.0 - c * c);
    return 3.0 / (16.0 * std::numbers::pi) * (1.0 + c * c);
}

/// Rectangular collection aperture centred on the quantization axis, seen
/// from the ion at `distance`.
struct CollectionGeometry {
    double width = 80.0 * units::um;
    double height = 127.0 * units::um;
    double distance = 60.0 * units::um;
    double numerical_aperture = 0.68;  // summary figure, not used in integrals

    void validate() const {
        if (!(distance > 0.0)) throw invalid_argument("collection distance must be positive");
        if (!(width > 0.0) || !(height > 0.0)) throw invalid_argument("aperture dimensions must be positive");
    }
};

enum class EmissionPattern { geometric, pi, sigma };

inline std::string to_string(EmissionPattern p) {
    switch (p) {
        case EmissionPattern::geometric: return "geometric";
        case EmissionPattern::pi: return "pi";
        case EmissionPattern::sigma: return "sigma";
    }
    return "?";
}

inline double pattern_value(EmissionPattern p, double theta) {
    switch (p) {
        case EmissionPattern::geometric: return 1.0 / (4.0 * std::numbers::pi);
        case EmissionPattern::pi: return dipole_pattern(0, theta);
        case EmissionPattern::sigma: return dipole_pattern(1, theta);
    }
    return 0.0;
}

struct QuadratureControl {
    double tolerance = 1e-12;
    int max_panels = 256;
};

/// Fraction of emitted power crossing the aperture. Integrates the pattern
/// against the solid-angle element d/r³ dx dy with 20-point Gauss-Legendre
/// panels, doubling the panel count until two passes agree to `tolerance`.
inline double collection_fraction(const CollectionGeometry& g, EmissionPattern pattern,
                                  const QuadratureControl& ctl = {}) {
    g.validate();
    using Rule = boost::math::quadrature::gauss<double, 20>;
    // Substituting x = d tan(a), y = d tan(b) turns the d/r^3 kernel into a
    // bounded function of the angles, so a small distance does not leave a
    // narrow peak for the panels to miss.
    auto integrand = [&](double a, double b) {
        const double ta = std::tan(a), tb = std::tan(b);
        const double s2 = 1.0 + ta * ta + tb * tb;
        const double jac = (1.0 + ta * ta) * (1.0 + tb * tb);
        return pattern_value(pattern, std::acos(1.0 / std::sqrt(s2))) * jac / (s2 * std::sqrt(s2));
    };
    const double a_max = std::atan(0.5 * g.width / g.distance);
    const double b_max = std::atan(0.5 * g.height / g.distance);
    auto integrate = [&](int panels) {
        const double ha = 2.0 * a_max / panels;
        const double hb = 2.0 * b_max / panels;
        double total = 0.0;
        for (int i = 0; i < panels; ++i) {
            const double a0 = -a_max + i * ha;
            for (int j = 0; j < panels; ++j) {
                const double b0 = -b_max + j * hb;
                total += Rule::integrate(
                    [&](double a) {
                        return Rule::integrate([&](double b) { return integrand(a, b); }, b0, b0 + hb);
                    },
                    a0, a0 + ha);
            }
        }
        return total;
    };
    double previous = integrate(1);
    for (int panels = 2; panels <= ctl.max_panels; panels *= 2) {
        const double current = integrate(panels);
        if (std::abs(current - previous) <= ctl.tolerance) return current;
        previous = current;
    }
    return previous;
}

/// σ-weighted over geometric collection; 1 for an isotropic emitter.
inline double sigma_enhancement(const CollectionGeometry& g) {
    return collection_fraction(g, EmissionPattern::sigma) / collection_fraction(g, EmissionPattern::geometric);
}

/// Probability that a generated photon reaches the spectrometer fibre.
/// `channel_weight` scales the end-to-end efficiency for a channel that is
/// only partly passed (1 for σ, the π leak fraction for π light).
inline double collected_photon_probability(double generation, double fibre_efficiency, double channel_weight = 1.0) {
    auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in_unit(generation) || !in_unit(fibre_efficiency) || !in_unit(channel_weight)) {
        throw invalid_argument("collection probabilities must lie in [0, 1]");
    }
    return generation * fibre_efficiency * channel_weight;
}

}  // namespace ionsim
