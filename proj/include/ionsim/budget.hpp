#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "ionsim/error.hpp"

namespace ionsim {

/// A value with its 1σ uncertainty.
struct Measured {
    double value = 0.0;
    double sigma = 0.0;

    double relative() const { return value != 0.0 ? sigma / std::abs(value) : 0.0; }
};

/// Parenthetical notation with a one-digit uncertainty, after scaling both
/// numbers by `scale`: {0.037525, 0.0046} with scale 100 → "3.8(5)".
/// Uncertainties that round to 10 in the last place print as two digits,
/// e.g. "89.6(10)".
inline std::string format_concise(const Measured& m, double scale = 1.0) {
    const double v = m.value * scale;
    const double s = std::abs(m.sigma * scale);
    if (!(s > 0.0) || !std::isfinite(s)) return fmt::format("{:g}", v);
    const int decimals = -static_cast<int>(std::floor(std::log10(s)));
    const long digit = std::lround(s * std::pow(10.0, decimals));  // 1..10
    if (decimals < 0) {
        const double unit = std::pow(10.0, -decimals);
        return fmt::format("{:.0f}({:.0f})", std::round(v / unit) * unit, digit * unit);
    }
    return fmt::format("{:.{}f}({})", v, decimals, digit);
}

struct BudgetStage {
    std::string name;
    Measured factor;
};

/// Multiplicative efficiency chain. Relative uncertainties add in
/// quadrature.
struct EfficiencyBudget {
    std::vector<BudgetStage> stages;
    Measured product;

    BudgetStage as_stage(std::string name) const { return {std::move(name), product}; }
};

inline EfficiencyBudget compose_budget(std::vector<BudgetStage> stages) {
    if (stages.empty()) throw invalid_argument("efficiency budget needs at least one stage");
    double value = 1.0;
    double rel_sq = 0.0;
    for (const auto& s : stages) {
        if (!(s.factor.value > 0.0) || s.factor.value > 1.0) {
            throw invalid_argument("budget stage '" + s.name + "' must lie in (0, 1]");
        }
        if (!(s.factor.sigma >= 0.0)) throw invalid_argument("budget stage '" + s.name + "' has negative uncertainty");
        value *= s.factor.value;
        rel_sq += s.factor.relative() * s.factor.relative();
    }
    EfficiencyBudget out;
    out.stages = std::move(stages);
    out.product = {value, value * std::sqrt(rel_sq)};
    return out;
}

}  // namespace ionsim
