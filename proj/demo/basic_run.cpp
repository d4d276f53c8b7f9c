// Smallest end-to-end use of the library: load the default configuration,
// run a short Monte Carlo, then condition on clicks to build the correlation
// matrix and its error attribution.

#include <cstdio>
#include <string>

#include <fmt/format.h>

#include "ionsim/ionsim.hpp"

int main(int argc, char** argv) {
    using namespace ionsim;
    try {
        Config cfg;
        if (argc > 1) cfg = load_config_file(argv[1]);

        auto exp = make_experiment(cfg);
        exp.shots = 2'000'000;
        const auto summary = run_experiment(exp, {}, 1);
        fmt::print("{} clicks in {} shots (analytic {:.1f})\n", summary.clicks, summary.shots,
                   summary.expected_clicks());

        exp.diagnostics = true;
        const auto records = importance_mode(exp, 5000);
        const auto m = correlation_matrix(records);
        fmt::print("P(down|nu0) = {}%  P(up|nu1) = {}%  average = {}%\n", format_concise(m.fidelity_nu0(), 100),
                   format_concise(m.fidelity_nu1(), 100), format_concise(m.average(), 100));

        const auto eb = error_budget(records);
        for (auto s : kErrorSources) {
            fmt::print("  {:<13} {:.2f}%\n", to_string(s), 100 * eb.fraction(s).value);
        }
    } catch (const Error& e) {
        fmt::print(stderr, "error: {}: {}\n", e.code(), e.what());
        return 1;
    }
    return 0;
}
