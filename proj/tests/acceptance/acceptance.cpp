// Acceptance run: one PASS/FAIL line per criterion, preceded by the numbers
// it was judged on. Exit status is nonzero when any criterion fails.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include "ionsim/ionsim.hpp"
#include "oracles.hpp"

using namespace ionsim;

namespace {

struct Criterion {
    Criterion(int id, std::string title) : id(id), title(std::move(title)) {}

    int id;
    std::string title;
    bool pass = true;
    std::vector<std::string> details;

    void check(bool ok, std::string what) {
        pass = pass && ok;
        details.push_back(fmt::format("    [{}] {}", ok ? "ok" : "FAIL", what));
    }
};

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

unsigned worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

Criterion microwave_transfer() {
    Criterion c{1, "microwave transfer 0.91 +/- 0.01, analytic and Lindblad agree within 1e-6"};
    const double pi_time = 17e-6, detuning = 9e3;
    const double rabi = rabi_from_pi_time(pi_time);
    const double analytic = rabi_transfer_probability(rabi, detuning, pi_time);
    const double master = lindblad_transfer_probability(rabi, detuning, pi_time);
    c.check(near(analytic, 0.91, 0.01), fmt::format("analytic transfer {:.8f}", analytic));
    c.check(near(analytic, master, 1e-6), fmt::format("Lindblad transfer {:.8f}, |diff| {:.2e}", master,
                                                       std::abs(analytic - master)));
    return c;
}

Criterion photon_generation() {
    Criterion c{2, "photon generation 0.116 +/- 0.004 per state; saturating limit 0.500 +/- 0.005 vs absorbing chain"};
    const auto pulse = make_excitation_pulse(Config{});
    const auto cal = calibrate_optical_rabi(0.116, pulse);
    c.check(near(pulse.duration, 51e-9, 1e-15) && near(pulse.lifetime, 8.1e-9, 1e-15),
            fmt::format("pulse {:g} ns, lifetime {:g} ns", pulse.duration / units::ns, pulse.lifetime / units::ns));
    c.check(near(cal.achieved.nu1, 0.116, 0.004), fmt::format("P(up) = {:.6f} at rabi {:.6e} rad/s",
                                                               cal.achieved.nu1, cal.rabi));
    c.check(near(cal.achieved.nu0, 0.116, 0.004), fmt::format("P(down) = {:.6f}", cal.achieved.nu0));

    // Every decay from the excited state returns to ready, up or down with
    // equal weight; with the drive saturated the ready state is re-excited
    // until the population is absorbed in up or down.
    Eigen::MatrixXd Q(2, 2), R(2, 2);
    Q << 0.0, 1.0, 1.0 / 3.0, 0.0;
    R << 0.0, 0.0, 1.0 / 3.0, 1.0 / 3.0;
    const Eigen::MatrixXd B = oracle::absorption_probabilities(Q, R);
    ExcitationPulse sat = pulse;
    sat.duration = 2e-6;
    sat.rabi = 5.0 / sat.lifetime;
    const auto y = excitation_yield(sat);
    c.check(near(y.nu1, B(0, 0), 0.005) && near(y.nu1, 0.5, 0.005),
            fmt::format("saturated P(up) {:.5f}, chain {:.5f}", y.nu1, B(0, 0)));
    c.check(near(y.nu0, B(0, 1), 0.005) && near(y.nu0, 0.5, 0.005),
            fmt::format("saturated P(down) {:.5f}, chain {:.5f}", y.nu0, B(0, 1)));
    return c;
}

Criterion branching() {
    Criterion c{3, "branching from P|1,-1> is (1/3, 1/3, 1/3) vs Clebsch-Gordan; rows sum to 1 within 1e-12"};
    auto cg = [](const HyperfineLevel& u, const HyperfineLevel& l) {
        return oracle::branching(1, 2 * u.F, 2 * u.mF, 1, 2 * l.F, 2 * l.mF, 1);
    };
    const auto rows = branching_table(levels::excited);
    c.check(rows.size() == 3, fmt::format("{} decay channels", rows.size()));
    for (const auto& r : rows) {
        c.check(near(r.branching, 1.0 / 3.0, 1e-4) && near(r.branching, cg(levels::excited, r.lower), 1e-4),
                fmt::format("-> {}: {:.12f} (oracle {:.12f})", to_string(r.lower), r.branching,
                            cg(levels::excited, r.lower)));
    }
    double worst = 0.0;
    for (const auto& upper : kCanonicalLevels) {
        if (upper.manifold != Manifold::P) continue;
        double sum = 0.0;
        for (const auto& r : branching_table(upper)) sum += r.branching;
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    c.check(worst <= 1e-12, fmt::format("largest row-sum deviation {:.1e}", worst));
    return c;
}

Criterion collection() {
    Criterion c{4, "collection 13.3% geometric and 14.3% sigma-weighted within 0.3 points"};
    const CollectionGeometry g;
    const double geo = collection_fraction(g, EmissionPattern::geometric);
    const double sig = collection_fraction(g, EmissionPattern::sigma);
    c.check(near(geo, 0.133, 0.003), fmt::format("geometric {:.4f}%", 100 * geo));
    c.check(near(sig, 0.143, 0.003), fmt::format("sigma-weighted {:.4f}%", 100 * sig));
    return c;
}

Criterion spectrometer() {
    Criterion c{5, "resolving power 95,040; resolution 3.6 +/- 0.2 GHz; overlap <= 0.34%; throughput 3.7(5)%"};
    const double power = resolving_power(GratingSpec{});
    c.check(near(power, 95040.0, 0.5), fmt::format("resolving power {:.3f}", power));
    const double res = resolution_from_spots(SpotPair{}, LevelSplittings{}.ground_hyperfine);
    c.check(near(res / units::GHz, 3.6, 0.2), fmt::format("resolution {:.3f} GHz", res / units::GHz));
    const double ov = gaussian_overlap_infidelity(SpotPair{});
    c.check(ov <= 0.0034, fmt::format("overlap infidelity {:.4f}%", 100 * ov));
    const auto tp = ThroughputChain{}.product();
    const auto shown = format_concise(tp, 100);
    c.check(shown == "3.7(5)", fmt::format("throughput {:.4f}% printed as {}%", 100 * tp.value, shown));
    c.check(near(tp.sigma, 0.005, 0.001), fmt::format("quadrature error {:.3f} points", 100 * tp.sigma));
    return c;
}

Criterion coincidence_budget() {
    Criterion c{6, "budget 1.05e-4 (0.011(2)%); Monte Carlo at N=1e7 within 3 sigma of analytic"};
    const auto b = compose_budget({{"preparation", {0.91, 0.04}},
                                   {"generation", {0.116, 0.004}},
                                   {"fibre coupling", {0.027, 0.003}},
                                   {"detection", {0.037, 0.005}}});
    c.check(near(b.product.value, 1.05e-4, 0.005e-4), fmt::format("product {:.4e}", b.product.value));
    c.check(near(b.product.sigma, 0.2e-4, 0.05e-4), fmt::format("sigma {:.3e}", b.product.sigma));
    c.check(format_concise(b.product, 100) == "0.011(2)", "printed as " + format_concise(b.product, 100) + "%");

    auto exp = make_experiment(Config{});
    exp.shots = 10'000'000;
    const auto s = run_experiment(exp, {}, worker_count());
    const double z = (s.clicks - s.expected_clicks()) / s.binomial_sigma_clicks();
    c.check(std::abs(z) <= 3.0, fmt::format("{} clicks in {} shots, analytic {:.1f}, z = {:+.2f}", s.clicks, s.shots,
                                            s.expected_clicks(), z));
    return c;
}

Criterion correlation() {
    Criterion c{7, "2006-click correlation: average in [89.9%, 94.9%], P(down|nu0) > P(up|nu1), errors 0.7-1.0 points"};
    const auto recs = importance_mode(make_experiment(Config{}), 2006);
    const auto m = correlation_matrix(recs);
    const auto f0 = m.fidelity_nu0(), f1 = m.fidelity_nu1(), avg = m.average();
    c.check(avg.value >= 0.899 && avg.value <= 0.949, fmt::format("average {}%", format_concise(avg, 100)));
    c.check(f0.value > f1.value,
            fmt::format("P(down|nu0) {}% vs P(up|nu1) {}%", format_concise(f0, 100), format_concise(f1, 100)));
    for (const auto& [name, f] : {std::pair{"nu0", f0}, std::pair{"nu1", f1}}) {
        c.check(f.sigma >= 0.007 && f.sigma <= 0.010,
                fmt::format("{} column binomial error {:.2f} points", name, 100 * f.sigma));
    }
    return c;
}

Criterion error_attribution() {
    Criterion c{8, "diagnostic attribution: readout ~3.6% and spectrometer ~2.4% within 1 point"};
    auto exp = make_experiment(Config{});
    exp.diagnostics = true;
    const auto eb = error_budget(importance_mode(exp, 100'000));
    const double ro = eb.fraction(ErrorSource::readout).value;
    const double sp = eb.fraction(ErrorSource::spectrometer).value;
    c.check(near(ro, 0.036, 0.01), fmt::format("readout {:.2f}%", 100 * ro));
    c.check(near(sp, 0.024, 0.01), fmt::format("spectrometer {:.2f}%", 100 * sp));
    return c;
}

Criterion improved_scenario() {
    Criterion c{9, "improved scenario: fidelity >= 0.99, success rate 10-100 Hz at ~5 kHz cycle"};
    const auto sc = improvement_scenario(make_experiment(Config{}), improved_substitutions());
    c.check(sc.fidelity >= 0.99, fmt::format("fidelity {:.4f}", sc.fidelity));
    c.check(sc.success_rate >= 10.0 && sc.success_rate <= 100.0, fmt::format("success {:.1f} Hz", sc.success_rate));
    c.check(sc.cycle_rate >= 2.5e3 && sc.cycle_rate <= 10e3, fmt::format("cycle {:.2f} kHz", sc.cycle_rate / 1e3));
    c.check(sc.assumption_dependent && !sc.substitutions.empty(),
            fmt::format("{} substitutions logged", sc.substitutions.size()));
    return c;
}

// ------------------------------------------------------------- properties

double ratio_deviation(const std::vector<double>& err) {
    // Worst relative deviation of successive error ratios from sqrt(10).
    double worst = 0.0;
    for (std::size_t i = 1; i < err.size(); ++i) {
        worst = std::max(worst, std::abs(err[i - 1] / err[i] / std::sqrt(10.0) - 1.0));
    }
    return worst;
}

Criterion properties() {
    Criterion c{10, "property suites: physical density matrices, purity, normalization, determinism, 1/sqrt(N), "
                    "associativity"};
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Randomized evolutions from random mixed states under random drives.
    std::vector<std::pair<HyperfineLevel, HyperfineLevel>> pairs;
    for (const auto& l : kCanonicalLevels)
        for (const auto& h : kCanonicalLevels)
            if (l.manifold == Manifold::S && is_drivable(l, h) && !(l == h)) pairs.push_back({l, h});
    auto random_drives = [&](double span) {
        std::vector<DriveTerm> drives;
        std::vector<bool> used(kNumLevels, false);
        for (int k = 0; k < 3; ++k) {
            const auto& [lo, hi] = pairs[static_cast<std::size_t>(u(gen) * pairs.size())];
            if (used[index_of(hi)] || used[index_of(lo)]) continue;
            used[index_of(hi)] = true;
            const double start = u(gen) * 0.3 * span;
            drives.push_back({lo, hi, 1e7 + 1e8 * u(gen), (u(gen) - 0.5) * 2e7, u(gen) * 6.28,
                              Envelope::rectangular, start, start + (0.2 + 0.5 * u(gen)) * span});
        }
        return drives;
    };
    double trace_err = 0.0, herm_err = 0.0, min_eig = 1.0, purity_err = 0.0;
    std::normal_distribution<double> n;
    for (int trial = 0; trial < 20; ++trial) {
        Matrix8 a;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j) a(i, j) = Complex(n(gen), n(gen));
        DensityMatrix start;
        start.rho = a * a.adjoint();
        start.rho /= start.rho.trace();
        StepControl ctl;
        ctl.sample_interval = 5e-9;
        const auto r = evolve(start, random_drives(60e-9), CollapseSet::from_rate(1.0 / 8.1e-9), 0.0, 60e-9, ctl);
        for (const auto& s : r.trajectory) {
            trace_err = std::max(trace_err, std::abs(s.state.trace() - 1.0));
            herm_err = std::max(herm_err, s.state.hermiticity_error());
            min_eig = std::min(min_eig, s.state.min_eigenvalue());
        }
        const auto pure = evolve(DensityMatrix::pure(kCanonicalLevels[trial % 4]), random_drives(100e-9),
                                 CollapseSet::from_rate(0.0), 0.0, 100e-9);
        purity_err = std::max(purity_err, std::abs(pure.final_state.purity() - 1.0));
    }
    c.check(trace_err <= 1e-9, fmt::format("trace deviation {:.1e}", trace_err));
    c.check(herm_err <= 1e-10, fmt::format("hermiticity error {:.1e}", herm_err));
    c.check(min_eig >= -1e-9, fmt::format("smallest eigenvalue {:.1e}", min_eig));
    c.check(purity_err <= 1e-8, fmt::format("purity deviation at zero decay {:.1e}", purity_err));

    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    double norm_err = 0.0;
    for (int q : {-1, 0, 1}) {
        const double total = 2.0 * std::numbers::pi *
                             GK::integrate([&](double th) { return dipole_pattern(q, th) * std::sin(th); }, 0.0,
                                           std::numbers::pi, 10, 1e-14);
        norm_err = std::max(norm_err, std::abs(total - 1.0));
    }
    c.check(norm_err <= 1e-9, fmt::format("dipole normalization error {:.1e}", norm_err));

    auto exp = make_experiment(Config{});
    exp.shots = 300'000;
    exp.diagnostics = true;
    auto dump = [&](unsigned workers) {
        std::string out;
        run_experiment(exp, [&](const ClickRecord& r) { out += to_csv_line(r) + "\n"; }, workers);
        return out;
    };
    const auto one = dump(1);
    bool identical = true;
    for (unsigned w : {2u, 3u, 8u}) identical = identical && dump(w) == one;
    c.check(identical && !one.empty(), fmt::format("records byte-identical for 1, 2, 3 and 8 workers ({} bytes)",
                                                   one.size()));

    // Every Bernoulli estimator: correlation columns, error-budget shares,
    // readout fidelity and the per-shot click rate.
    std::vector<double> corr, share, ro, rate;
    auto base = make_experiment(Config{});
    base.diagnostics = true;
    for (std::uint64_t k : {1'000u, 10'000u, 100'000u}) {
        const auto recs = importance_mode(base, k);
        corr.push_back(correlation_matrix(recs).fidelity_nu0().sigma);
        share.push_back(error_budget(recs).fraction(ErrorSource::readout).sigma);
        int ok = 0;
        for (std::uint64_t i = 0; i < k; ++i) {
            auto rng = make_stream(base.seed, StreamDomain::experiment, i);
            ok += simulate_readout(IonState::up, base.readout, rng).classified == IonState::up;
        }
        ro.push_back(wald_error(double(ok) / k, double(k)));
    }
    for (std::uint64_t shots : {1'000'000u, 10'000'000u, 100'000'000u}) {
        auto e = make_experiment(Config{});
        e.shots = shots;
        const auto s = run_experiment(e, {}, worker_count());
        rate.push_back(wald_error(s.observed_rate(), double(shots)));
    }
    for (const auto& [name, err] : {std::pair{"correlation column", corr}, std::pair{"error-budget share", share},
                                    std::pair{"readout fidelity", ro}, std::pair{"click rate", rate}}) {
        const double dev = ratio_deviation(err);
        c.check(dev <= 0.2, fmt::format("{} error ratio per decade off sqrt(10) by {:.1f}%", name, 100 * dev));
    }

    double assoc = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<BudgetStage> s;
        for (int i = 0; i < 6; ++i) s.push_back({"s", {0.01 + 0.99 * u(gen), 0.1 * u(gen)}});
        const auto flat = compose_budget(s).product;
        const auto grouped = compose_budget({compose_budget({s[0], s[1], s[2]}).as_stage("a"),
                                             compose_budget({s[3], s[4], s[5]}).as_stage("b")})
                                 .product;
        assoc = std::max({assoc, std::abs(grouped.value - flat.value), std::abs(grouped.sigma - flat.sigma)});
    }
    c.check(assoc <= 1e-12, fmt::format("budget regrouping difference {:.1e}", assoc));
    return c;
}

}  // namespace

int main() {
    std::vector<Criterion (*)()> runs = {microwave_transfer, photon_generation, branching,          collection,
                                         spectrometer,       coincidence_budget, correlation,       error_attribution,
                                         improved_scenario,  properties};
    int failed = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        Criterion c{static_cast<int>(i + 1), "did not complete"};
        try {
            c = runs[i]();
        } catch (const std::exception& e) {
            c.pass = false;
            c.details.push_back(std::string("    [FAIL] threw: ") + e.what());
        }
        for (const auto& d : c.details) std::puts(d.c_str());
        std::printf("%s criterion %d: %s\n", c.pass ? "PASS" : "FAIL", c.id, c.title.c_str());
        std::fflush(stdout);
        failed += !c.pass;
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(runs.size()) - failed, runs.size());
    return failed ? 1 : 0;
}
