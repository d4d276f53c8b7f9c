#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ionsim/ionsim.hpp"

// Command-line front end. `run_cli` is the whole program so tests can drive
// it in-process.
namespace ionsim::cli {

inline constexpr const char* kVersion = "1.0.0";

using Json = nlohmann::ordered_json;

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> shots;
    unsigned workers = 1;
    std::string out_dir;
    std::string format = "csv";
    bool diagnostics = false;

    // subcommand-specific
    std::optional<double> rabi;
    double sample_interval_ns = 1.0;
    std::uint64_t trials = 100'000;
    std::string input;
    std::uint64_t clicks = 2006;
    bool clicks_only = false;
};

/// What a subcommand produces: human-readable lines, the same content as
/// JSON, and named files to write under --out.
struct Report {
    std::vector<std::string> lines;
    Json json = Json::object();
    std::map<std::string, std::string> artifacts;
    std::vector<std::string> streamed;  // files the command wrote itself

    template <class... Args>
    void say(fmt::format_string<Args...> f, Args&&... args) {
        lines.push_back(fmt::format(f, std::forward<Args>(args)...));
    }
};

struct Context {
    Options opt;
    Config config;
    std::filesystem::path out_dir;
};

inline std::string percent(double v, int digits = 2) { return fmt::format("{:.{}f}%", 100.0 * v, digits); }

/// 1.0545e-4 → "1.05e−4" (typographic minus).
inline std::string sci(double v, int digits = 2) {
    if (v == 0.0) return "0";
    const int e = static_cast<int>(std::floor(std::log10(std::abs(v))));
    double mant = v / std::pow(10.0, e);
    auto text = fmt::format("{:.{}f}", mant, digits);
    int exp = e;
    if (text.starts_with("10")) {
        mant /= 10.0;
        ++exp;
        text = fmt::format("{:.{}f}", mant, digits);
    }
    return exp == 0 ? text : fmt::format("{}e{}{}", text, exp < 0 ? "−" : "", std::abs(exp));
}

inline Config load_config(const Options& opt) {
    std::string path = opt.config_path;
    if (path.empty()) {
        if (const char* env = std::getenv("IONSIM_CONFIG"); env && *env) path = env;
    }
    Config c;
    if (!path.empty()) c = load_config_file(path);
    if (opt.seed) c.seed = *opt.seed;
    if (opt.shots) c.shots = *opt.shots;
    validate(c);
    return c;
}

inline std::filesystem::path artifact_path(const Context& ctx, const std::string& name) { return ctx.out_dir / name; }

// ---------------------------------------------------------------- lindblad

inline Report cmd_lindblad(Context& ctx) {
    Report r;
    const auto& c = ctx.config;
    auto pulse = make_excitation_pulse(c);
    if (ctx.opt.rabi) {
        pulse.rabi = *ctx.opt.rabi;
        r.say("optical rabi: {:.6e} rad/s (given)", pulse.rabi);
    } else {
        const auto cal = calibrate_optical_rabi(c.photon.generation.value, pulse);
        pulse.rabi = cal.rabi;
        r.say("optical rabi: {:.6e} rad/s (calibrated to {} per qubit state, {} evaluations)", pulse.rabi,
              c.photon.generation.value, cal.evaluations);
    }
    StepControl control;
    control.sample_interval = ctx.opt.sample_interval_ns * units::ns;
    const auto result = simulate_excitation(pulse, control);
    const auto yield = photon_generation_probabilities(result);
    r.say("pulse {:g} ns, lifetime {:g} ns, ring-down to {:g} ns", pulse.duration / units::ns, pulse.lifetime / units::ns,
          (pulse.duration + pulse.ringdown_lifetimes * pulse.lifetime) / units::ns);
    r.say("final population |up>   (nu1 photon): {:.6f}", yield.nu1);
    r.say("final population |down> (nu0 photon): {:.6f}", yield.nu0);
    r.say("residual P population: {:.3e}", yield.residual_excited);
    if (yield.warning) r.say("warning: {}", *yield.warning);
    r.say("accepted steps: {}", result.accepted_steps);

    const double mw_rabi = rabi_from_pi_time(c.microwave.pi_time);
    const double mw_analytic = rabi_transfer_probability(mw_rabi, c.microwave.detuning, c.microwave.pi_time);
    const double mw_lindblad = lindblad_transfer_probability(mw_rabi, c.microwave.detuning, c.microwave.pi_time);
    r.say("microwave transfer: analytic {:.8f}, lindblad {:.8f}", mw_analytic, mw_lindblad);

    std::string csv = "time_ns";
    for (const auto& lvl : kCanonicalLevels) csv += ",pop_" + to_string(lvl);
    for (const auto& ch : result.channels) csv += ",emitted_" + channel_label(ch);
    csv += "\n";
    for (const auto& s : result.trajectory) {
        csv += fmt::format("{:.6f}", s.time / units::ns);
        for (double p : s.state.populations()) csv += fmt::format(",{:.12e}", p);
        for (double e : s.emissions) csv += fmt::format(",{:.12e}", e);
        csv += "\n";
    }
    r.artifacts["trajectory.csv"] = std::move(csv);

    r.json = {{"rabi", pulse.rabi},
              {"nu1", yield.nu1},
              {"nu0", yield.nu0},
              {"residual_excited", yield.residual_excited},
              {"accepted_steps", result.accepted_steps},
              {"microwave_transfer", {{"analytic", mw_analytic}, {"lindblad", mw_lindblad}}}};
    return r;
}

// ---------------------------------------------------------------- sequence

inline Report cmd_sequence(Context& ctx) {
    Report r;
    const auto seq = build_sequence(ctx.config.timings);
    std::string csv = "step,start_us,duration_us\n";
    Json steps = Json::array();
    double t = 0.0;
    r.say("{:<20} {:>12} {:>12}", "step", "start [us]", "length [us]");
    for (const auto& s : seq.steps) {
        r.say("{:<20} {:>12.3f} {:>12.3f}", s.name, t / units::us, s.duration / units::us);
        csv += fmt::format("{},{},{}\n", s.name, t / units::us, s.duration / units::us);
        steps.push_back({{"step", s.name}, {"start_us", t / units::us}, {"duration_us", s.duration / units::us}});
        t += s.duration;
    }
    r.say("cycle: {:.3f} us ({:.2f} Hz)", seq.total() / units::us, seq.cycle_rate());
    r.say("within reference cycle: {}", within_reference_cycle(seq) ? "yes" : "no");
    r.artifacts["sequence.csv"] = std::move(csv);
    r.json = {{"steps", steps},
              {"cycle_us", seq.total() / units::us},
              {"cycle_rate_hz", seq.cycle_rate()},
              {"within_reference_cycle", within_reference_cycle(seq)}};
    return r;
}

// -------------------------------------------------------------- collection

inline Report cmd_collection(Context& ctx) {
    Report r;
    const auto& g = ctx.config.geometry;
    std::string csv = "pattern,fraction\n";
    Json rows = Json::object();
    r.say("aperture {} x {} um at {} um", g.width / units::um, g.height / units::um, g.distance / units::um);
    for (auto p : {EmissionPattern::geometric, EmissionPattern::sigma, EmissionPattern::pi}) {
        const double f = collection_fraction(g, p);
        r.say("{:<10} {:.10f} ({})", to_string(p), f, percent(f));
        csv += fmt::format("{},{:.12f}\n", to_string(p), f);
        rows[to_string(p)] = f;
    }
    const double enh = sigma_enhancement(g);
    r.say("sigma enhancement over geometric: {:.4f}", enh);
    const double collected =
        collected_photon_probability(ctx.config.photon.generation.value, ctx.config.fibre_efficiency.value);
    r.say("generated photon reaching the fibre: {:.4e} per shot", collected);
    r.artifacts["collection.csv"] = std::move(csv);
    r.json = {{"fractions", rows}, {"sigma_enhancement", enh}, {"collected_per_shot", collected}};
    return r;
}

// ------------------------------------------------------------ spectrometer

inline Report cmd_spectrometer(Context& ctx) {
    Report r;
    const auto& c = ctx.config;
    const double littrow = littrow_angle(c.grating, kQubitWavelength);
    const double power = resolving_power(c.grating);
    const double resolution = resolution_from_spots(c.spots, c.splittings.ground_hyperfine);
    const double overlap = gaussian_overlap_infidelity(c.spots);
    const double mode = field_mode_overlap(c.spots);
    const auto tp = c.throughput.product();
    r.say("littrow angle at {} nm: {:.2f} deg (operating {:.1f} deg)", kQubitWavelength / units::nm,
          littrow / units::deg, c.grating.operating_angle / units::deg);
    r.say("resolving power: {:.0f}", power);
    r.say("carrier / resolving power: {:.3f} GHz", c.splittings.optical_carrier / power / units::GHz);
    r.say("resolution from spots: {:.3f} GHz", resolution / units::GHz);
    r.say("gaussian overlap infidelity: {}", percent(overlap, 4));
    r.say("field mode overlap: {:.4e}", mode);
    r.say("classification: nu0 {}%, nu1 {}%", format_concise(c.classification.nu0, 100),
          format_concise(c.classification.nu1, 100));
    std::string stages;
    for (const auto& s : c.throughput.stages) {
        stages += (stages.empty() ? "" : " x ") + fmt::format("{} {}", s.name, format_concise(s.factor));
    }
    r.say("throughput: {}% ({})", format_concise(tp, 100), stages);
    r.say("dark click per gate per PMT: {:.3e}", dark_click_probability(c.dark_rate, c.timings.photon_gate));
    r.json = {{"littrow_angle_deg", littrow / units::deg},
              {"resolving_power", power},
              {"resolution_from_spots_ghz", resolution / units::GHz},
              {"overlap_infidelity", overlap},
              {"field_mode_overlap", mode},
              {"throughput", {{"value", tp.value}, {"sigma", tp.sigma}}}};
    r.artifacts["spectrometer.json"] = r.json.dump(2) + "\n";
    return r;
}

// ----------------------------------------------------------------- readout

struct SimulatedFidelity {
    double up = 0.0;
    double down = 0.0;
};

inline SimulatedFidelity simulate_readout_fidelity(const ReadoutModel& m, std::uint64_t trials, std::uint64_t seed) {
    std::uint64_t ok_up = 0, ok_down = 0;
    for (std::uint64_t i = 0; i < trials; ++i) {
        auto rng = make_stream(seed, StreamDomain::experiment, 1000 + i);
        ok_up += simulate_readout(IonState::up, m, rng).classified == IonState::up;
        ok_down += simulate_readout(IonState::down, m, rng).classified == IonState::down;
    }
    return {static_cast<double>(ok_up) / trials, static_cast<double>(ok_down) / trials};
}

inline Report cmd_readout(Context& ctx) {
    Report r;
    const auto& c = ctx.config;
    auto m = make_readout_model(c);
    const auto analytic = analytic_threshold_fidelities(m);
    r.say("window {} us, bright rate {} counts/s, threshold {}", m.window / units::us, m.bright_rate, m.threshold);
    r.say("solved dark rate: {:.4f} counts/s", m.dark_rate);
    r.say("solved leakage rate: {:.4f} /s", m.leakage_rate);
    r.say("analytic fidelity: up {:.5f}, down {:.5f} (targets {}, {})", analytic.up, analytic.down,
          c.readout.target_up, c.readout.target_down);
    r.say("optimal threshold: {}", optimal_threshold(m));
    const std::uint64_t n = ctx.opt.trials;
    m.classifier = ReadoutClassifier::threshold;
    const auto thr = simulate_readout_fidelity(m, n, c.seed);
    m.classifier = ReadoutClassifier::likelihood;
    const auto lik = simulate_readout_fidelity(m, n, c.seed);
    r.say("simulated ({} trials) threshold: up {:.5f}, down {:.5f}, average {:.5f}", n, thr.up, thr.down,
          0.5 * (thr.up + thr.down));
    r.say("simulated ({} trials) likelihood: up {:.5f}, down {:.5f}, average {:.5f}", n, lik.up, lik.down,
          0.5 * (lik.up + lik.down));
    r.json = {{"window_s", m.window},
              {"bright_rate", m.bright_rate},
              {"dark_rate", m.dark_rate},
              {"leakage_rate", m.leakage_rate},
              {"threshold", m.threshold},
              {"analytic", {{"up", analytic.up}, {"down", analytic.down}}},
              {"simulated_threshold", {{"up", thr.up}, {"down", thr.down}}},
              {"simulated_likelihood", {{"up", lik.up}, {"down", lik.down}}},
              {"trials", n}};
    r.artifacts["readout.json"] = r.json.dump(2) + "\n";
    return r;
}

// ---------------------------------------------------------------- simulate

inline Json correlation_json(const CorrelationMatrix& m) {
    auto meas = [](const Measured& x) { return Json{{"value", x.value}, {"sigma", x.sigma}}; };
    return {{"counts",
             {{"nu0_down", m.counts[0][0]}, {"nu0_up", m.counts[0][1]}, {"nu1_down", m.counts[1][0]},
              {"nu1_up", m.counts[1][1]}}},
            {"fidelity_nu0", meas(m.fidelity_nu0())},
            {"fidelity_nu1", meas(m.fidelity_nu1())},
            {"average", meas(m.average())}};
}

inline void describe_correlation(Report& r, const CorrelationMatrix& m) {
    r.say("counts: (nu0,down) {}  (nu0,up) {}  (nu1,down) {}  (nu1,up) {}", m.counts[0][0], m.counts[0][1],
          m.counts[1][0], m.counts[1][1]);
    r.say("P(down|nu0) = {}%", format_concise(m.fidelity_nu0(), 100));
    r.say("P(up|nu1)   = {}%", format_concise(m.fidelity_nu1(), 100));
    r.say("average     = {}%", format_concise(m.average(), 100));
}

inline Report cmd_simulate(Context& ctx) {
    Report r;
    auto exp = make_experiment(ctx.config);
    exp.diagnostics = ctx.opt.diagnostics;

    std::ofstream records;
    std::string records_name;
    if (!ctx.out_dir.empty()) {
        records_name = ctx.opt.format == "json" ? "records.jsonl" : "records.csv";
        records.open(artifact_path(ctx, records_name), std::ios::binary);
        if (ctx.opt.format != "json") records << csv_header(exp.diagnostics) << '\n';
    }
    const bool json = ctx.opt.format == "json";
    const bool clicks_only = ctx.opt.clicks_only;
    RecordSink sink;
    if (records.is_open()) {
        sink = [&](const ClickRecord& rec) {
            if (clicks_only && !rec.is_click()) return;
            records << (json ? to_json_line(rec) : to_csv_line(rec)) << '\n';
        };
    }
    const auto summary = run_experiment(exp, sink, ctx.opt.workers);
    if (records.is_open()) {
        records.close();
        r.streamed.push_back(records_name);
    }

    r.say("scenario: {}", to_string(exp.scenario));
    r.say("shots: {}  seed: {}", summary.shots, exp.seed);
    r.say("clicks: {} observed, {:.1f} +/- {:.1f} expected", summary.clicks, summary.expected_clicks(),
          summary.binomial_sigma_clicks());
    r.say("coincidence/shot: observed {} analytic {}", sci(summary.observed_rate()),
          sci(summary.analytic_click_probability));
    r.say("run duration at {:.1f} us/cycle: {:.1f} s", summary.cycle_time / units::us,
          summary.cycle_time * summary.shots);
    r.json = {{"scenario", to_string(exp.scenario)},
              {"seed", exp.seed},
              {"shots", summary.shots},
              {"clicks", summary.clicks},
              {"expected_clicks", summary.expected_clicks()},
              {"expected_clicks_sigma", summary.binomial_sigma_clicks()},
              {"observed_rate", summary.observed_rate()},
              {"analytic_rate", summary.analytic_click_probability},
              {"cycle_time_s", summary.cycle_time}};
    if (summary.clicks > 0) {
        const auto m = correlation_matrix(summary);
        describe_correlation(r, m);
        r.json["correlation"] = correlation_json(m);
    }
    if (exp.diagnostics) {
        r.json["prepared"] = summary.prepared;
        r.json["generated"] = summary.generated;
    }
    r.artifacts["summary.json"] = r.json.dump(2) + "\n";
    return r;
}

// ----------------------------------------------------------------- analyze

inline std::vector<ClickRecord> read_records(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open record file '" + path + "'");
    const auto ext = std::filesystem::path(path).extension().string();
    return ext == ".jsonl" || ext == ".json" ? read_records_jsonl(in) : read_records_csv(in);
}

inline void describe_error_budget(Report& r, const ErrorBudget& eb) {
    r.say("error budget over {} clicks:", eb.clicks);
    Json j = Json::object();
    for (auto s : kErrorSources) {
        r.say("  {:<13} {}%", to_string(s), format_concise(eb.fraction(s), 100));
        j[to_string(s)] = eb.fraction(s).value;
    }
    r.say("  {:<13} {}%", "correct", format_concise(eb.correct_fraction(), 100));
    j["correct"] = eb.correct_fraction().value;
    j["clicks"] = eb.clicks;
    r.json["error_budget"] = j;
}

inline Report cmd_analyze(Context& ctx) {
    Report r;
    std::vector<ClickRecord> recs;
    if (!ctx.opt.input.empty()) {
        recs = read_records(ctx.opt.input);
        r.say("input: {} ({} records)", ctx.opt.input, recs.size());
    } else {
        auto exp = make_experiment(ctx.config);
        exp.diagnostics = ctx.opt.diagnostics;
        recs = importance_mode(exp, ctx.opt.clicks);
        r.say("importance-sampled clicks: {} (seed {})", recs.size(), exp.seed);
    }
    const auto m = correlation_matrix(recs);
    describe_correlation(r, m);
    r.json["correlation"] = correlation_json(m);
    const bool has_truth = std::any_of(recs.begin(), recs.end(), [](const auto& x) { return x.truth.has_value(); });
    if (has_truth) describe_error_budget(r, error_budget(recs));

    std::string csv = "photon,ion,count,fraction\n";
    for (int col = 0; col < 2; ++col) {
        const double n = static_cast<double>(m.counts[col][0] + m.counts[col][1]);
        for (int ion = 0; ion < 2; ++ion) {
            csv += fmt::format("{},{},{},{:.6f}\n", col ? "nu1" : "nu0", ion ? "up" : "down", m.counts[col][ion],
                               n > 0 ? m.counts[col][ion] / n : 0.0);
        }
    }
    r.artifacts["correlation.csv"] = std::move(csv);
    r.artifacts["correlation.svg"] = correlation_svg(m);
    r.artifacts["correlation.json"] = r.json.dump(2) + "\n";
    return r;
}

// ------------------------------------------------------------------ budget

inline EfficiencyBudget quoted_budget(const Config& c) {
    return compose_budget({{"state preparation", c.budget_preparation},
                           {"photon generation", c.photon.generation},
                           {"fibre collection", c.fibre_efficiency},
                           {"spectrometer detection", c.budget_detection}});
}

inline std::string coincidence_line(const Measured& p) {
    return fmt::format("coincidence/shot: {} ({}%)", sci(p.value), format_concise(p, 100));
}

inline Report cmd_budget(Context& ctx) {
    Report r;
    const auto& c = ctx.config;
    const auto quoted = quoted_budget(c);
    r.say("efficiency budget (quoted stages):");
    Json stages = Json::array();
    for (const auto& s : quoted.stages) {
        r.say("  {:<24} {}", s.name, format_concise(s.factor));
        stages.push_back({{"name", s.name}, {"value", s.factor.value}, {"sigma", s.factor.sigma}});
    }
    r.lines.push_back(coincidence_line(quoted.product));

    const auto tp = c.throughput.product();
    r.say("spectrometer throughput: {}%", format_concise(tp, 100));

    auto exp = make_experiment(c);
    const auto model = resolve_model(exp);
    const double model_rate = click_probability(model);
    r.say("model chain: preparation {:.4f} x generation {} x collection {} x throughput {:.4f} -> {} per shot",
          model.p_ready, c.photon.generation.value, model.p_collect_sigma, model.p_survive, sci(model_rate));

    exp.diagnostics = true;
    const auto recs = importance_mode(exp, std::max<std::uint64_t>(ctx.opt.clicks, 1));
    describe_error_budget(r, error_budget(recs));

    r.json["stages"] = stages;
    r.json["coincidence"] = {{"value", quoted.product.value}, {"sigma", quoted.product.sigma}};
    r.json["throughput"] = {{"value", tp.value}, {"sigma", tp.sigma}};
    r.json["model_rate"] = model_rate;
    r.artifacts["budget.json"] = r.json.dump(2) + "\n";
    return r;
}

// --------------------------------------------------------- reproduce-paper

struct Row {
    std::string name;
    std::string sim;
    std::string reference;
    bool pass = false;
};

inline Report cmd_reproduce(Context& ctx) {
    Report r;
    const auto& c = ctx.config;
    std::vector<Row> rows;
    auto row = [&](std::string name, std::string sim, std::string ref, bool pass) {
        rows.push_back({std::move(name), std::move(sim), std::move(ref), pass});
    };

    const double mw_rabi = rabi_from_pi_time(c.microwave.pi_time);
    const double transfer = rabi_transfer_probability(mw_rabi, c.microwave.detuning, c.microwave.pi_time);
    row("state preparation (microwave transfer)", percent(transfer), "91(4)%", std::abs(transfer - 0.91) <= 0.01);

    const auto cal = calibrate_optical_rabi(c.photon.generation.value, make_excitation_pulse(c));
    row("photon generation |up>", percent(cal.achieved.nu1), "11.6(4)%", std::abs(cal.achieved.nu1 - 0.116) <= 0.004);
    row("photon generation |down>", percent(cal.achieved.nu0), "11.6(4)%",
        std::abs(cal.achieved.nu0 - 0.116) <= 0.004);

    const auto branches = branching_table(levels::excited);
    bool thirds = branches.size() == 3;
    for (const auto& b : branches) thirds = thirds && std::abs(b.branching - 1.0 / 3.0) <= 1e-4;
    row("branching from P|1,-1>", fmt::format("{} channels at 1/3", branches.size()), "1/3 each", thirds);

    const double geo = collection_fraction(c.geometry, EmissionPattern::geometric);
    const double sig = collection_fraction(c.geometry, EmissionPattern::sigma);
    row("collection (geometric)", percent(geo), "13.3%", std::abs(geo - 0.133) <= 0.003);
    row("collection (sigma-weighted)", percent(sig), "14.3%", std::abs(sig - 0.143) <= 0.003);

    const double power = resolving_power(c.grating);
    row("resolving power", fmt::format("{:.0f}", power), "~95,000", std::abs(power / 95000.0 - 1.0) <= 0.01);
    const double res = resolution_from_spots(c.spots, c.splittings.ground_hyperfine);
    row("spectrometer resolution", fmt::format("{:.2f} GHz", res / units::GHz), "3.6(2) GHz",
        std::abs(res / units::GHz - 3.6) <= 0.2);
    const double ov = gaussian_overlap_infidelity(c.spots);
    row("spot overlap infidelity", percent(ov, 3), "<= 0.34%", ov <= 0.0034);
    const auto tp = c.throughput.product();
    row("spectrometer throughput", format_concise(tp, 100) + "%", "3.7(5)%",
        std::abs(tp.value - 0.037) <= 0.001 && std::abs(tp.sigma - 0.005) <= 0.001);

    const auto quoted = quoted_budget(c);
    row("coincidence/shot (budget)", sci(quoted.product.value) + " (" + format_concise(quoted.product, 100) + "%)",
        "0.011(2)%", format_concise(quoted.product, 100) == "0.011(2)");

    auto exp = make_experiment(c);
    exp.shots = c.shots;
    const auto summary = run_experiment(exp, {}, ctx.opt.workers);
    const double n_sigma = std::abs(summary.clicks - summary.expected_clicks()) / summary.binomial_sigma_clicks();
    row(fmt::format("clicks in {} shots", summary.shots),
        fmt::format("{} (analytic {:.0f})", summary.clicks, summary.expected_clicks()), "2006 (analytic ~1565)",
        n_sigma <= 3.0);
    row("coincidence/shot (simulated)", percent(summary.observed_rate(), 4), "0.013(3)%",
        std::abs(summary.observed_rate() - 1.3e-4) <= 0.3e-4);

    auto cond = exp;
    cond.diagnostics = true;
    const auto recs = importance_mode(cond, ctx.opt.clicks);
    const auto m = correlation_matrix(recs);
    const auto avg = m.average();
    row("P(down|nu0)", format_concise(m.fidelity_nu0(), 100) + "%", "95.2(7)%",
        std::abs(m.fidelity_nu0().value - 0.952) <= 0.025);
    row("P(up|nu1)", format_concise(m.fidelity_nu1(), 100) + "%", "89.6(10)%",
        std::abs(m.fidelity_nu1().value - 0.896) <= 0.025);
    rows.push_back({"avg correlation fidelity", format_concise(avg, 100) + "%", "92.4(8)%",
                    avg.value >= 0.899 && avg.value <= 0.949});

    const auto big = importance_mode(cond, 100'000);
    const auto eb = error_budget(big);
    const double ro = eb.fraction(ErrorSource::readout).value;
    const double sp = eb.fraction(ErrorSource::spectrometer).value;
    row("infidelity from readout", percent(ro), "~3.6%", std::abs(ro - 0.036) <= 0.01);
    row("infidelity from spectrometer", percent(sp), "2.4(5)%", std::abs(sp - 0.024) <= 0.01);

    const auto ro_model = make_readout_model(c);
    const auto ro_sim = simulate_readout_fidelity(ro_model, 100'000, c.seed);
    auto within3 = [](double p, double target, double n) { return std::abs(p - target) <= 3 * wald_error(target, n); };
    row("readout fidelity |up>", percent(ro_sim.up), "95.5%", within3(ro_sim.up, 0.955, 1e5));
    row("readout fidelity |down>", percent(ro_sim.down), "97.3%", within3(ro_sim.down, 0.973, 1e5));

    const auto seq = build_sequence(c.timings);
    row("experimental cycle", fmt::format("{:.0f} us", seq.total() / units::us), "1411 us",
        within_reference_cycle(seq));

    const auto sc = improvement_scenario(exp, improved_substitutions());
    row("improved fidelity", percent(sc.fidelity), "99.1%", sc.fidelity >= 0.99);
    row("improved success rate", fmt::format("{:.1f} Hz at {:.2f} kHz", sc.success_rate, sc.cycle_rate / 1e3),
        "~34 Hz at ~5 kHz", sc.success_rate >= 10.0 && sc.success_rate <= 100.0);

    std::size_t passed = 0;
    Json table = Json::array();
    r.say("{:<40} {:>26} {:>22}  {}", "quantity", "simulated", "reported", "status");
    for (const auto& x : rows) {
        passed += x.pass;
        r.say("{:<40} {:>26} {:>22}  {}", x.name, x.sim, x.reference, x.pass ? "PASS" : "FAIL");
        table.push_back({{"quantity", x.name}, {"simulated", x.sim}, {"reported", x.reference}, {"pass", x.pass}});
    }
    r.say("avg correlation fidelity: sim {}% vs paper 92.4(8)%", format_concise(avg, 100));
    r.say("{} of {} rows within tolerance", passed, rows.size());
    r.say("improved scenario is assumption-dependent; substitutions:");
    for (const auto& s : sc.substitutions) r.say("  {}", s);
    r.json = {{"rows", table}, {"passed", passed}, {"total", rows.size()}, {"scenario_substitutions", sc.substitutions}};
    r.artifacts["reproduce.json"] = r.json.dump(2) + "\n";
    return r;
}

// -------------------------------------------------------------------- main

inline void write_outputs(const Context& ctx, Report& report, const std::string& subcommand,
                          const std::vector<std::string>& argv, double seconds) {
    std::vector<std::string> outputs = report.streamed;
    for (const auto& [name, body] : report.artifacts) {
        std::ofstream f(artifact_path(ctx, name), std::ios::binary);
        f << body;
        if (!f) throw Error("io", "cannot write " + artifact_path(ctx, name).string());
        outputs.push_back(name);
    }
    Json manifest = {{"tool", "ionsim"},
                     {"version", kVersion},
                     {"subcommand", subcommand},
                     {"argv", argv},
                     {"seed", ctx.config.seed},
                     {"config", to_ini(ctx.config)},
                     {"outputs", outputs},
                     {"duration_s", seconds}};
    std::ofstream f(artifact_path(ctx, "manifest.json"), std::ios::binary);
    f << manifest.dump(2) << '\n';
    if (!f) throw Error("io", "cannot write manifest.json");
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Context ctx;
    auto& o = ctx.opt;
    CLI::App app{"ionsim: trapped-ion frequency-qubit correlation simulator", "ionsim"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config_path, "INI config file (falls back to IONSIM_CONFIG)");
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--shots", o.shots, "number of shots")->check(CLI::PositiveNumber);
        sub->add_option("--workers", o.workers, "worker threads (output is independent of this)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--out", o.out_dir, "directory for output files and manifest.json");
        sub->add_option("--format", o.format, "record/report format")->check(CLI::IsMember({"csv", "json"}));
        sub->add_flag("--diagnostics", o.diagnostics, "keep ground-truth labels in records");
    };
    std::map<std::string, std::function<Report(Context&)>> commands;
    auto sub = [&](const std::string& name, const std::string& help, std::function<Report(Context&)> fn) {
        auto* s = app.add_subcommand(name, help);
        add_common(s);
        commands[name] = std::move(fn);
        return s;
    };
    auto* lind = sub("lindblad", "excitation-pulse master-equation run and trajectory CSV", cmd_lindblad);
    lind->add_option("--rabi", o.rabi, "optical Rabi frequency in rad/s (default: calibrate)");
    lind->add_option("--sample-interval-ns", o.sample_interval_ns, "trajectory sample spacing")
        ->check(CLI::PositiveNumber);
    sub("sequence", "protocol timeline", cmd_sequence);
    sub("collection", "collection fractions", cmd_collection);
    sub("spectrometer", "spectrometer optics report", cmd_spectrometer);
    auto* ro = sub("readout-calibrate", "solve the readout model and check it", cmd_readout);
    ro->add_option("--trials", o.trials, "simulated trials per state")->check(CLI::PositiveNumber);
    auto* sim = sub("simulate", "shot-level Monte Carlo run", cmd_simulate);
    sim->add_flag("--clicks-only", o.clicks_only, "export only shots with a photon click");
    auto* an = sub("analyze", "correlation matrix, error budget and SVG", cmd_analyze);
    an->add_option("--input", o.input, "record file (.csv or .jsonl); default: importance-sample --clicks");
    an->add_option("--clicks", o.clicks, "conditioned clicks when no --input is given")->check(CLI::PositiveNumber);
    auto* bud = sub("budget", "efficiency and error budgets", cmd_budget);
    bud->add_option("--clicks", o.clicks, "conditioned clicks for the error budget")->check(CLI::PositiveNumber);
    auto* rep = sub("reproduce-paper", "full chain with default parameters against reported numbers", cmd_reproduce);
    rep->add_option("--clicks", o.clicks, "conditioned clicks for the correlation matrix")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return 0;
    } catch (const CLI::Success&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << '\n' << app.help();
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    std::vector<std::string> args(argv, argv + argc);
    try {
        const auto start = std::chrono::steady_clock::now();
        ctx.config = load_config(o);
        if (!o.out_dir.empty()) {
            ctx.out_dir = o.out_dir;
            std::filesystem::create_directories(ctx.out_dir);
        }
        auto report = commands.at(name)(ctx);
        if (o.format == "json") {
            out << report.json.dump(2) << '\n';
        } else {
            for (const auto& l : report.lines) out << l << '\n';
        }
        if (!ctx.out_dir.empty()) {
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            write_outputs(ctx, report, name, args, secs);
        }
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.code() << ": " << e.what() << '\n';
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << '\n';
    }
    return 1;
}

}  // namespace ionsim::cli
