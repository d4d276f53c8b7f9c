#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "ionsim/analysis.hpp"
#include "ionsim/atom_model.hpp"
#include "ionsim/collection.hpp"
#include "ionsim/error.hpp"
#include "ionsim/montecarlo.hpp"
#include "ionsim/protocol.hpp"
#include "ionsim/readout.hpp"
#include "ionsim/spectrometer.hpp"
#include "ionsim/units.hpp"

// INI configuration. Every physical quantity carries a unit suffix that is
// checked against the key's dimension; unknown sections and keys are
// errors.
namespace ionsim {

struct ExcitationSettings {
    double lifetime = 8.1 * units::ns;
    double ringdown_lifetimes = 10.0;
    bool couple_neighbors = false;
};

// The readout window is protocol.readout.
struct ReadoutSettings {
    double bright_rate = 10.0 * units::kHz;
    double target_up = 0.955;
    double target_down = 0.973;
    int threshold = 1;
    ReadoutClassifier classifier = ReadoutClassifier::threshold;
};

struct Config {
    std::uint64_t shots = 14'883'327;
    std::uint64_t seed = 20211;
    Scenario scenario = Scenario::paper_default;

    LevelSplittings splittings{};
    ProtocolTimings timings{};
    MicrowaveSettings microwave{};
    double pump_fidelity = 1.0;
    ExcitationSettings excitation{};
    PhotonSource photon{};
    CollectionGeometry geometry{};
    Measured fibre_efficiency{0.027, 0.003};
    GratingSpec grating{};
    SpotPair spots{};
    ClassificationMatrix classification{};
    ThroughputChain throughput{};
    double dark_rate = 0.0;
    ReadoutSettings readout{};
    // Stage values as quoted for the coincidence budget.
    Measured budget_preparation{0.91, 0.04};
    Measured budget_detection{0.037, 0.005};
};

inline Error config_error(const std::string& what) { return Error("config", what); }

namespace config_detail {

enum class Dim { none, time, frequency, rate, length, per_length, angle, integer, boolean, text };

inline const std::map<std::string, double>& unit_table(Dim d) {
    static const std::map<Dim, std::map<std::string, double>> tables{
        {Dim::none, {{"", 1.0}, {"%", 0.01}}},
        {Dim::time, {{"s", units::s}, {"ms", units::ms}, {"us", units::us}, {"ns", units::ns}, {"ps", 1e-12}}},
        {Dim::frequency,
         {{"hz", units::Hz}, {"khz", units::kHz}, {"mhz", units::MHz}, {"ghz", units::GHz}, {"thz", units::THz}}},
        {Dim::rate, {{"hz", 1.0}, {"khz", 1e3}, {"mhz", 1e6}, {"per_s", 1.0}, {"/s", 1.0}, {"cps", 1.0}}},
        {Dim::length, {{"m", units::m}, {"mm", units::mm}, {"um", units::um}, {"nm", units::nm}}},
        {Dim::per_length, {{"per_m", 1.0}, {"per_mm", units::per_mm}, {"/mm", units::per_mm}, {"/m", 1.0}}},
        {Dim::angle, {{"deg", units::deg}, {"rad", units::rad}}},
        {Dim::integer, {{"", 1.0}}},
    };
    return tables.at(d);
}

inline const char* canonical_unit(Dim d) {
    switch (d) {
        case Dim::time: return "us";
        case Dim::frequency: return "ghz";
        case Dim::rate: return "per_s";
        case Dim::length: return "um";
        case Dim::per_length: return "per_mm";
        case Dim::angle: return "deg";
        default: return "";
    }
}

struct Quantity {
    double value = 0.0;
    double sigma = 0.0;
    bool has_sigma = false;
};

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

/// "number [+/- number] [unit]"
inline Quantity parse_quantity(const std::string& name, const std::string& raw, Dim dim) {
    static const std::regex pattern(
        R"(^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(?:(?:\+/-|±)\s*((?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))?\s*([A-Za-z_/%]*)\s*$)");
    std::smatch m;
    if (!std::regex_match(raw, m, pattern)) throw config_error(name + ": cannot parse '" + raw + "'");
    const std::string unit = lower(m[3].str());
    const auto& table = unit_table(dim);
    const auto it = table.find(unit);
    if (it == table.end()) {
        if (unit.empty()) throw config_error(name + ": missing unit (e.g. '" + canonical_unit(dim) + "')");
        throw config_error(name + ": unit '" + m[3].str() + "' does not fit this quantity");
    }
    Quantity q;
    q.value = std::stod(m[1].str()) * it->second;
    if (m[2].matched) {
        q.sigma = std::stod(m[2].str()) * it->second;
        q.has_sigma = true;
    }
    if (dim == Dim::integer && q.value != std::floor(q.value)) throw config_error(name + ": expected an integer");
    return q;
}

inline bool parse_bool(const std::string& name, const std::string& raw) {
    const auto v = lower(trim(raw));
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw config_error(name + ": expected true or false, got '" + raw + "'");
}

inline std::string format_number(double v) { return fmt::format("{}", v); }

struct KeySpec {
    std::string section;
    std::string key;
    Dim dim = Dim::none;
    bool measured = false;  // accepts "+/- sigma"
    std::function<void(Config&, const std::string& name, const std::string& raw)> set;
    std::function<std::string(const Config&)> get;
};

// Scalar quantity bound to a double member.
template <class Access>
KeySpec scalar(std::string section, std::string key, Dim dim, Access access) {
    KeySpec k{section, key, dim, false, {}, {}};
    k.set = [dim, access](Config& c, const std::string& name, const std::string& raw) {
        const auto q = parse_quantity(name, raw, dim);
        if (q.has_sigma) throw config_error(name + ": this key does not take an uncertainty");
        access(c) = q.value;
    };
    k.get = [dim, access](const Config& c) {
        const double scale = unit_table(dim).at(canonical_unit(dim));
        const std::string unit = canonical_unit(dim);
        return format_number(access(const_cast<Config&>(c)) / scale) + (unit.empty() ? "" : " " + unit);
    };
    return k;
}

template <class Access>
KeySpec measured(std::string section, std::string key, Access access) {
    KeySpec k{section, key, Dim::none, true, {}, {}};
    k.set = [access](Config& c, const std::string& name, const std::string& raw) {
        const auto q = parse_quantity(name, raw, Dim::none);
        access(c) = Measured{q.value, q.sigma};
    };
    k.get = [access](const Config& c) {
        const Measured m = access(const_cast<Config&>(c));
        return format_number(m.value) + " +/- " + format_number(m.sigma);
    };
    return k;
}

template <class T, class Access>
KeySpec integer(std::string section, std::string key, Access access) {
    KeySpec k{section, key, Dim::integer, false, {}, {}};
    k.set = [access](Config& c, const std::string& name, const std::string& raw) {
        const auto v = trim(raw);
        T parsed{};
        const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), parsed);
        if (ec != std::errc{} || end != v.data() + v.size() || v.empty() || std::cmp_less(parsed, 0)) {
            throw config_error(name + ": expected a non-negative integer, got '" + raw + "'");
        }
        access(c) = static_cast<T>(parsed);
    };
    k.get = [access](const Config& c) { return std::to_string(access(const_cast<Config&>(c))); };
    return k;
}

template <class Access>
KeySpec boolean(std::string section, std::string key, Access access) {
    KeySpec k{section, key, Dim::boolean, false, {}, {}};
    k.set = [access](Config& c, const std::string& name, const std::string& raw) { access(c) = parse_bool(name, raw); };
    k.get = [access](const Config& c) { return std::string(access(const_cast<Config&>(c)) ? "true" : "false"); };
    return k;
}

inline Measured& throughput_stage(Config& c, const std::string& stage) {
    for (auto& s : c.throughput.stages) {
        if (s.name == stage) return s.factor;
    }
    c.throughput.stages.push_back({stage, {1.0, 0.0}});
    return c.throughput.stages.back().factor;
}

inline const std::vector<KeySpec>& key_table() {
    using D = Dim;
    static const std::vector<KeySpec> table = [] {
        std::vector<KeySpec> t;
        t.push_back(integer<std::uint64_t>("experiment", "shots", [](Config& c) -> auto& { return c.shots; }));
        t.push_back(integer<std::uint64_t>("experiment", "seed", [](Config& c) -> auto& { return c.seed; }));
        {
            KeySpec k{"experiment", "scenario", D::text, false, {}, {}};
            k.set = [](Config& c, const std::string& name, const std::string& raw) {
                const auto v = lower(trim(raw));
                if (v == "paper-default") c.scenario = Scenario::paper_default;
                else if (v == "improved") c.scenario = Scenario::improved;
                else if (v == "custom") c.scenario = Scenario::custom;
                else throw config_error(name + ": expected paper-default, improved or custom");
            };
            k.get = [](const Config& c) { return std::string(to_string(c.scenario)); };
            t.push_back(k);
        }

        t.push_back(scalar("atom", "ground_splitting", D::frequency, [](Config& c) -> auto& { return c.splittings.ground_hyperfine; }));
        t.push_back(scalar("atom", "excited_splitting", D::frequency, [](Config& c) -> auto& { return c.splittings.excited_hyperfine; }));
        t.push_back(scalar("atom", "carrier_frequency", D::frequency, [](Config& c) -> auto& { return c.splittings.optical_carrier; }));
        t.push_back(scalar("atom", "zeeman_shift_per_mf", D::frequency, [](Config& c) -> auto& { return c.splittings.zeeman_shift_per_mF; }));
        t.push_back(scalar("atom", "excited_lifetime", D::time, [](Config& c) -> auto& { return c.excitation.lifetime; }));

        t.push_back(scalar("protocol", "pump", D::time, [](Config& c) -> auto& { return c.timings.pump; }));
        t.push_back(scalar("protocol", "microwave", D::time, [](Config& c) -> auto& { return c.timings.microwave; }));
        t.push_back(scalar("protocol", "excitation", D::time, [](Config& c) -> auto& { return c.timings.excitation; }));
        t.push_back(scalar("protocol", "photon_gate", D::time, [](Config& c) -> auto& { return c.timings.photon_gate; }));
        t.push_back(scalar("protocol", "readout", D::time, [](Config& c) -> auto& { return c.timings.readout; }));
        t.push_back(scalar("protocol", "cycle_time", D::time, [](Config& c) -> auto& { return c.timings.cycle_time; }));

        t.push_back(scalar("preparation", "pump_fidelity", D::none, [](Config& c) -> auto& { return c.pump_fidelity; }));
        t.push_back(scalar("preparation", "pi_time", D::time, [](Config& c) -> auto& { return c.microwave.pi_time; }));
        t.push_back(scalar("preparation", "microwave_frequency", D::frequency, [](Config& c) -> auto& { return c.microwave.frequency; }));
        t.push_back(scalar("preparation", "microwave_detuning", D::frequency, [](Config& c) -> auto& { return c.microwave.detuning; }));
        t.push_back(scalar("preparation", "detuning_sigma", D::frequency, [](Config& c) -> auto& { return c.microwave.detuning_sigma; }));
        t.push_back(boolean("preparation", "sample_detuning", [](Config& c) -> auto& { return c.microwave.sample_detuning; }));

        t.push_back(scalar("excitation", "ringdown_lifetimes", D::none, [](Config& c) -> auto& { return c.excitation.ringdown_lifetimes; }));
        t.push_back(boolean("excitation", "couple_neighbors", [](Config& c) -> auto& { return c.excitation.couple_neighbors; }));

        t.push_back(measured("photon", "generation", [](Config& c) -> auto& { return c.photon.generation; }));
        t.push_back(scalar("photon", "nu1_share", D::none, [](Config& c) -> auto& { return c.photon.nu1_share; }));
        t.push_back(scalar("photon", "pi_leak_fraction", D::none, [](Config& c) -> auto& { return c.photon.pi_leak_fraction; }));

        t.push_back(scalar("collection", "aperture_width", D::length, [](Config& c) -> auto& { return c.geometry.width; }));
        t.push_back(scalar("collection", "aperture_height", D::length, [](Config& c) -> auto& { return c.geometry.height; }));
        t.push_back(scalar("collection", "distance", D::length, [](Config& c) -> auto& { return c.geometry.distance; }));
        t.push_back(scalar("collection", "numerical_aperture", D::none, [](Config& c) -> auto& { return c.geometry.numerical_aperture; }));
        t.push_back(measured("collection", "fibre_efficiency", [](Config& c) -> auto& { return c.fibre_efficiency; }));

        t.push_back(scalar("spectrometer", "line_density", D::per_length, [](Config& c) -> auto& { return c.grating.line_density; }));
        t.push_back(scalar("spectrometer", "ruled_width", D::length, [](Config& c) -> auto& { return c.grating.ruled_width; }));
        t.push_back(scalar("spectrometer", "ruled_height", D::length, [](Config& c) -> auto& { return c.grating.ruled_height; }));
        t.push_back(scalar("spectrometer", "operating_angle", D::angle, [](Config& c) -> auto& { return c.grating.operating_angle; }));
        t.push_back(integer<int>("spectrometer", "order", [](Config& c) -> auto& { return c.grating.order; }));
        t.push_back(scalar("spectrometer", "beam_diameter", D::length, [](Config& c) -> auto& { return c.grating.beam_diameter; }));
        t.push_back(scalar("spectrometer", "spot0_diameter", D::length, [](Config& c) -> auto& { return c.spots.diameter0; }));
        t.push_back(scalar("spectrometer", "spot1_diameter", D::length, [](Config& c) -> auto& { return c.spots.diameter1; }));
        t.push_back(scalar("spectrometer", "spot_separation", D::length, [](Config& c) -> auto& { return c.spots.separation; }));
        t.push_back(measured("spectrometer", "fidelity_nu0", [](Config& c) -> auto& { return c.classification.nu0; }));
        t.push_back(measured("spectrometer", "fidelity_nu1", [](Config& c) -> auto& { return c.classification.nu1; }));
        t.push_back(measured("spectrometer", "fibre_coupling", [](Config& c) -> auto& { return throughput_stage(c, "fibre coupling"); }));
        t.push_back(measured("spectrometer", "grating_efficiency", [](Config& c) -> auto& { return throughput_stage(c, "grating and optics"); }));
        t.push_back(measured("spectrometer", "pmt_quantum_efficiency", [](Config& c) -> auto& { return throughput_stage(c, "PMT quantum efficiency"); }));
        t.push_back(scalar("spectrometer", "dark_rate", D::rate, [](Config& c) -> auto& { return c.dark_rate; }));

        t.push_back(scalar("readout", "bright_rate", D::rate, [](Config& c) -> auto& { return c.readout.bright_rate; }));
        t.push_back(scalar("readout", "target_up", D::none, [](Config& c) -> auto& { return c.readout.target_up; }));
        t.push_back(scalar("readout", "target_down", D::none, [](Config& c) -> auto& { return c.readout.target_down; }));
        t.push_back(integer<int>("readout", "threshold", [](Config& c) -> auto& { return c.readout.threshold; }));
        {
            KeySpec k{"readout", "classifier", D::text, false, {}, {}};
            k.set = [](Config& c, const std::string& name, const std::string& raw) {
                const auto v = lower(trim(raw));
                if (v == "threshold") c.readout.classifier = ReadoutClassifier::threshold;
                else if (v == "likelihood") c.readout.classifier = ReadoutClassifier::likelihood;
                else throw config_error(name + ": expected threshold or likelihood");
            };
            k.get = [](const Config& c) {
                return std::string(c.readout.classifier == ReadoutClassifier::threshold ? "threshold" : "likelihood");
            };
            t.push_back(k);
        }

        t.push_back(measured("budget", "preparation", [](Config& c) -> auto& { return c.budget_preparation; }));
        t.push_back(measured("budget", "detection", [](Config& c) -> auto& { return c.budget_detection; }));
        return t;
    }();
    return table;
}

}  // namespace config_detail

/// Fields the loader cannot express through the key table.
inline void validate(const Config& c) {
    if (c.shots < 1) throw config_error("experiment.shots: must be >= 1");
    auto unit = [](const char* name, double v) {
        if (!(v >= 0.0 && v <= 1.0)) throw config_error(std::string(name) + ": must lie in [0, 1]");
    };
    unit("preparation.pump_fidelity", c.pump_fidelity);
    unit("photon.generation", c.photon.generation.value);
    unit("photon.nu1_share", c.photon.nu1_share);
    unit("photon.pi_leak_fraction", c.photon.pi_leak_fraction);
    unit("collection.fibre_efficiency", c.fibre_efficiency.value);
    unit("readout.target_up", c.readout.target_up);
    unit("readout.target_down", c.readout.target_down);
    unit("budget.preparation", c.budget_preparation.value);
    unit("budget.detection", c.budget_detection.value);
    for (const auto& s : c.throughput.stages) unit(("spectrometer." + s.name).c_str(), s.factor.value);
    auto guarded = [](const char* section, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            throw config_error(std::string(section) + ": " + e.what());
        }
    };
    guarded("atom", [&] { c.splittings.validate(); });
    guarded("collection", [&] { c.geometry.validate(); });
    guarded("spectrometer", [&] {
        c.grating.validate();
        c.spots.validate();
        c.classification.validate();
    });
    guarded("protocol", [&] { (void)build_sequence(c.timings); });
}

/// Applies an INI document on top of `base`.
inline Config parse_config(std::istream& in, Config base = {}) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw config_error(fmt::format("line {}: {}", e.line(), e.message()));
    }
    const auto& table = config_detail::key_table();
    std::set<std::string> sections;
    for (const auto& k : table) sections.insert(k.section);
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw config_error(section + ": key outside any section");
        if (!sections.contains(section)) throw config_error(section + ": unknown section");
        for (const auto& [key, value] : body) {
            const auto it = std::find_if(table.begin(), table.end(),
                                         [&](const auto& k) { return k.section == section && k.key == key; });
            const std::string name = section + "." + key;
            if (it == table.end()) throw config_error(name + ": unknown key");
            it->set(base, name, value.data());
        }
    }
    validate(base);
    return base;
}

inline Config parse_config_string(const std::string& text, Config base = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(base));
}

inline Config load_config_file(const std::string& path, Config base = {}) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    return parse_config(in, std::move(base));
}

/// Canonical INI text; parsing it back reproduces the same Config.
inline std::string to_ini(const Config& c) {
    std::string out;
    std::string current;
    for (const auto& k : config_detail::key_table()) {
        if (k.section != current) {
            out += (current.empty() ? "" : "\n") + fmt::format("[{}]\n", k.section);
            current = k.section;
        }
        out += fmt::format("{} = {}\n", k.key, k.get(c));
    }
    return out;
}

inline ReadoutModel make_readout_model(const Config& c) {
    auto m = calibrate_readout(c.readout.target_up, c.readout.target_down, c.timings.readout, c.readout.bright_rate,
                               c.readout.threshold);
    m.classifier = c.readout.classifier;
    return m;
}

inline ExcitationPulse make_excitation_pulse(const Config& c) {
    ExcitationPulse p;
    p.duration = c.timings.excitation;
    p.lifetime = c.excitation.lifetime;
    p.ringdown_lifetimes = c.excitation.ringdown_lifetimes;
    p.couple_neighbors = c.excitation.couple_neighbors;
    p.splittings = c.splittings;
    return p;
}

/// Experiment parameters for the configured scenario. The readout model is
/// calibrated to the configured fidelity targets.
inline ExperimentConfig make_experiment(const Config& c) {
    ExperimentConfig e;
    e.shots = c.shots;
    e.seed = c.seed;
    e.scenario = c.scenario;
    e.timings = c.timings;
    e.pump_fidelity = c.pump_fidelity;
    e.microwave = c.microwave;
    e.photon = c.photon;
    e.fibre_efficiency = c.fibre_efficiency;
    e.throughput = c.throughput;
    e.spectrometer = c.classification;
    e.dark_rate = c.dark_rate;
    e.readout = make_readout_model(c);
    if (c.scenario == Scenario::improved) {
        e = improvement_scenario(e, improved_substitutions()).config;
        e.shots = c.shots;
        e.seed = c.seed;
    }
    return e;
}

}  // namespace ionsim
