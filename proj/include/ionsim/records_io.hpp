#pragma once

#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ionsim/error.hpp"
#include "ionsim/montecarlo.hpp"

// Click-record export and import: CSV and JSON lines. Truth columns are
// written only for records that carry them.
namespace ionsim {

inline std::string csv_header(bool diagnostics) {
    return diagnostics ? "shot,photon,ion,timestamp,prep,branch,true_ion,dark_click" : "shot,photon,ion,timestamp";
}

inline std::string to_csv_line(const ClickRecord& r) {
    std::string line = fmt::format("{},{},{},{}", r.shot, to_string(r.photon), to_string(r.ion), r.timestamp);
    if (r.truth) {
        line += fmt::format(",{},{},{},{}", to_string(r.truth->prep), to_string(r.truth->branch),
                            to_string(r.truth->ion), r.truth->dark_click ? 1 : 0);
    }
    return line;
}

inline nlohmann::ordered_json to_json(const ClickRecord& r) {
    nlohmann::ordered_json j;
    j["shot"] = r.shot;
    j["photon"] = to_string(r.photon);
    j["ion"] = to_string(r.ion);
    j["timestamp"] = r.timestamp;
    if (r.truth) {
        j["truth"] = {{"prep", to_string(r.truth->prep)},
                      {"branch", to_string(r.truth->branch)},
                      {"ion", to_string(r.truth->ion)},
                      {"dark_click", r.truth->dark_click}};
    }
    return j;
}

inline std::string to_json_line(const ClickRecord& r) { return to_json(r).dump(); }

namespace records_detail {

template <class E, std::size_t N>
E parse_enum(const std::string& text, const E (&values)[N], const char* what) {
    for (E v : values) {
        if (text == to_string(v)) return v;
    }
    throw Error("bad-record", fmt::format("unknown {} '{}'", what, text));
}

inline PhotonOutcome parse_photon(const std::string& s) {
    static const PhotonOutcome v[] = {PhotonOutcome::none, PhotonOutcome::nu0, PhotonOutcome::nu1};
    return parse_enum(s, v, "photon outcome");
}
inline IonState parse_ion(const std::string& s) {
    static const IonState v[] = {IonState::down, IonState::up};
    return parse_enum(s, v, "ion state");
}
inline PreparationResult parse_prep(const std::string& s) {
    static const PreparationResult v[] = {PreparationResult::ready, PreparationResult::transfer_failed,
                                          PreparationResult::pump_failed};
    return parse_enum(s, v, "preparation result");
}
inline Branch parse_branch(const std::string& s) {
    static const Branch v[] = {Branch::none, Branch::nu0, Branch::nu1, Branch::pi};
    return parse_enum(s, v, "branch");
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

}  // namespace records_detail

inline std::vector<ClickRecord> read_records_csv(std::istream& in) {
    using namespace records_detail;
    std::string line;
    if (!std::getline(in, line)) throw Error("empty-data", "record file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const bool diagnostics = line == csv_header(true);
    if (!diagnostics && line != csv_header(false)) throw Error("bad-record", "unexpected CSV header '" + line + "'");
    std::vector<ClickRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split(line);
        if (f.size() != (diagnostics ? 8u : 4u)) {
            throw Error("bad-record", fmt::format("line {}: expected {} fields", line_no, diagnostics ? 8 : 4));
        }
        ClickRecord r;
        try {
            r.shot = std::stoull(f[0]);
            r.timestamp = std::stod(f[3]);
        } catch (const std::exception&) {
            throw Error("bad-record", fmt::format("line {}: malformed number", line_no));
        }
        r.photon = parse_photon(f[1]);
        r.ion = parse_ion(f[2]);
        if (diagnostics) r.truth = ShotTruth{parse_prep(f[4]), parse_branch(f[5]), parse_ion(f[6]), f[7] == "1"};
        out.push_back(r);
    }
    return out;
}

inline std::vector<ClickRecord> read_records_jsonl(std::istream& in) {
    using namespace records_detail;
    std::vector<ClickRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ClickRecord r;
            r.shot = j.at("shot").get<std::uint64_t>();
            r.photon = parse_photon(j.at("photon").get<std::string>());
            r.ion = parse_ion(j.at("ion").get<std::string>());
            r.timestamp = j.at("timestamp").get<double>();
            if (j.contains("truth")) {
                const auto& t = j["truth"];
                r.truth = ShotTruth{parse_prep(t.at("prep").get<std::string>()),
                                    parse_branch(t.at("branch").get<std::string>()),
                                    parse_ion(t.at("ion").get<std::string>()), t.at("dark_click").get<bool>()};
            }
            out.push_back(r);
        } catch (const nlohmann::json::exception& e) {
            throw Error("bad-record", fmt::format("line {}: {}", line_no, e.what()));
        }
    }
    return out;
}

}  // namespace ionsim
