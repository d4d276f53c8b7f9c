#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli_app.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "ionsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = ionsim::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("ionsim_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Cli, SimulateIsByteIdentical) {
    const auto a = scratch("a"), b = scratch("b"), c = scratch("c");
    ASSERT_EQ(run({"simulate", "--shots", "1000", "--seed", "7", "--out", a.string()}).code, 0);
    ASSERT_EQ(run({"simulate", "--shots", "1000", "--seed", "7", "--out", b.string()}).code, 0);
    ASSERT_EQ(run({"simulate", "--shots", "1000", "--seed", "7", "--workers", "4", "--out", c.string()}).code, 0);
    for (const char* f : {"records.csv", "summary.json"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
    }
    EXPECT_TRUE(slurp(a / "records.csv").starts_with("shot,photon,ion,timestamp\n"));
}

TEST(Cli, ManifestListsExistingOutputsAndReproduces) {
    const auto dir = scratch("manifest");
    ASSERT_EQ(run({"simulate", "--shots", "500", "--seed", "3", "--format", "json", "--out", dir.string()}).code, 0);
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(m["seed"], 3);
    for (const auto& f : m["outputs"]) EXPECT_TRUE(fs::exists(dir / f.get<std::string>())) << f;
    EXPECT_TRUE(fs::exists(dir / "records.jsonl"));

    // The config snapshot alone regenerates the records.
    const auto cfg = dir / "snapshot.ini";
    std::ofstream(cfg) << m["config"].get<std::string>();
    const auto again = scratch("manifest2");
    ASSERT_EQ(run({"simulate", "--config", cfg.string(), "--shots", "500", "--format", "json", "--out", again.string()})
                  .code,
              0);
    EXPECT_EQ(slurp(dir / "records.jsonl"), slurp(again / "records.jsonl"));
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"simulate", "--bogus"}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"simulate", "--format", "xml"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ConfigErrorsExitOneWithNamedKey) {
    const auto dir = scratch("badcfg");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.ini") << "[experiment]\nshotz = 5\n";
    const auto r = run({"sequence", "--config", (dir / "bad.ini").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err, "error: config: experiment.shotz: unknown key\n");
}

TEST(Cli, EnvironmentConfigFallback) {
    const auto dir = scratch("env");
    fs::create_directories(dir);
    std::ofstream(dir / "env.ini") << "[protocol]\ncycle_time = 2000 us\n";
    ::setenv("IONSIM_CONFIG", (dir / "env.ini").c_str(), 1);
    const auto r = run({"sequence"});
    ::unsetenv("IONSIM_CONFIG");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("cycle: 2000.000 us"), std::string::npos) << r.out;
}

TEST(Cli, BudgetLine) {
    const auto r = run({"budget"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("coincidence/shot: 1.05e−4 (0.011(2)%)"), std::string::npos) << r.out;
}

TEST(Cli, AnalyzeWritesSvg) {
    const auto sim = scratch("sim"), an = scratch("an");
    ASSERT_EQ(run({"simulate", "--shots", "200000", "--diagnostics", "--clicks-only", "--out", sim.string()}).code, 0);
    const auto r = run({"analyze", "--input", (sim / "records.csv").string(), "--out", an.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(slurp(an / "correlation.svg").starts_with("<svg"));
    EXPECT_NE(r.out.find("error budget"), std::string::npos);
}

TEST(Cli, AnalyzeWithoutClicksFails) {
    const auto dir = scratch("empty");
    fs::create_directories(dir);
    std::ofstream(dir / "r.csv") << "shot,photon,ion,timestamp\n0,none,up,0\n";
    const auto r = run({"analyze", "--input", (dir / "r.csv").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_TRUE(r.err.starts_with("error: empty-data:")) << r.err;
}

TEST(Cli, ReproducePaperTable) {
    const auto r = run({"reproduce-paper"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("avg correlation fidelity: sim "), std::string::npos);
    EXPECT_NE(r.out.find(" vs paper 92.4(8)%"), std::string::npos);
}

TEST(Cli, OtherSubcommandsRun) {
    for (const char* sub : {"sequence", "collection", "spectrometer"}) {
        const auto dir = scratch(sub);
        const auto r = run({sub, "--out", dir.string()});
        EXPECT_EQ(r.code, 0) << sub << r.err;
        EXPECT_TRUE(fs::exists(dir / "manifest.json"));
    }
    const auto r = run({"readout-calibrate", "--trials", "2000", "--format", "json"});
    EXPECT_EQ(r.code, 0);
    EXPECT_TRUE(nlohmann::json::accept(r.out));
    const auto l = run({"lindblad", "--rabi", "3.7e7"});
    EXPECT_EQ(l.code, 0);
    EXPECT_NE(l.out.find("microwave transfer"), std::string::npos);
}
