#include <gtest/gtest.h>

#include <fstream>

#include "ionsim/config.hpp"

using namespace ionsim;

namespace {

std::string error_of(const std::string& text) {
    try {
        parse_config_string(text);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "config");
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, ShippedDefaultsMatchBuiltIns) {
    std::ifstream in(std::string(IONSIM_SOURCE_DIR) + "/config/paper_defaults.ini");
    ASSERT_TRUE(in);
    const auto c = parse_config(in);
    EXPECT_EQ(to_ini(c), to_ini(Config{}));
}

TEST(Config, RoundTrip) {
    Config c;
    c.seed = 18446744073709551615ull;
    c.microwave.detuning = 12.5e3;
    c.readout.classifier = ReadoutClassifier::likelihood;
    c.photon.generation = {0.2, 0.01};
    c.scenario = Scenario::custom;
    const auto text = to_ini(c);
    EXPECT_EQ(to_ini(parse_config_string(text)), text);
}

TEST(Config, UnknownKeyNamesSectionAndKey) {
    EXPECT_EQ(error_of("[experiment]\nshotz = 10\n"), "experiment.shotz: unknown key");
    EXPECT_EQ(error_of("[experimnt]\nshots = 10\n"), "experimnt: unknown section");
}

TEST(Config, UnitsAreRequiredAndChecked) {
    EXPECT_NE(error_of("[protocol]\npump = 10\n").find("protocol.pump: missing unit"), std::string::npos);
    EXPECT_NE(error_of("[protocol]\npump = 10 ghz\n").find("does not fit"), std::string::npos);
    const auto c = parse_config_string("[protocol]\npump = 0.01 MS\n[atom]\nground_splitting = 12642.8 MHz\n");
    EXPECT_DOUBLE_EQ(c.timings.pump, 10e-6);
    EXPECT_DOUBLE_EQ(c.splittings.ground_hyperfine, 12642.8e6);
}

TEST(Config, MeasuredValuesAndPercent) {
    const auto c = parse_config_string("[photon]\ngeneration = 11.6 +/- 0.4 %\n[collection]\nfibre_efficiency = 0.03 ± 0.001\n");
    EXPECT_NEAR(c.photon.generation.value, 0.116, 1e-15);
    EXPECT_NEAR(c.photon.generation.sigma, 0.004, 1e-15);
    EXPECT_NEAR(c.fibre_efficiency.sigma, 0.001, 1e-15);
    EXPECT_NE(error_of("[protocol]\npump = 10 +/- 1 us\n").find("uncertainty"), std::string::npos);
}

TEST(Config, ValueValidation) {
    EXPECT_NE(error_of("[experiment]\nshots = 0\n").find("experiment.shots"), std::string::npos);
    EXPECT_NE(error_of("[experiment]\nshots = -3\n").find("experiment.shots"), std::string::npos);
    EXPECT_NE(error_of("[photon]\nnu1_share = 1.5\n").find("photon.nu1_share"), std::string::npos);
    EXPECT_NE(error_of("[readout]\nclassifier = magic\n").find("readout.classifier"), std::string::npos);
    EXPECT_NE(error_of("[excitation]\ncouple_neighbors = maybe\n").find("excitation.couple_neighbors"),
              std::string::npos);
    EXPECT_NE(error_of("[protocol]\ncycle_time = 100 us\n").find("protocol"), std::string::npos);
    EXPECT_NE(error_of("[protocol\n").find("line"), std::string::npos);
}

TEST(Config, ExperimentFromConfig) {
    const auto e = make_experiment(Config{});
    EXPECT_EQ(e.shots, 14'883'327u);
    EXPECT_NEAR(analytic_threshold_fidelities(e.readout).up, 0.955, 1e-3);
    Config improved;
    improved.scenario = Scenario::improved;
    const auto i = make_experiment(improved);
    EXPECT_EQ(i.scenario, Scenario::improved);
    EXPECT_NEAR(i.readout.window, 176e-6, 1e-15);
}
