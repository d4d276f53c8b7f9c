#include <gtest/gtest.h>

#include <vector>

#include "ionsim/lindblad.hpp"
#include "ionsim/protocol.hpp"
#include "oracles.hpp"

using namespace ionsim;

TEST(Lindblad, PureStateInvariants) {
    const auto rho = DensityMatrix::pure(levels::ready);
    EXPECT_EQ(check_invariants(rho), "");
    EXPECT_NEAR(rho.purity(), 1.0, 1e-15);
    EXPECT_NEAR(rho.min_eigenvalue(), 0.0, 1e-15);
}

TEST(Lindblad, InvariantCheckFlagsBadStates) {
    DensityMatrix bad;
    bad.rho(0, 0) = 1.1;
    EXPECT_NE(check_invariants(bad), "");
    DensityMatrix neg;
    neg.rho(0, 0) = 1.5;
    neg.rho(1, 1) = -0.5;
    EXPECT_NE(check_invariants(neg), "");
}

TEST(Lindblad, RejectsInvalidInitialState) {
    DensityMatrix bad;
    bad.rho(0, 0) = 2.0;
    EXPECT_THROW(evolve(bad, {}, CollapseSet::from_rate(0.0), 0.0, 1e-6), Error);
}

TEST(Lindblad, DriveValidation) {
    DriveTerm d{levels::S10, levels::P10, 1e6, 0, 0, Envelope::rectangular, 0, 1e-6};
    EXPECT_THROW(d.validate(), Error);
    DriveTerm neg{levels::ready, levels::excited, -1.0, 0, 0, Envelope::rectangular, 0, 1e-6};
    EXPECT_THROW(neg.validate(), Error);
    DriveTerm back{levels::ready, levels::excited, 1.0, 0, 0, Envelope::rectangular, 1e-6, 0};
    EXPECT_THROW(back.validate(), Error);
}

TEST(Lindblad, InconsistentFrameLoopIsRejected) {
    std::vector<DriveTerm> drives{
        {levels::ready, levels::excited, 1e6, 0.0, 0, Envelope::rectangular, 0, 1e-6},
        {levels::down, levels::ready, 1e6, 0.0, 0, Envelope::rectangular, 0, 1e-6},
        {levels::down, levels::P1m, 1e6, 1e6, 0, Envelope::rectangular, 0, 1e-6},
    };
    EXPECT_THROW(rotating_frame_energies(drives), Error);
}

TEST(Lindblad, MicrowaveMatchesClosedForm) {
    const double rabi = rabi_from_pi_time(17e-6);
    for (double det : {0.0, 3e3, 9e3, 25e3}) {
        const double analytic = rabi_transfer_probability(rabi, det, 17e-6);
        EXPECT_NEAR(lindblad_transfer_probability(rabi, det, 17e-6), analytic, 1e-6) << det;
    }
    EXPECT_NEAR(rabi_transfer_probability(rabi, 0.0, 17e-6), 1.0, 1e-12);
}

TEST(Lindblad, ExcitationMatchesFourLevelRk4Oracle) {
    ExcitationPulse pulse;
    pulse.rabi = 3.7e7;
    const auto got = excitation_yield(pulse);
    const double gamma = 1.0 / pulse.lifetime;
    const auto ref = oracle::four_level_rk4(pulse.rabi, gamma, pulse.duration,
                                            pulse.duration + pulse.ringdown_lifetimes * pulse.lifetime, 2e-12);
    EXPECT_NEAR(got.nu1, ref.up, 1e-7);
    EXPECT_NEAR(got.nu0, ref.down, 1e-7);
    EXPECT_NEAR(got.residual_excited, ref.excited, 1e-7);
}

TEST(Lindblad, SaturatedPulseMatchesAbsorbingChain) {
    // ready → excited (certain re-excitation); excited → {ready, up, down}
    Eigen::MatrixXd Q(2, 2), R(2, 2);
    Q << 0.0, 1.0, 1.0 / 3.0, 0.0;
    R << 0.0, 0.0, 1.0 / 3.0, 1.0 / 3.0;
    const Eigen::MatrixXd B = oracle::absorption_probabilities(Q, R);

    ExcitationPulse pulse;
    pulse.duration = 2e-6;
    pulse.rabi = 5.0 / pulse.lifetime;
    const auto y = excitation_yield(pulse);
    EXPECT_NEAR(y.nu1, B(0, 0), 0.005);
    EXPECT_NEAR(y.nu0, B(0, 1), 0.005);
    EXPECT_NEAR(B(0, 0), 0.5, 1e-12);
}

TEST(Lindblad, EmissionBookkeepingMatchesPopulations) {
    ExcitationPulse pulse;
    pulse.rabi = 3.7e7;
    const auto r = simulate_excitation(pulse);
    EXPECT_NEAR(r.emission(levels::excited, levels::up), r.final_state.population(levels::up), 1e-9);
    EXPECT_NEAR(r.emission(levels::excited, levels::down), r.final_state.population(levels::down), 1e-9);
}

TEST(Lindblad, TrajectorySamplesAreRegular) {
    StepControl ctl;
    ctl.sample_interval = 1e-9;
    ExcitationPulse pulse;
    pulse.rabi = 3.7e7;
    const auto r = simulate_excitation(pulse, ctl);
    ASSERT_GE(r.trajectory.size(), 2u);
    for (std::size_t i = 1; i < r.trajectory.size(); ++i) {
        EXPECT_GT(r.trajectory[i].time, r.trajectory[i - 1].time);
    }
    EXPECT_NEAR(r.trajectory.back().time, pulse.duration + pulse.ringdown_lifetimes * pulse.lifetime, 1e-15);
}

TEST(Lindblad, StepUnderflowIsReported) {
    StepControl ctl;
    ctl.max_steps = 3;
    ExcitationPulse pulse;
    pulse.rabi = 3.7e7;
    try {
        simulate_excitation(pulse, ctl);
        FAIL() << "expected step limit";
    } catch (const Error& e) {
        EXPECT_TRUE(e.code() == "step-limit" || e.code() == "step-underflow") << e.code();
    }
}

TEST(Lindblad, GenerationWarnsOnShortRingdown) {
    ExcitationPulse pulse;
    pulse.rabi = 3.7e7;
    pulse.ringdown_lifetimes = 0.0;
    const auto y = excitation_yield(pulse);
    EXPECT_TRUE(y.warning.has_value());
}
