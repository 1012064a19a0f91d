#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "test_support.hpp"

using namespace drsim;

TEST(ResolveBetaHat, Forms) {
    const Vector beta{0.5, 2.0};
    EXPECT_EQ(resolve_beta_hat("ones", beta), (Vector{1.0, 1.0}));
    EXPECT_EQ(resolve_beta_hat("true", beta), beta);
    EXPECT_EQ(resolve_beta_hat("x2", beta), (Vector{1.0, 4.0}));
    EXPECT_EQ(resolve_beta_hat("0.7", beta), (Vector{0.7, 0.7}));
    EXPECT_EQ(resolve_beta_hat("0.7,1.5", beta), (Vector{0.7, 1.5}));
    EXPECT_THROW(resolve_beta_hat("1,2,3", beta), ConfigError);
    EXPECT_THROW(resolve_beta_hat("x0", beta), ConfigError);
    EXPECT_THROW(resolve_beta_hat("-1", beta), ConfigError);
    EXPECT_THROW(resolve_beta_hat("abc", beta), ConfigError);
    EXPECT_THROW(resolve_beta_hat("1.5kg", beta), ConfigError);
}

TEST(FormatNumber, RoundTripsAndRejectsNonFinite) {
    EXPECT_EQ(std::stod(format_number(0.1)), 0.1);
    EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
    EXPECT_THROW(format_number(std::numeric_limits<double>::quiet_NaN()), Error);
    EXPECT_THROW(format_number(std::numeric_limits<double>::infinity()), Error);
}

TEST(Reference, StaticScheduleHasNoPathVariation) {
    const ProblemSchedule schedule(one_node_scenario().problem);
    const Reference ref = compute_reference(schedule, 100);
    EXPECT_EQ(ref.Delta, 0.0);
    EXPECT_NEAR(ref.saddle_at(57).lambda, 250.0 / 107.0, 1e-13);
    EXPECT_NEAR(ref.lcqp_at(0)[0], 0.5, 1e-12);
}

TEST(Reference, TimeVaryingScheduleMoves) {
    const Scenario tv = build_timevarying_scenario(testing_support::bundled_nominal_loads(), 3);
    const Reference ref = compute_reference(tv.schedule(), 300);
    EXPECT_EQ(ref.saddle.size(), 300u);
    EXPECT_GT(ref.Delta, 0.0);
    PathVariationTracker tracker;
    for (const auto& z : ref.saddle) tracker.push(z);
    EXPECT_EQ(tracker.value(), ref.Delta);
}

TEST(Compare, NoiselessExactSensitivitiesFromSaddleAgree) {
    Scenario sc = build_static_scenario(testing_support::bundled_nominal_loads(), 1);
    sc.problem.response.family = ResponseFamily::deterministic;
    ExperimentSettings s;
    s.runs = 2;
    s.steps = 200;
    s.start_at_saddle = true;
    const Comparison cmp = compare_variants(sc, sc.problem.response.beta, s, std::nullopt);
    const auto& po = cmp.of(Variant::PO).stats;
    const auto& sinpo = cmp.of(Variant::StochasticInPO).stats;
    const auto& inpo = cmp.of(Variant::InPO).stats;
    for (std::size_t t = 0; t < 200; ++t) {
        ASSERT_NEAR(po.p0_mean[t], sinpo.p0_mean[t], 1e-9) << t;
        ASSERT_NEAR(po.p0_mean[t], inpo.p0_mean[t], 1e-9) << t;
        ASSERT_NEAR(po.cost_mean[t], sinpo.cost_mean[t], 1e-9) << t;
    }
}

TEST(Compare, WritesAllTables) {
    const auto dir = std::filesystem::temp_directory_path() / "drsim_compare_test";
    std::filesystem::remove_all(dir);
    ExperimentSettings s;
    s.runs = 3;
    s.steps = 50;
    const Scenario sc = one_node_scenario(2);
    compare_variants(sc, Vector{1.0}, s, dir.string());
    for (const char* f : {"compare_p0.csv", "compare_cost.csv", "compare_summary.csv"}) {
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    }
    std::filesystem::remove_all(dir);
}

TEST(RunVariant, DivergenceRaises) {
    const Scenario sc = build_static_scenario(testing_support::bundled_nominal_loads(), 1);
    ExperimentSettings s;
    s.runs = 2;
    s.steps = 50;
    s.epsilon = 5.0;
    EXPECT_THROW(run_experiment(sc, Variant::StochasticInPO, Vector(25, 1.0), s, std::nullopt), DivergenceError);
    // The offline iteration tolerates larger steps before the guard trips.
    s.epsilon = 50.0;
    s.offline_max_iters = 10000;
    EXPECT_THROW(run_experiment(sc, Variant::PO, Vector(25, 1.0), s, std::nullopt), DivergenceError);
}

TEST(TheoreticalFloor, FallsBackToCertifiedStep) {
    const Problem p = one_node_scenario().problem;
    const FloorInfo big = theoretical_floor(p, Vector{2.0}, 0.01);
    EXPECT_FALSE(big.certified);
    const double eps = certified_step(0.01, lipschitz_constant(p));
    const FloorInfo cert = theoretical_floor(p, Vector{2.0}, eps);
    EXPECT_TRUE(cert.certified);
    EXPECT_DOUBLE_EQ(big.floor, cert.floor);
}

TEST(VerifyBounds, OneNodeHoldsAndCorruptedFloorFails) {
    const Scenario sc = one_node_scenario(1);
    ExperimentSettings s;
    s.runs = 30;
    s.steps = 3000;
    const BoundReport ok = verify_bounds(sc, Vector{1.0}, s, std::nullopt, 1.0, std::nullopt);
    EXPECT_FALSE(ok.first_violation.has_value());
    EXPECT_NEAR(ok.bounds.L, 7.13986282320748, 1e-12);

    s.start_at_saddle = true;
    const BoundReport bad = verify_bounds(sc, Vector{2.0}, s, std::nullopt, 0.0, std::nullopt);
    EXPECT_TRUE(bad.first_violation.has_value());
    EXPECT_THROW(verify_bounds(sc, Vector{1.0}, s, 0.5, 1.0, std::nullopt), CertifiedRegimeError);
}
