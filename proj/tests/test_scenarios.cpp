#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "test_support.hpp"

using namespace drsim;
using testing_support::bundled_nominal_loads;

TEST(StaticScenario, Defaults) {
    const Scenario sc = build_static_scenario(bundled_nominal_loads(), 1);
    const Problem& p = sc.problem;
    EXPECT_EQ(p.size(), 25u);
    EXPECT_EQ(p.feeder.s(), Vector(25, 1.0));
    EXPECT_EQ(p.feeder.r(), Vector(25, 0.0));
    EXPECT_EQ(p.feeder.d_hat(), bundled_nominal_loads());
    EXPECT_EQ(p.params.kappa, 5.0);
    EXPECT_EQ(p.params.eta, 0.01);
    EXPECT_EQ(p.tariff.pi, 2.0);
    EXPECT_EQ(p.tariff.pi0, 1.0);
    EXPECT_EQ(p.tariff.x_min, 0.0);
    EXPECT_EQ(p.tariff.x_max, 1.0);
    EXPECT_EQ(p.target.window_start, 600u);
    EXPECT_EQ(p.target.window_end, 900u);
    EXPECT_EQ(p.response.family, ResponseFamily::gaussian);
    EXPECT_EQ(p.response.zeta, 1.0);
    for (std::size_t n = 0; n < 25; ++n) EXPECT_DOUBLE_EQ(p.response.sigma0[n], 0.1 * p.feeder.delta()[n]);
    EXPECT_GE(p.params.lambda_cap, 10.0);
    EXPECT_DOUBLE_EQ(p.params.lambda_cap, std::max(10.0, 10.0 * p.p0_tilde()));
    EXPECT_FALSE(sc.profiles.has_value());
}

TEST(StaticScenario, SameSeedSameScenario) {
    const Scenario a = build_static_scenario(bundled_nominal_loads(), 7);
    const Scenario b = build_static_scenario(bundled_nominal_loads(), 7);
    EXPECT_EQ(scenario_to_json(a), scenario_to_json(b));
    const Scenario c = build_static_scenario(bundled_nominal_loads(), 8);
    EXPECT_NE(a.problem.response.beta, c.problem.response.beta);
}

TEST(StaticScenario, DrawsRespectRangesOverManySeeds) {
    const Vector loads = bundled_nominal_loads();
    std::size_t resampled = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const Scenario sc = build_static_scenario(loads, seed);
        const Problem& p = sc.problem;
        for (std::size_t n = 0; n < p.size(); ++n) {
            ASSERT_GE(p.response.beta[n], 0.05);
            ASSERT_LE(p.response.beta[n], 2.0);
            ASSERT_GE(p.feeder.delta()[n], 0.0);
            ASSERT_LE(p.feeder.delta()[n], 2.0 * loads[n]);
            ASSERT_GE(p.feeder.delta()[n], p.response.beta[n] * p.tariff.x_max);
        }
        ASSERT_TRUE(mean_nonnegative_on_box(p.response, p.feeder, p.tariff));
        const auto [lo, hi] = detail::reachable_p_ref(p.feeder, p.response.beta, p.tariff);
        ASSERT_GE(p.target.p_ref, lo);
        ASSERT_LE(p.target.p_ref, hi);
        ASSERT_GT(p.p0_tilde(), 0.0);
        resampled += sc.resampled_nodes.size();
    }
    EXPECT_GT(resampled, 0u);
}

TEST(StaticScenario, MeanResponseNonnegativeAcrossBox) {
    const Problem p = build_static_scenario(bundled_nominal_loads(), 3).problem;
    for (double level = 0.0; level <= 1.0; level += 0.05) {
        for (double mu : mean_response(p.response, p.feeder, Vector(p.size(), level))) EXPECT_GE(mu, -1e-12);
    }
}

TEST(StaticScenario, ExplicitPRefOutsideRangeRejected) {
    ScenarioOverrides o;
    o.p_ref = -1.0;
    EXPECT_THROW(build_static_scenario(bundled_nominal_loads(), 1, o), ValidationError);
    EXPECT_THROW(build_static_scenario({}, 1), ValidationError);
    EXPECT_THROW(build_static_scenario({1.0, -2.0}, 1), ValidationError);
}

TEST(StaticScenario, ImpossibleBoxRejected) {
    ScenarioOverrides o;
    o.tariff.x_max = 1000.0;  // delta <= 2 d_hat can never cover beta * 1000
    o.max_draws_per_node = 200;
    EXPECT_THROW(build_static_scenario({0.01}, 1, o), ValidationError);
}

TEST(StaticScenario, NarrowDualCapRejected) {
    ScenarioOverrides o;
    o.lambda_cap = 1e-3;
    EXPECT_THROW(build_static_scenario(bundled_nominal_loads(), 1, o), DualCapError);
}

TEST(SynthProfiles, ShapeDeterminismAndPeak) {
    const Vector loads = bundled_nominal_loads();
    const LoadProfileSet a = synth_load_profiles(loads, 600, 300, 4);
    const LoadProfileSet b = synth_load_profiles(loads, 600, 300, 4);
    const LoadProfileSet c = synth_load_profiles(loads, 600, 300, 5);
    EXPECT_EQ(a.series, b.series);
    EXPECT_NE(a.series, c.series);
    ASSERT_EQ(a.bus_count(), 25u);
    EXPECT_EQ(a.length(), 300u);
    for (std::size_t bus = 0; bus < 25; ++bus) {
        const auto& s = a.series[bus];
        EXPECT_DOUBLE_EQ(*std::max_element(s.begin(), s.end()), loads[bus]);
        for (double v : s) EXPECT_GE(v, 0.0);
    }
}

TEST(SynthProfiles, SolarLowersMiddayLoad) {
    const Vector loads(5, 1.0);
    const LoadProfileSet none = synth_load_profiles(loads, 0, 1440, 9, 0.0);
    const LoadProfileSet all = synth_load_profiles(loads, 0, 1440, 9, 1.0);
    // Noon relative to 21:00, which solar does not touch.
    for (std::size_t bus = 0; bus < 5; ++bus) {
        EXPECT_LT(all.series[bus][750] / all.series[bus][1260], none.series[bus][750] / none.series[bus][1260]);
    }
}

TEST(SynthProfiles, InvalidArgumentsRejected) {
    EXPECT_THROW(synth_load_profiles({1.0}, 0, 0, 1), ValidationError);
    EXPECT_THROW(synth_load_profiles({1.0}, 0, 10, 1, 1.5), ValidationError);
    EXPECT_THROW(synth_load_profiles({1.0}, 0, 10, 1, 0.0, 0), ValidationError);
}

TEST(TimeVaryingScenario, SharesStaticParameters) {
    const Scenario st = build_static_scenario(bundled_nominal_loads(), 2);
    const Scenario tv = build_timevarying_scenario(bundled_nominal_loads(), 2);
    ASSERT_TRUE(tv.profiles.has_value());
    EXPECT_EQ(tv.profiles->length(), 300u);
    EXPECT_EQ(tv.profiles->start_minute, 600u);
    Scenario stripped = tv;
    stripped.profiles.reset();
    stripped.name = st.name;
    EXPECT_EQ(scenario_to_json(stripped), scenario_to_json(st));
}

TEST(TimeVaryingScenario, ScheduleTracksProfiles) {
    const Scenario tv = build_timevarying_scenario(bundled_nominal_loads(), 2);
    const ProblemSchedule schedule = tv.schedule();
    EXPECT_TRUE(schedule.time_varying());
    EXPECT_EQ(schedule.horizon(), 300u);
    for (std::size_t t : {0u, 123u, 299u}) {
        const Problem& p = schedule.at(t);
        EXPECT_EQ(p.feeder.d_hat(), tv.profiles->d_hat_at(t));
        EXPECT_NEAR(p.p0_tilde(), dot(p.feeder.s(), p.feeder.d_pre()) - tv.problem.target.p_ref, 1e-12);
    }
    EXPECT_EQ(schedule.at(5000).feeder.d_hat(), tv.profiles->d_hat_at(299));
}

TEST(Persistence, JsonRoundTrip) {
    for (const Scenario& sc : {build_static_scenario(bundled_nominal_loads(), 11),
                               build_timevarying_scenario(bundled_nominal_loads(), 11), one_node_scenario(3)}) {
        const nlohmann::json doc = scenario_to_json(sc);
        const Scenario back = scenario_from_json(nlohmann::json::parse(doc.dump()));
        EXPECT_EQ(scenario_to_json(back), doc) << sc.name;
    }
}

TEST(Persistence, FileRoundTrip) {
    const auto dir = std::filesystem::temp_directory_path() / "drsim_scenario_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "sc.json").string();
    const Scenario sc = build_timevarying_scenario(bundled_nominal_loads(), 4);
    save_scenario(sc, path);
    EXPECT_EQ(scenario_to_json(load_scenario(path)), scenario_to_json(sc));
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_scenario(path), ConfigError);
}

TEST(Persistence, UniformBetaRangeIsDrawnFromSeed) {
    nlohmann::json doc = scenario_to_json(one_node_scenario());
    doc["response"]["beta"] = "uniform[0.5,1.5]";
    doc["master_seed"] = 4;
    const Scenario a = scenario_from_json(doc);
    const Scenario b = scenario_from_json(doc);
    EXPECT_EQ(a.problem.response.beta, b.problem.response.beta);
    EXPECT_GE(a.problem.response.beta[0], 0.5);
    EXPECT_LT(a.problem.response.beta[0], 1.5);
    doc["response"]["beta"] = "uniform[2,1]";
    EXPECT_THROW(scenario_from_json(doc), SchemaError);
}

TEST(Persistence, MissingSectionsAreSchemaErrors) {
    nlohmann::json doc = scenario_to_json(one_node_scenario());
    doc.erase("target");
    EXPECT_THROW(scenario_from_json(doc), SchemaError);
    doc = scenario_to_json(one_node_scenario());
    doc["response"].erase("beta");
    EXPECT_THROW(scenario_from_json(doc), SchemaError);
    doc = scenario_to_json(build_timevarying_scenario(bundled_nominal_loads(), 1));
    doc["profiles"]["series"][0].erase(0);
    EXPECT_THROW(scenario_from_json(doc), ValidationError);
}

TEST(ProfilesCsv, RoundTrip) {
    const Scenario tv = build_timevarying_scenario(bundled_nominal_loads(), 6);
    std::stringstream buf;
    write_profiles_csv(buf, *tv.profiles);
    const LoadProfileSet back = read_profiles_csv(buf, tv.profiles->ids, 600);
    EXPECT_EQ(back.series, tv.profiles->series);
    EXPECT_EQ(back.ids, tv.profiles->ids);
}

TEST(ProfilesCsv, NormalizesToNominalPeak) {
    std::stringstream in("bus_id,t,kw\na,0,1\na,1,4\nb,0,2\nb,1,1\n");
    const LoadProfileSet set = read_profiles_csv(in, {"a", "b"}, 0, Vector{2.0, 3.0});
    EXPECT_EQ(set.series[0], (Vector{0.5, 2.0}));
    EXPECT_EQ(set.series[1], (Vector{3.0, 1.5}));
}

TEST(ProfilesCsv, MalformedInputRejected) {
    auto parse = [](const std::string& text) {
        std::stringstream in(text);
        return read_profiles_csv(in, {"a"});
    };
    EXPECT_THROW(parse(""), SchemaError);
    EXPECT_THROW(parse("bus,t,kw\n"), SchemaError);
    EXPECT_THROW(parse("bus_id,t,kw\nz,0,1\n"), SchemaError);
    EXPECT_THROW(parse("bus_id,t,kw\na,0,x\n"), SchemaError);
    EXPECT_THROW(parse("bus_id,t,kw\na,0,1\na,0,2\n"), SchemaError);
    EXPECT_THROW(parse("bus_id,t,kw\na,0,1\na,2,2\n"), ValidationError);
    EXPECT_THROW(parse("bus_id,t,kw\na,0\n"), SchemaError);
}
