#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "apnav/eval.hpp"

using namespace apnav;
using std::numbers::pi;

namespace {

EpisodeRecord outcome(bool success, double p_init = 0.5, double p_final = 0.5)
{
    EpisodeRecord r;
    r.success = success;
    r.p_init = p_init;
    r.p_final = p_final;
    return r;
}

World small_world()
{
    WorldConfig cfg;
    cfg.grid = make_grid(24, 10, 1.0, 40.0);
    cfg.obs_dim = 8;
    return World(cfg);
}

/// Field that never reaches 0.9 anywhere.
ConfidenceField flat_low_field()
{
    ConfidenceField f;
    f.lobes = {{0.0, 1.0, 0.0}};
    f.r_half = 10.0;
    f.r_slope = 1.0;
    f.bias = 0.3;
    return f;
}

} // namespace

TEST(Rates, SuccessRateArithmetic)
{
    EXPECT_DOUBLE_EQ(success_rate({outcome(true), outcome(false), outcome(true), outcome(true)}), 75.0);
    EXPECT_DOUBLE_EQ(success_rate({outcome(false)}), 0.0);
}

TEST(Rates, ImprovementRateOnlyCountsSuccesses)
{
    const std::vector<EpisodeRecord> recs{outcome(true, 0.4, 0.6), outcome(true, 0.5, 0.85),
                                          outcome(false, 0.5, 0.1)};
    EXPECT_NEAR(improvement_rate(recs), 60.0, 1e-12);
    EXPECT_EQ(improvement_rate({outcome(false), outcome(false)}), 0.0);
}

TEST(Rates, EmptyInputIsAnError)
{
    EXPECT_THROW(success_rate({}), std::invalid_argument);
    EXPECT_THROW(improvement_rate({}), std::invalid_argument);
}

TEST(Sampler, OnlyBelowThresholdAndDeterministic)
{
    const auto world = small_world();
    const auto car = preset_car();
    const auto a = sample_initial_poses(world, car, 0.9, 500, 9);
    const auto b = sample_initial_poses(world, car, 0.9, 500, 9);
    const auto c = sample_initial_poses(world, car, 0.9, 500, 10);
    ASSERT_EQ(a.size(), 500u);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    for (const auto& p : a) {
        EXPECT_LT(confidence(car, p), 0.9);
        EXPECT_EQ(pose_at(world.grid(), world.grid().snap(p)), p);
    }
}

TEST(Sampler, UniformOverEligiblePoses)
{
    const World world([] {
        WorldConfig cfg;
        cfg.grid = make_grid(8, 3, 1.0, 3.0);
        cfg.obs_dim = 4;
        return cfg;
    }());
    const std::size_t n = 10000;
    const auto poses = sample_initial_poses(world, flat_low_field(), 0.9, n, 123);
    std::map<std::size_t, std::size_t> counts;
    for (const auto& p : poses) {
        ++counts[world.grid().flat(world.grid().snap(p))];
    }
    ASSERT_EQ(counts.size(), 24u);
    const double expected = static_cast<double>(n) / 24.0;
    double chi2 = 0.0;
    for (const auto& [k, c] : counts)
        chi2 += (c - expected) * (c - expected) / expected;
    // 23 degrees of freedom; 0.999 quantile is about 49.7.
    EXPECT_LT(chi2, 49.7);
}

TEST(Sampler, NoEligiblePose)
{
    const auto world = small_world();
    ConfidenceField always;
    always.lobes = {{0.0, 1.0, 0.0}};
    always.bias = 0.95;
    EXPECT_THROW(sample_initial_poses(world, always, 0.9, 5, 1), NoValidPoseError);
}

TEST(Evaluate, PairedPosesAndStaticBaseline)
{
    const auto world = small_world();
    const auto car = preset_car();
    EvalConfig cfg;
    cfg.n_trials = 40;
    cfg.seed = 4;
    const auto report = evaluate(world, car, {policy_static(), policy_random(world.grid())}, cfg);
    ASSERT_EQ(report.policies.size(), 2u);
    const auto& st = report.at("static");
    EXPECT_EQ(st.success_rate, 0.0);
    EXPECT_EQ(st.improvement_rate, 0.0);
    EXPECT_EQ(st.n_trials, 40u);
    for (std::size_t t = 0; t < cfg.n_trials; ++t) {
        EXPECT_EQ(report.policies[0].episodes[t].init_pose, report.initial_poses[t]);
        EXPECT_EQ(report.policies[1].episodes[t].init_pose, report.initial_poses[t]);
    }
    const auto& rnd = report.at("random");
    if (rnd.success_rate > 0.0)
        EXPECT_GT(rnd.improvement_rate, 0.0);
    EXPECT_THROW(report.at("nope"), std::out_of_range);
}

TEST(Evaluate, ResultsIndependentOfJobs)
{
    const auto world = small_world();
    const auto car = preset_car();
    EvalConfig cfg;
    cfg.n_trials = 30;
    cfg.seed = 8;
    cfg.episode.sigma_meas = 0.02;
    const std::vector<PolicyPtr> pols{policy_static(), policy_random(world.grid())};
    const auto one = report_to_json(evaluate(world, car, pols, cfg)).dump();
    cfg.jobs = 4;
    const auto four = report_to_json(evaluate(world, car, pols, cfg)).dump();
    EXPECT_EQ(one, four);
}

TEST(Evaluate, AddingPolicyKeepsOtherEpisodes)
{
    const auto world = small_world();
    const auto car = preset_car();
    EvalConfig cfg;
    cfg.n_trials = 20;
    cfg.seed = 3;
    const auto rnd = policy_random(world.grid());
    const auto a = evaluate(world, car, {rnd}, cfg);
    const auto b = evaluate(world, car, {policy_static(), rnd}, cfg);
    EXPECT_EQ(report_to_json(a)["policies"][0].dump(), report_to_json(b)["policies"][1].dump());
}

TEST(Evaluate, ReportFormats)
{
    const auto world = small_world();
    EvalConfig cfg;
    cfg.n_trials = 5;
    const auto report = evaluate(world, preset_car(), {policy_static()}, cfg);
    EXPECT_EQ(report_to_csv(report), "policy,success_rate,improvement_rate,n_trials\nstatic,0,0,5\n");
    const auto j = report_to_json(report, {"abc", 7});
    EXPECT_EQ(j["kind"], "report");
    EXPECT_EQ(j["config_hash"], "abc");
    EXPECT_EQ(j["policies"][0]["episodes"].size(), 5u);
}

TEST(Evaluate, RejectsZeroTrials)
{
    EvalConfig cfg;
    cfg.n_trials = 0;
    EXPECT_THROW(evaluate(small_world(), preset_car(), {policy_static()}, cfg), std::invalid_argument);
}
