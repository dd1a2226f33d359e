#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stripldp;

TEST(Walk, SeedDeterminism)
{
    auto w = sample_window(oracle::two_point_iid(), -2000, 200, 4);
    auto a = simulate_walk(w, StartDistribution::uniform(1), 100, 100000, 77);
    auto b = simulate_walk(w, StartDistribution::uniform(1), 100, 100000, 77);
    EXPECT_EQ(a.hitting_times, b.hitting_times);
    EXPECT_TRUE(a.completed);
}

TEST(Walk, RecordInvariants)
{
    auto w = sample_window(oracle::two_point_iid(), -2000, 200, 4);
    auto r = simulate_walk(w, StartDistribution::uniform(1), 150, 100000, 5);
    ASSERT_EQ(r.hitting_times.size(), 150u);
    for (auto tau : r.increments()) EXPECT_GE(tau, 1);
    EXPECT_EQ(r.final_x, 150);
    EXPECT_EQ(r.steps, r.hitting_times.back());
}

TEST(Walk, NearDeterministicMarch)
{
    auto w = sample_window(homogeneous_spec(0.999, 0.001), -100, 60, 0);
    auto r = simulate_walk(w, StartDistribution::uniform(1), 50, 10000, 1);
    EXPECT_EQ(r.hitting_times.back(), 50);
}

TEST(Walk, LeavingWindowIsReported)
{
    auto w = sample_window(homogeneous_spec(0.25), -3, 10, 0);
    EXPECT_THROW(simulate_walk(w, StartDistribution::uniform(1), 5, 100000, 2), BudgetError);
}

TEST(Walk, SpeedNearV0)
{
    auto s = empirical_speed(homogeneous_spec(0.75), 10000, 100, 3);
    EXPECT_NEAR(s.mean, 0.5, 3 * s.std_error + 1e-3);
}

TEST(Runner, ThreadCountDoesNotChangeResult)
{
    auto spec = homogeneous_spec(0.75);
    SimOptions one, four;
    four.threads = 4;
    auto a = empirical_hitting_tail(spec, 20, 2.5, 20000, 9, one);
    auto b = empirical_hitting_tail(spec, 20, 2.5, 20000, 9, four);
    EXPECT_EQ(a.hits, b.hits);
}

TEST(Runner, SingleTrialReproducible)
{
    auto w = sample_window(homogeneous_spec(0.75), -100, 30, 0);
    StepTables tab(w);
    Rng r1 = trial_rng(5, 123), r2 = trial_rng(5, 123);
    auto a = simulate_walk(w, tab, StartDistribution::uniform(1), 20, 1000, r1);
    auto b = simulate_walk(w, tab, StartDistribution::uniform(1), 20, 1000, r2);
    EXPECT_EQ(a.hitting_times, b.hitting_times);
}

TEST(Tail, WilsonContainsPoint)
{
    auto ci = wilson_interval(30, 1000);
    EXPECT_LT(ci[0], 0.03);
    EXPECT_GT(ci[1], 0.03);
    auto e = empirical_hitting_tail(homogeneous_spec(0.75), 20, 3.0, 20000, 2);
    EXPECT_LE(e.ci[0], e.point);
    EXPECT_GE(e.ci[1], e.point);
}

TEST(Tail, TypicalEventHasSmallRate)
{
    auto e = empirical_hitting_tail(homogeneous_spec(0.75), 400, 2.0, 2000, 1);
    EXPECT_LT(e.point, 0.01);
}

TEST(Tail, ZeroHitsIsOneSided)
{
    auto e = empirical_hitting_tail(homogeneous_spec(0.9), 50, 5.0, 100, 1);
    EXPECT_EQ(e.hits, 0);
    EXPECT_TRUE(e.one_sided);
    EXPECT_TRUE(std::isinf(e.ci[1]));
}

TEST(ImportanceSampling, UnbiasedOnSmallCase)
{
    auto w = sample_window(homogeneous_spec(0.75), -6, 4, 0);
    const int n = 3, M = 4;
    auto law = oracle::enumerate_hitting_law(w, n, M);
    TiltedSampler ts(w, StartDistribution::uniform(1), n, M, 0.2);
    const long long N = 100000;
    std::vector<double> s1(law.size()), s2(law.size());
    for (long long i = 0; i < N; ++i) {
        Rng r = trial_rng(3, i);
        auto x = ts.sample(r);
        const double v = std::exp(x.log_weight);
        s1[x.T] += v;
        s2[x.T] += v * v;
    }
    for (std::size_t s = 0; s < law.size(); ++s) {
        const double m = s1[s] / N, se = std::sqrt(std::max(0.0, s2[s] / N - m * m) / N);
        if (law[s] == 0.0) EXPECT_EQ(m, 0.0) << s;
        else EXPECT_LE(std::abs(m - law[s]), 4 * se) << s;
    }
}

TEST(ImportanceSampling, ZeroTiltIsDirect)
{
    auto w = sample_window(homogeneous_spec(0.75), -10, 12, 0);
    TiltedSampler ts(w, StartDistribution::uniform(1), 10, 8, 0.0);
    Rng r(1);
    for (int i = 0; i < 100; ++i) EXPECT_NEAR(ts.sample(r).log_weight, ts.log_normalizer(), 0.0);
    EXPECT_LE(ts.log_normalizer(), 0.0);
}

TEST(ImportanceSampling, NeedsRoomForT)
{
    EXPECT_THROW(importance_sample_hitting(homogeneous_spec(0.75), 50, 3.0, 5, 1000, 1), SpecError);
    EXPECT_THROW(importance_sample_hitting(homogeneous_spec(0.75), 50, 0.9, 16, 1000, 1), SpecError);
}

TEST(ImportanceSampling, AgreesWithDirect)
{
    auto spec = homogeneous_spec(0.75);
    // M far above n t keeps the truncated event equal to the plain one
    auto is = importance_sample_hitting(spec, 40, 2.5, 128, 40000, 3);
    auto d = empirical_hitting_tail(spec, 40, 2.5, 200000, 4);
    EXPECT_LE(is.ci[0], d.ci[1]);
    EXPECT_GE(is.ci[1], d.ci[0]);
}

TEST(Slowdown, FrozenExactValues)
{
    SlowdownOptions o;
    o.known_regime = Regime::transient_right;
    auto spec = homogeneous_spec(0.75);
    EXPECT_NEAR(slowdown_probability(spec, 30, 0, 20, 1, o).point, 0.18785, 5e-5);
    EXPECT_NEAR(slowdown_probability(spec, 60, 0, 20, 1, o).point, 0.17097, 5e-5);
}

TEST(Slowdown, RejectsRecurrent)
{
    auto spec = EnvironmentSpec::periodic({scalar_slice(0.4, 0.2, 0.4)}, 0.4);
    SlowdownOptions o;
    o.analysis.lmgf.n_levels = 64;
    EXPECT_THROW(slowdown_probability(spec, 20, 0, 20, 1, o), SpecError);
}

TEST(Slowdown, HeightRelabelingInvariant)
{
    Matrix q(2, 2), r(2, 2), p(2, 2);
    q << 0.15, 0.10, 0.05, 0.20;
    r << 0.05, 0.10, 0.10, 0.05;
    p << 0.35, 0.25, 0.30, 0.30;
    Matrix P(2, 2);
    P << 0, 1, 1, 0;
    auto a = EnvironmentSpec::periodic({make_slice(q, r, p)}, 0.05);
    auto b = EnvironmentSpec::periodic({make_slice(P * q * P, P * r * P, P * p * P)}, 0.05);
    SlowdownOptions o;
    o.known_regime = Regime::transient_right;
    EXPECT_NEAR(slowdown_probability(a, 20, 0, 10, 1, o).point, slowdown_probability(b, 20, 0, 10, 1, o).point,
                1e-12);
}

TEST(Slowdown, DirectAgreesWithExact)
{
    SlowdownOptions o;
    o.known_regime = Regime::transient_right;
    auto spec = homogeneous_spec(0.75);
    auto ex = slowdown_probability(spec, 10, 0, 20, 1, o);
    o.method = SlowdownMethod::direct;
    auto di = slowdown_probability(spec, 10, 100000, 20, 1, o);
    EXPECT_LE(di.ci[0], ex.point);
    EXPECT_GE(di.ci[1], ex.point);
}
