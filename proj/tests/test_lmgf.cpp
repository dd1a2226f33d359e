#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stripldp;

TEST(Lambda, ClosedFormHomogeneous)
{
    for (double p : {0.6, 0.75, 0.9})
        for (double lam : {-2.0, -0.3, 0.0, 0.9 * oracle::lambda_crit_closed(p)}) {
            auto e = lambda_eta(homogeneous_spec(p), lam, 64, 1);
            EXPECT_NEAR(e.value, std::log(oracle::phi_closed(p, lam)), 1e-10) << p << " " << lam;
            EXPECT_EQ(e.statistical_error, 0.0);
            EXPECT_EQ(e.deterministic_error, 0.0);
        }
}

TEST(Lambda, DerivativeAtZeroIsMeanHittingTime)
{
    EXPECT_NEAR(lambda_eta_prime(homogeneous_spec(0.75), 0.0, 64, 1).value, 2.0, 1e-9);
}

TEST(Lambda, LeftTransientAtZero)
{
    EXPECT_NEAR(lambda_eta(homogeneous_spec(0.25), 0.0, 64, 1).value, std::log(1.0 / 3.0), 1e-10);
}

TEST(Lambda, SupercriticalIsInfinite)
{
    LmgfOptions o;
    o.n_levels = 64;
    o.lambda_crit = oracle::lambda_crit_closed(0.75);
    auto e = lambda_eta(homogeneous_spec(0.75), 0.2, o);
    EXPECT_TRUE(e.supercritical);
    EXPECT_TRUE(std::isinf(e.value));
}

TEST(Lambda, SandwichForNegativeLambda)
{
    auto spec = oracle::random_iid_d2();
    for (double lam : {-3.0, -1.0, -0.1}) {
        auto e = lambda_eta(spec, lam, 2000, 7);
        EXPECT_LE(e.value, lam + 1e-12);
        EXPECT_GE(e.value, lam + std::log(spec.kappa) - 1e-12);
    }
}

TEST(Lambda, DerivativeMatchesDifferenceD2)
{
    auto spec = oracle::random_iid_d2();
    LmgfOptions o;
    o.n_levels = 5000;
    o.seed = 3;
    const double h = 1e-5;
    for (double lam : {-1.0, -0.2, 0.0}) {
        const double fd = (lambda_eta(spec, lam + h, o).value - lambda_eta(spec, lam - h, o).value) / (2 * h);
        EXPECT_NEAR(lambda_eta_prime(spec, lam, o).value, fd, 1e-6) << lam;
    }
}

TEST(Lambda, SeedDeterminism)
{
    auto spec = oracle::two_point_iid();
    EXPECT_EQ(lambda_eta(spec, -0.4, 3000, 11).value, lambda_eta(spec, -0.4, 3000, 11).value);
}

TEST(Truncated, RejectsSmallMForStrips)
{
    auto spec = oracle::random_iid_d2();
    EXPECT_THROW(TruncatedModel(spec, 1, 100, 1), SpecError);
    EXPECT_NO_THROW(TruncatedModel(homogeneous_spec(0.75), 1, 100, 1));
}

TEST(Truncated, BelowFull)
{
    auto spec = homogeneous_spec(0.75);
    TruncatedModel tm(spec, 16, 64, 1);
    for (double lam : {-0.5, 0.0, 0.1})
        EXPECT_LE(tm.value(lam).value, lambda_eta(spec, lam, 64, 1).value + 1e-12);
    // above lambda_crit the truncated value stays finite
    EXPECT_TRUE(std::isfinite(tm.value(0.3).value));
}

TEST(Analysis, RightTransientP075)
{
    auto a = analyze_environment(homogeneous_spec(0.75), 256, 1);
    EXPECT_EQ(a.regime, Regime::transient_right);
    EXPECT_NEAR(a.t0, 2.0, 1e-4);
    EXPECT_NEAR(a.v0, 0.5, 1e-4);
    EXPECT_NEAR(a.lambda_crit.lambda_crit, oracle::lambda_crit_closed(0.75), 1e-6);
}

TEST(Analysis, LeftTransientP025)
{
    auto a = analyze_environment(homogeneous_spec(0.25), 256, 1);
    EXPECT_EQ(a.regime, Regime::transient_left);
    EXPECT_NEAR(a.v0, -0.5, 1e-4);
}

TEST(Analysis, SymmetricIsRecurrent)
{
    auto a = analyze_environment(EnvironmentSpec::periodic({scalar_slice(0.4, 0.2, 0.4)}, 0.4), 256, 1);
    EXPECT_EQ(a.regime, Regime::recurrent);
    EXPECT_EQ(a.v0, 0.0);
    EXPECT_NEAR(a.lambda_crit.lambda_crit, 0.0, 1e-6);
}

TEST(Truncated, SweepApproachesFull)
{
    auto spec = homogeneous_spec(0.75);
    const double full = lambda_eta(spec, 0.05, 256, 0).value;
    double prev = -std::numeric_limits<double>::infinity();
    for (int M : {8, 16, 32, 64, 128}) {
        const double v = lambda_eta_truncated(spec, 0.05, M, 256, 0).value;
        EXPECT_GT(v, prev) << M;
        EXPECT_LE(v, full + 1e-12) << M;
        prev = v;
    }
    EXPECT_LT(full - prev, 1e-6);
}
