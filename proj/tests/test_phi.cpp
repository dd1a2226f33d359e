#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stripldp;

TEST(Phi, ClosedFormHomogeneous)
{
    for (double p : {0.6, 0.75, 0.9}) {
        auto w = sample_window(homogeneous_spec(p), -400, 10, 0);
        for (double lam : {-1.0, 0.0, 0.5 * oracle::lambda_crit_closed(p)}) {
            auto phis = solve_phi_window(w, lam);
            EXPECT_NEAR(phis.back().entries(0, 0), oracle::phi_closed(p, lam), 1e-12) << p << " " << lam;
        }
    }
}

TEST(Phi, DerivativeAtZero)
{
    // E[T_1] = 1 / (2p - 1) = 2 for p = 0.75
    auto w = sample_window(homogeneous_spec(0.75), -400, 5, 0);
    auto d = phi_derivative(w, 0.0);
    EXPECT_NEAR(d.back().entries(0, 0), 2.0, 1e-10);
}

TEST(Phi, FixedPointResidualD2)
{
    auto spec = oracle::random_iid_d2();
    auto w = sample_window(spec, -300, 50, 4);
    auto phis = solve_phi_window(w, -0.3);
    std::vector<PhiMatrix> tail(phis.begin() + 250, phis.end());
    EXPECT_LT(phi_residual(sample_window(spec, -50, 50, 4), tail), 1e-12);
}

TEST(Phi, SupercriticalThrows)
{
    auto w = sample_window(homogeneous_spec(0.75), -400, 5, 0);
    EXPECT_THROW(solve_phi_window(w, 0.2), SupercriticalError);
}

TEST(Truncated, SmallHittingLaw)
{
    auto w = sample_window(homogeneous_spec(0.75), -5, 2, 0);
    auto h = hitting_distribution(w, 0, 3);
    EXPECT_DOUBLE_EQ(h.H[0](0, 0), 0.75);
    EXPECT_DOUBLE_EQ(h.H[1](0, 0), 0.0);
    EXPECT_DOUBLE_EQ(h.H[2](0, 0), 0.25 * 0.75 * 0.75);
}

TEST(Truncated, MatchesEnumeration)
{
    for (auto spec : {homogeneous_spec(0.75), oracle::random_iid_d2()}) {
        auto w = sample_window(spec, -10, 2, 1);
        for (int M : {1, 4, 7}) {
            for (double lam : {-1.0, 0.0, 0.5}) {
                Matrix ref = oracle::enumerate_truncated_phi(w, lam, M);
                Matrix got = phi_truncated(w, lam, M, 0).entries;
                EXPECT_LT((ref - got).cwiseAbs().maxCoeff(), 1e-12) << "d=" << spec.d << " M=" << M;
            }
        }
    }
}

TEST(Truncated, IncreasesToFull)
{
    auto w = sample_window(homogeneous_spec(0.75), -400, 2, 0);
    const double full = solve_phi_window(w, 0.05).back().entries(0, 0);
    double prev = 0.0;
    for (int M : {4, 16, 64, 256}) {
        const double v = phi_truncated(w, 0.05, M, 0).entries(0, 0);
        EXPECT_GE(v, prev);
        EXPECT_LE(v, full + 1e-14);
        prev = v;
    }
    EXPECT_NEAR(prev, full, 1e-10);
}

TEST(Crit, HomogeneousClosedForm)
{
    for (double p : {0.6, 0.75, 0.9}) {
        auto ce = estimate_lambda_crit(homogeneous_spec(p), 0, 1e-7, 1);
        EXPECT_NEAR(ce.lambda_crit, oracle::lambda_crit_closed(p), 1e-6) << p;
        EXPECT_LE(ce.upper - ce.lower, 1e-7);
    }
}

TEST(Crit, LyndonWords)
{
    std::string s;
    for (const auto& w : lyndon_words(2, 4)) {
        for (int c : w) s += char('0' + c);
        s += ' ';
    }
    EXPECT_EQ(s, "0 0001 001 0011 01 011 0111 1 ");
}

TEST(Crit, IidBelowEachPeriodicWord)
{
    auto spec = oracle::two_point_iid();
    auto ce = estimate_lambda_crit(spec, 0, 1e-7, 1);
    for (const auto& s : spec.slices) {
        auto single = estimate_lambda_crit(EnvironmentSpec::periodic({s}, spec.kappa), 0, 1e-7, 1);
        EXPECT_LE(ce.lambda_crit, single.lambda_crit + 1e-7);
    }
    EXPECT_LE(ce.certified_lower, ce.lambda_crit + 1e-12);
}
