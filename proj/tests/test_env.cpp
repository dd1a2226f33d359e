#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stripldp;

TEST(Slice, RejectsNonStochasticRows)
{
    EXPECT_THROW(make_slice(Matrix::Constant(1, 1, 0.3), Matrix::Zero(1, 1), Matrix::Constant(1, 1, 0.6)), SpecError);
    EXPECT_THROW(make_slice(Matrix::Constant(1, 1, -0.1), Matrix::Zero(1, 1), Matrix::Constant(1, 1, 1.1)), SpecError);
    EXPECT_NO_THROW(scalar_slice(0.25, 0.0, 0.75));
}

TEST(Ellipticity, HomogeneousD1)
{
    auto rep = validate_ellipticity(scalar_slice(0.25, 0.0, 0.75), 0.25);
    EXPECT_TRUE(rep.passed());
    EXPECT_DOUBLE_EQ(rep.constant(), 0.25);
    EXPECT_FALSE(validate_ellipticity(scalar_slice(0.25, 0.0, 0.75), 0.3).passed());
}

TEST(Ellipticity, ReportsFailingCondition)
{
    Matrix q(2, 2), r(2, 2), p(2, 2);
    q << 0.3, 0.0, 0.0, 0.3;
    r << 0.0, 0.0, 0.0, 0.0;
    p << 0.7, 0.0, 0.0, 0.7;
    auto rep = validate_ellipticity(make_slice(q, r, p), 0.1);
    EXPECT_FALSE(rep.passed());
    EXPECT_FALSE(rep.left_exit);
    EXPECT_NE(rep.diagnostic.find("(I-r)^-1 q"), std::string::npos);
}

TEST(Ellipticity, NKappa)
{
    EXPECT_EQ(n_kappa(0.25), static_cast<int>(std::ceil(std::log(0.125) / std::log(0.5))));
    EXPECT_EQ(n_kappa(0.25), 3);
    EXPECT_GE(n_kappa(0.01), 1);
}

TEST(Spec, ValidateWeightsAndKappa)
{
    EXPECT_THROW(EnvironmentSpec::iid({scalar_slice(0.3, 0, 0.7)}, {0.9}, 0.2), SpecError);
    EXPECT_THROW(EnvironmentSpec::periodic({scalar_slice(0.3, 0, 0.7)}, 0.6), SpecError);
    EXPECT_NO_THROW(oracle::two_point_iid());
}

TEST(Window, SameSeedAgreesOnOverlap)
{
    auto spec = oracle::two_point_iid();
    auto a = sample_window(spec, -50, 50, 9);
    auto b = sample_window(spec, 0, 200, 9);
    for (int k = 0; k < 50; ++k) EXPECT_EQ(a.support_index(k), b.support_index(k));
    auto c = sample_window(spec, -50, 50, 10);
    int diff = 0;
    for (int k = -50; k < 50; ++k) diff += a.support_index(k) != c.support_index(k);
    EXPECT_GT(diff, 0);
}

TEST(Window, PeriodicPlacement)
{
    auto spec = EnvironmentSpec::periodic({scalar_slice(0.3, 0, 0.7), scalar_slice(0.4, 0.1, 0.5)}, 0.2);
    auto w = sample_window(spec, -3, 3, 0);
    EXPECT_EQ(w.at(-3), spec.slices[1]);
    EXPECT_EQ(w.at(-2), spec.slices[0]);
    EXPECT_EQ(w.at(1), spec.slices[1]);
}

TEST(Inversion, InvolutionOnWindows)
{
    auto spec = oracle::two_point_iid();
    auto w = sample_window(spec, -7, 12, 3);
    auto inv = invert_window(w);
    EXPECT_EQ(inv.lo, -11);
    EXPECT_EQ(inv.hi, 8);
    EXPECT_EQ(inv.at(-5).q, w.at(5).p);
    EXPECT_TRUE(invert_window(inv) == w);
}

TEST(Inversion, PeriodicSpecReflection)
{
    auto spec = EnvironmentSpec::periodic(
        {scalar_slice(0.3, 0, 0.7), scalar_slice(0.4, 0.1, 0.5), scalar_slice(0.2, 0.2, 0.6)}, 0.2);
    auto inv = invert_spec(spec);
    auto wi = sample_window(inv, -6, 6, 0);
    auto w = sample_window(spec, -6, 6, 0);
    for (int m = -5; m < 6; ++m) EXPECT_EQ(wi.at(m), swap_sides(w.at(-m)));
}

TEST(BoundedJump, NearestNeighbourGivesD1)
{
    EmbeddingReport rep;
    auto spec = embed_bounded_jump({{0.25, 0.0, 0.75}}, 1, 1, 0.25, &rep);
    EXPECT_EQ(spec.d, 1);
    EXPECT_DOUBLE_EQ(spec.slices[0].p(0, 0), 0.75);
    EXPECT_TRUE(rep.warning.empty());
}

TEST(BoundedJump, UniformTwoTwoIsElliptic)
{
    auto spec = embed_bounded_jump({{0.2, 0.2, 0.2, 0.2, 0.2}}, 2, 2, 0.2);
    EXPECT_EQ(spec.d, 2);
    // the strip constant is set by (I - r)^{-1} q, below the kernel bound
    EXPECT_NEAR(spec.kappa, 1.0 / 15.0, 1e-12);
    EXPECT_TRUE(validate_ellipticity(spec.slices[0], spec.kappa).passed());
}

TEST(BoundedJump, AsymmetricRangeWarnsAndHasZeroColumn)
{
    EmbeddingReport rep;
    auto spec = embed_bounded_jump({{0.15, 0.15, 0.2, 0.5}}, 2, 1, 0.15, &rep);
    EXPECT_EQ(spec.d, 2);
    EXPECT_TRUE(rep.appendix_pattern);
    EXPECT_FALSE(rep.warning.empty());
    EXPECT_EQ(spec.slices[0].p.col(1).cwiseAbs().maxCoeff(), 0.0);
}
