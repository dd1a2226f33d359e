#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace stripldp;

namespace {

std::vector<PhiMatrix> phis_for(const EnvironmentSpec& spec, double lam, int lo, int hi, std::uint64_t seed)
{
    auto w = sample_window(spec, lo - 400, hi, seed);
    auto all = solve_phi_window(w, lam);
    return {all.begin() + 400, all.end()};
}

} // namespace

TEST(Directions, TwoFactorMinimum)
{
    std::vector<Matrix> one{Matrix::Constant(2, 2, 0.5)};
    EXPECT_THROW(positive_product_direction(one, Side::left), SpecError);
}

TEST(Directions, RejectsZeroEntries)
{
    Matrix z = Matrix::Constant(2, 2, 0.5);
    z(0, 1) = 0.0;
    std::vector<Matrix> f{z, z};
    EXPECT_THROW(positive_product_direction(f, Side::right), SpecError);
}

TEST(Directions, RankOneFactorsAreExact)
{
    Vector a(3), b(3);
    a << 1, 2, 3;
    b << 0.2, 0.3, 0.5;
    Matrix F = a * b.transpose();
    std::vector<Matrix> f{F, F, F};
    auto left = positive_product_direction(f, Side::left);
    EXPECT_LT(l1_distance(left.v, b), 1e-14);
    auto right = positive_product_direction(f, Side::right);
    EXPECT_LT(l1_distance(right.v, a / a.sum()), 1e-14);
    std::vector<Matrix> many(30, F);
    const double r30 = positive_product_direction(many, Side::left).error_radius;
    EXPECT_LT(r30, left.error_radius);
    EXPECT_LT(r30, 1e-3);
}

TEST(Directions, CertificateCoversLongerProduct)
{
    auto spec = oracle::random_iid_d2();
    auto phis = phis_for(spec, -0.2, 0, 60, 2);
    auto mus = mu_vectors(phis, 1);
    for (int m : {2, 5, 10, 30}) {
        // mu from the last m factors vs from the last m + 10 factors
        std::vector<PhiMatrix> shortp(phis.end() - m, phis.end()), longp(phis.end() - m - 10, phis.end());
        auto a = mu_vectors(shortp, 1).back(), b = mu_vectors(longp, 1).back();
        EXPECT_LE(l1_distance(a.v, b.v), a.error_radius) << m;
        EXPECT_LE(l1_distance(a.v, b.v), a.spread + 1e-15) << m;
    }
}

TEST(Directions, NuSpreadShrinks)
{
    auto spec = oracle::random_iid_d2();
    auto nus = nu_vectors(phis_for(spec, 0.0, 0, 40, 3), 1);
    EXPECT_LT(nus.front().spread, nus[35].spread);
    EXPECT_LT(nus.front().spread, 1e-12);
}

TEST(Blocks, MatchFullProducts)
{
    auto spec = embed_bounded_jump({{0.15, 0.15, 0.2, 0.5}}, 2, 1, 0.15);
    auto phis = phis_for(spec, 0.0, 0, 30, 0);
    std::vector<BlockPhi> blocks;
    for (const auto& p : phis) blocks.push_back(BlockPhi::from_full(p.entries, 1));
    auto bd = block_direction(blocks);

    RowVector x = RowVector::Constant(2, 0.5);
    Vector y = Vector::Ones(2);
    for (const auto& p : phis) {
        x = x * p.entries;
        x /= x.sum();
    }
    for (auto it = phis.rbegin(); it != phis.rend(); ++it) {
        y = it->entries * y;
        y /= y.sum();
    }
    EXPECT_LT(l1_distance(bd.left.v, Vector(x.transpose())), 1e-8);
    EXPECT_LT((bd.right.v - y).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(bd.left.v(1), 0.0);
}

TEST(Blocks, RejectsNonZeroPattern)
{
    EXPECT_THROW(BlockPhi::from_full(Matrix::Constant(2, 2, 0.3), 1), SpecError);
}
