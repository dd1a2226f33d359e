#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "phi.hpp"

namespace stripldp {

enum class Side { left, right };

struct DirectionVector {
    Vector v;
    int level = 0;
    double lambda = 0.0;
    Side side = Side::left;
    double error_radius = 2.0; // l1 for left, l-infinity for right
    PhiKind kind = PhiKind::full;
    int M = 0;
    int factors = 0;
    double c = 0.0;      // balanced entry bound measured on the consumed factors
    double spread = 0.0; // diameter of the coordinate-start images
    bool warmup = false;
};

// rho for consecutive factors F, G in a product ... F G ...:
//   min over (a, b, c) of F(a,b) G(b,c) / (F G)(a,c).
inline double pair_contraction(const Matrix& F, const Matrix& G)
{
    Matrix FG = F * G;
    double rho = 1.0;
    for (Eigen::Index a = 0; a < F.rows(); ++a)
        for (Eigen::Index b = 0; b < F.cols(); ++b)
            for (Eigen::Index c = 0; c < G.cols(); ++c)
                rho = std::min(rho, F(a, b) * G(b, c) / FG(a, c));
    return rho;
}

inline void require_positive(const Matrix& F)
{
    if (!(F.minCoeff() > 0.0))
        throw SpecError("product direction needs strictly positive factors; route zero-column matrices "
                        "through block_direction");
}

// Radius from the contraction certificate eps = prod (1 - d rho_r).
inline double radius_from_eps(double eps)
{
    if (eps <= 0.0) return 0.0;
    if (eps >= 1.0) return 2.0;
    return std::min(2.0, 2.0 * eps / (1.0 - eps));
}

// Radius from the uniform entry bound: (2/c^4)(1 - c^4)^(m-1).
inline double radius_from_c(double c, int m, int d)
{
    if (d == 1) return 0.0;
    if (m < 1) return 2.0;
    const double c4 = std::pow(c, 4);
    if (c4 >= 1.0) return m >= 2 ? 0.0 : 2.0;
    if (c4 <= 0.0) return 2.0;
    return std::min(2.0, 2.0 / c4 * std::pow(1.0 - c4, m - 1));
}

// Direction of pi F_1 ... F_m (left) or F_1 ... F_m 1 (right), normalized to
// sum 1 after every factor.
inline DirectionVector positive_product_direction(std::span<const Matrix> factors, Side side)
{
    if (factors.size() < 2) throw SpecError("positive_product_direction needs at least two factors");
    const Eigen::Index d = factors.front().rows();
    for (const auto& F : factors) {
        if (F.rows() != d || F.cols() != d) throw SpecError("factors must be square of equal size");
        require_positive(F);
    }
    DirectionVector out;
    out.side = side;
    out.factors = static_cast<int>(factors.size());
    double eps = 1.0;
    double c = 1.0;
    for (std::size_t j = 0; j < factors.size(); ++j) {
        c = std::min(c, balanced_bound(factors[j]));
        if (j + 1 < factors.size()) eps *= std::max(0.0, 1.0 - d * pair_contraction(factors[j], factors[j + 1]));
    }
    out.c = c;
    if (side == Side::left) {
        RowVector v = RowVector::Constant(d, 1.0 / d);
        for (const auto& F : factors) {
            v = v * F;
            v /= v.sum();
        }
        out.v = v.transpose();
    } else {
        Vector v = Vector::Constant(d, 1.0 / d);
        for (auto it = factors.rbegin(); it != factors.rend(); ++it) {
            v = (*it) * v;
            v /= v.sum();
        }
        out.v = v;
    }
    out.error_radius = d == 1 ? 0.0 : radius_from_eps(eps);
    return out;
}

inline std::vector<Matrix> entries_of(const std::vector<PhiMatrix>& phis)
{
    std::vector<Matrix> out;
    out.reserve(phis.size());
    for (const auto& p : phis) out.push_back(p.entries);
    return out;
}

// Left directions mu_n for n = lo+1 .. hi (mu_n consumes Phi_lo .. Phi_{n-1}),
// rolled forward from the uniform start.
inline std::vector<DirectionVector> mu_vectors(const std::vector<PhiMatrix>& phis, int warmup)
{
    if (phis.empty()) return {};
    if (warmup < 1) throw SpecError("warmup must be at least 1");
    const Eigen::Index d = phis.front().entries.rows();
    Matrix Z(d + 1, d); // rows: e_1 .. e_d starts, then the uniform start
    Z.topRows(d).setIdentity();
    Z.row(d).setConstant(1.0 / d);
    std::vector<DirectionVector> out;
    out.reserve(phis.size());
    double c = 1.0;
    for (std::size_t j = 0; j < phis.size(); ++j) {
        const auto& F = phis[j].entries;
        require_positive(F);
        c = std::min(c, balanced_bound(F));
        Z = Z * F;
        for (Eigen::Index i = 0; i <= d; ++i) Z.row(i) /= Z.row(i).sum();
        double spread = 0.0;
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = a + 1; b < d; ++b) spread = std::max(spread, (Z.row(a) - Z.row(b)).lpNorm<1>());
        DirectionVector dv;
        dv.v = Z.row(d).transpose();
        dv.level = phis[j].level + 1;
        dv.lambda = phis[j].lambda;
        dv.side = Side::left;
        dv.kind = phis[j].kind;
        dv.M = phis[j].M;
        dv.factors = static_cast<int>(j + 1);
        dv.c = c;
        dv.spread = spread;
        dv.error_radius = radius_from_c(c, dv.factors, static_cast<int>(d));
        dv.warmup = dv.factors <= warmup;
        out.push_back(std::move(dv));
    }
    return out;
}

// Right directions nu_k for k = lo .. hi-1 (nu_k consumes Phi_k .. Phi_{hi-1}).
inline std::vector<DirectionVector> nu_vectors(const std::vector<PhiMatrix>& phis, int warmup)
{
    if (phis.empty()) return {};
    if (warmup < 1) throw SpecError("warmup must be at least 1");
    const Eigen::Index d = phis.front().entries.rows();
    Matrix V(d, d + 1);
    V.leftCols(d).setIdentity();
    V.col(d).setConstant(1.0 / d);
    std::vector<DirectionVector> out(phis.size());
    double c = 1.0;
    for (std::size_t jj = phis.size(); jj-- > 0;) {
        const auto& F = phis[jj].entries;
        require_positive(F);
        c = std::min(c, balanced_bound(F));
        V = F * V;
        for (Eigen::Index i = 0; i <= d; ++i) V.col(i) /= V.col(i).sum();
        double spread = 0.0;
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = a + 1; b < d; ++b)
                spread = std::max(spread, (V.col(a) - V.col(b)).cwiseAbs().maxCoeff());
        DirectionVector& dv = out[jj];
        dv.v = V.col(d);
        dv.level = phis[jj].level;
        dv.lambda = phis[jj].lambda;
        dv.side = Side::right;
        dv.kind = phis[jj].kind;
        dv.M = phis[jj].M;
        dv.factors = static_cast<int>(phis.size() - jj);
        dv.c = c;
        dv.spread = spread;
        dv.error_radius = radius_from_c(c, dv.factors, static_cast<int>(d));
        dv.warmup = dv.factors <= warmup;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Block form for embedded (L, R) walks with L > R: Phi = [[A, 0], [B, 0]],
// A of size R x R, B of size (L - R) x R.
// ---------------------------------------------------------------------------

struct BlockPhi {
    Matrix A, B;
    int zero_cols = 0;

    int dim() const { return static_cast<int>(A.rows() + B.rows()); }

    static BlockPhi from_full(const Matrix& phi, int R)
    {
        const auto d = phi.rows();
        if (R < 1 || R >= d) throw SpecError("block split needs 1 <= R < d");
        if (phi.rightCols(d - R).cwiseAbs().maxCoeff() != 0.0)
            throw SpecError("matrix does not have the zero-column pattern of an embedded walk");
        BlockPhi b;
        b.A = phi.topLeftCorner(R, R);
        b.B = phi.bottomLeftCorner(d - R, R);
        b.zero_cols = static_cast<int>(d - R);
        if (!(b.A.minCoeff() > 0.0) || !(b.B.minCoeff() > 0.0))
            throw SpecError("blocks A and B must be strictly positive");
        return b;
    }
    Matrix full() const
    {
        const auto R = A.rows();
        const auto d = R + B.rows();
        Matrix f = Matrix::Zero(d, d);
        f.topLeftCorner(R, R) = A;
        f.bottomLeftCorner(d - R, R) = B;
        return f;
    }
};

struct BlockDirections {
    DirectionVector left;  // direction of pi Phi_1 ... Phi_m, zero-padded
    DirectionVector right; // direction of Phi_1 ... Phi_m 1
};

inline BlockDirections block_direction(const std::vector<BlockPhi>& blocks)
{
    if (blocks.size() < 3) throw SpecError("block_direction needs at least three factors");
    const int R = static_cast<int>(blocks.front().A.rows());
    const int d = blocks.front().dim();
    for (const auto& b : blocks)
        if (b.A.rows() != R || b.dim() != d) throw SpecError("blocks must share the same (L, R) pattern");
    std::vector<Matrix> As;
    for (const auto& b : blocks) As.push_back(b.A);

    BlockDirections out;
    out.left.side = Side::left;
    out.left.factors = static_cast<int>(blocks.size());
    out.left.v = Vector::Zero(d);
    {
        // pi Phi_1 ... Phi_m: the first factor maps any start into the first R
        // coordinates, after which only A-blocks act.
        const Matrix full1 = blocks.front().full();
        RowVector x = (RowVector::Constant(d, 1.0 / d) * full1).head(R);
        x /= x.sum();
        for (std::size_t j = 1; j < blocks.size(); ++j) {
            x = x * blocks[j].A;
            x /= x.sum();
        }
        out.left.v.head(R) = x.transpose();
        if (R == 1) {
            out.left.error_radius = 0.0;
        } else {
            auto inner = positive_product_direction(std::span<const Matrix>(As).subspan(1), Side::left);
            out.left.error_radius = inner.error_radius;
            out.left.c = inner.c;
        }
    }

    // sigma = direction of A_2 ... A_m 1, then Phi_1 sigma padded.
    Vector sigma;
    double sig_err = 0.0;
    if (R == 1) {
        sigma = Vector::Ones(1);
    } else {
        auto inner = positive_product_direction(std::span<const Matrix>(As).subspan(1), Side::right);
        sigma = inner.v;
        sig_err = inner.error_radius;
    }
    const Matrix full1 = blocks.front().full();
    Vector padded = Vector::Zero(d);
    padded.head(R) = sigma;
    Vector nu = full1 * padded;
    const double tot = nu.sum();
    nu /= tot;
    out.right.side = Side::right;
    out.right.factors = static_cast<int>(blocks.size());
    out.right.v = nu;
    // |Phi s / 1'Phi s - Phi s' / 1'Phi s'|_inf <= 2 |Phi|_1 |s - s'|_1 / min column sum
    const Matrix left_cols = full1.leftCols(R);
    const double colmax = left_cols.colwise().sum().maxCoeff();
    const double colmin = left_cols.colwise().sum().minCoeff();
    out.right.error_radius = std::min(1.0, 2.0 * colmax * sig_err / colmin);
    return out;
}

} // namespace stripldp
