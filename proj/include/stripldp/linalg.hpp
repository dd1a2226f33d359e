#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>

namespace stripldp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// LU of I - A without pivoting.  For A >= 0 entrywise the pivots all stay
// positive exactly when I - A is a nonsingular M-matrix.
class MMatrixLU {
public:
    bool factor(const Matrix& A)
    {
        const Eigen::Index d = A.rows();
        lu_ = -A;
        lu_.diagonal().array() += 1.0;
        for (Eigen::Index k = 0; k < d; ++k) {
            const double piv = lu_(k, k);
            double scale = 0.0;
            for (Eigen::Index j = k; j < d; ++j) scale = std::max(scale, std::abs(lu_(k, j)));
            if (!(piv > 1e-14 * std::max(scale, 1.0))) return ok_ = false;
            for (Eigen::Index i = k + 1; i < d; ++i) {
                const double f = lu_(i, k) / piv;
                lu_(i, k) = f;
                if (f == 0.0) continue;
                for (Eigen::Index j = k + 1; j < d; ++j) lu_(i, j) -= f * lu_(k, j);
            }
        }
        return ok_ = true;
    }
    bool ok() const { return ok_; }
    void solve_in_place(Matrix& X) const
    {
        const Eigen::Index d = lu_.rows();
        for (Eigen::Index i = 1; i < d; ++i)
            for (Eigen::Index k = 0; k < i; ++k)
                if (lu_(i, k) != 0.0) X.row(i) -= lu_(i, k) * X.row(k);
        for (Eigen::Index k = d - 1; k >= 0; --k) {
            for (Eigen::Index j = k + 1; j < d; ++j) X.row(k) -= lu_(k, j) * X.row(j);
            X.row(k) /= lu_(k, k);
        }
    }

private:
    Matrix lu_;
    bool ok_ = false;
};

// Solve (I - A) X = B for A >= 0 entrywise.  Returns nothing unless I - A is a
// nonsingular M-matrix, which elimination without pivoting detects through
// its pivots: all must stay positive.
inline std::optional<Matrix> solve_m_matrix(const Matrix& A, const Matrix& B)
{
    const Eigen::Index d = A.rows();
    Matrix Z = -A;
    Z.diagonal().array() += 1.0;
    Matrix X = B;
    for (Eigen::Index k = 0; k < d; ++k) {
        const double piv = Z(k, k);
        double scale = 0.0;
        for (Eigen::Index j = k; j < d; ++j) scale = std::max(scale, std::abs(Z(k, j)));
        if (!(piv > 1e-14 * std::max(scale, 1.0))) return std::nullopt;
        for (Eigen::Index i = k + 1; i < d; ++i) {
            const double f = Z(i, k) / piv;
            if (f == 0.0) continue;
            for (Eigen::Index j = k + 1; j < d; ++j) Z(i, j) -= f * Z(k, j);
            X.row(i) -= f * X.row(k);
            Z(i, k) = 0.0;
        }
    }
    for (Eigen::Index k = d - 1; k >= 0; --k) {
        for (Eigen::Index j = k + 1; j < d; ++j) X.row(k) -= Z(k, j) * X.row(j);
        X.row(k) /= Z(k, k);
    }
    if (!X.allFinite()) return std::nullopt;
    return X;
}

inline double min_entry(const Matrix& m) { return m.minCoeff(); }
inline double max_entry(const Matrix& m) { return m.maxCoeff(); }

// Largest c with c <= s*m(i,j) <= 1/c for some scale s > 0.
inline double balanced_bound(const Matrix& m)
{
    const double lo = m.minCoeff();
    const double hi = m.maxCoeff();
    if (!(lo > 0.0) || !(hi > 0.0)) return 0.0;
    return std::sqrt(lo / hi);
}

inline double l1_distance(const Vector& a, const Vector& b) { return (a - b).lpNorm<1>(); }
inline double l1_distance(const RowVector& a, const RowVector& b) { return (a - b).lpNorm<1>(); }

} // namespace stripldp
