#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "phi.hpp"
#include "products.hpp"

namespace stripldp {

enum class LmgfKind { full, truncated, derivative, truncated_derivative };

inline const char* to_string(LmgfKind k)
{
    switch (k) {
    case LmgfKind::full: return "full";
    case LmgfKind::truncated: return "truncated";
    case LmgfKind::derivative: return "derivative";
    case LmgfKind::truncated_derivative: return "truncated-derivative";
    }
    return "?";
}

struct LmgfOptions {
    int n_levels = 4096;
    std::uint64_t seed = 1;
    int warmup = 0;          // 0: grow automatically until the boundaries are forgotten
    int max_warmup = 1 << 21;
    double tol = 1e-12;      // boundary forgetting tolerance for Phi and the directions
    std::optional<double> lambda_crit; // values above it are reported as +inf
};

struct LmgfEstimate {
    double lambda = 0.0;
    double value = 0.0;
    double deterministic_error = 0.0;
    double statistical_error = 0.0;
    int n = 0;
    LmgfKind kind = LmgfKind::full;
    int M = 0;
    bool supercritical = false;
    int warmup = 0;
    double mu_spread = 0.0;
    double nu_spread = 0.0;
    double c = 0.0;
    std::string note;
};

namespace detail {

inline double batch_half_width(const std::vector<double>& x)
{
    const int n = static_cast<int>(x.size());
    const int nb = std::min(50, n / 16);
    if (nb < 2) return 0.0;
    const int B = n / nb;
    std::vector<double> means(nb, 0.0);
    for (int b = 0; b < nb; ++b) {
        double s = 0.0;
        for (int i = b * B; i < (b + 1) * B; ++i) s += x[i];
        means[b] = s / B;
    }
    double m = 0.0;
    for (double v : means) m += v;
    m /= nb;
    double var = 0.0;
    for (double v : means) var += (v - m) * (v - m);
    var /= (nb - 1);
    return 1.96 * std::sqrt(var / nb);
}

inline double window_bound(double c, int n, int d)
{
    if (d == 1 || n <= 0) return 0.0;
    const double c4 = std::pow(c, 4);
    if (c4 >= 1.0) return 0.0;
    if (!(c > 0.0)) return std::numeric_limits<double>::infinity();
    return 2.0 / ((1.0 - c4) * std::pow(c, 10) * n);
}

// Scaled factors Psi_k (and optionally Dpsi_k = e^{-lambda} Phi'_k) for
// levels [lo, lo + size).
struct FactorWindow {
    int lo = 0;
    std::vector<Matrix> psi, dpsi;
    const Matrix& at(int k) const { return psi[k - lo]; }
    const Matrix& d_at(int k) const { return dpsi[k - lo]; }
    int hi() const { return lo + static_cast<int>(psi.size()); }
};

struct BirkhoffResult {
    double mean_log = 0.0, mean_ratio = 0.0;
    double hw_log = 0.0, hw_ratio = 0.0;
    double mu_spread = 0.0, nu_spread = 0.0;
    double c = 1.0;
};

// Averages over levels [0, n): log(mu_k Psi_k 1) and, if wanted,
// mu_k D_k nu_{k+1} / mu_k Psi_k nu_{k+1}.  mu is rolled from mu_start, nu
// from the right end of the window.
inline BirkhoffResult birkhoff(const FactorWindow& fw, int n, int mu_start, bool want_ratio, bool want_stat)
{
    const Eigen::Index d = fw.psi.front().rows();
    BirkhoffResult out;

    Matrix Z(d + 1, d);
    Z.topRows(d).setIdentity();
    Z.row(d).setConstant(1.0 / d);
    for (int k = mu_start; k < 0; ++k) {
        Z = Z * fw.at(k);
        for (Eigen::Index i = 0; i <= d; ++i) Z.row(i) /= Z.row(i).sum();
    }
    for (Eigen::Index a = 0; a < d; ++a)
        for (Eigen::Index b = a + 1; b < d; ++b) out.mu_spread = std::max(out.mu_spread, (Z.row(a) - Z.row(b)).lpNorm<1>());
    RowVector mu = Z.row(d);

    std::vector<Vector> nu;
    if (want_ratio) {
        Matrix V(d, d + 1);
        V.leftCols(d).setIdentity();
        V.col(d).setConstant(1.0 / d);
        for (int k = fw.hi() - 1; k >= n; --k) {
            V = fw.at(k) * V;
            for (Eigen::Index i = 0; i <= d; ++i) V.col(i) /= V.col(i).sum();
        }
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = a + 1; b < d; ++b)
                out.nu_spread = std::max(out.nu_spread, (V.col(a) - V.col(b)).cwiseAbs().maxCoeff());
        nu.resize(n + 1);
        Vector v = V.col(d);
        nu[n] = v;
        for (int k = n - 1; k >= 1; --k) {
            v = fw.at(k) * v;
            v /= v.sum();
            nu[k] = v;
        }
    }

    std::vector<double> logs(n), ratios(want_ratio ? n : 0);
    double c = 1.0;
    for (int k = 0; k < n; ++k) {
        const Matrix& P = fw.at(k);
        c = std::min(c, balanced_bound(P));
        RowVector muP = mu * P;
        const double s = muP.sum();
        logs[k] = std::log(s);
        if (want_ratio) {
            const double num = (mu * fw.d_at(k)).dot(nu[k + 1]);
            const double den = muP.dot(nu[k + 1]);
            ratios[k] = num / den;
        }
        mu = muP / s;
    }
    double sl = 0.0, sr = 0.0;
    for (double v : logs) sl += v;
    for (double v : ratios) sr += v;
    out.mean_log = sl / n;
    out.mean_ratio = want_ratio ? sr / n : 0.0;
    out.c = c;
    if (want_stat) {
        out.hw_log = batch_half_width(logs);
        if (want_ratio) out.hw_ratio = batch_half_width(ratios);
    }
    return out;
}

inline int averaged_levels(const EnvironmentSpec& spec, int n_levels)
{
    if (n_levels < 1) throw SpecError("n_levels must be positive");
    if (spec.kind == SpecKind::periodic) {
        const int P = spec.period();
        return P * ((n_levels + P - 1) / P);
    }
    return n_levels;
}

inline void check_sandwich(const EnvironmentSpec& spec, const LmgfEstimate& e)
{
    if (spec.bounded_jump || e.lambda > 0.0 || !std::isfinite(e.value)) return;
    const double slack = 1e-9;
    if (e.value > e.lambda + slack || e.value < e.lambda + std::log(spec.kappa) - slack)
        throw NumericalError("log-MGF estimate violates lambda + log(kappa) <= value <= lambda");
}

inline LmgfEstimate supercritical_estimate(double lambda, LmgfKind kind, const std::string& why)
{
    LmgfEstimate e;
    e.lambda = lambda;
    e.kind = kind;
    e.value = std::numeric_limits<double>::infinity();
    e.supercritical = true;
    e.note = why;
    return e;
}

inline LmgfEstimate evaluate_full(const EnvironmentSpec& spec, double lambda, const LmgfOptions& opt, bool deriv)
{
    const LmgfKind kind = deriv ? LmgfKind::derivative : LmgfKind::full;
    if (opt.lambda_crit && lambda > *opt.lambda_crit)
        return supercritical_estimate(lambda, kind, "lambda above the critical exponent");
    const int n = averaged_levels(spec, opt.n_levels);
    const bool automatic = opt.warmup <= 0;
    int W = automatic ? 256 : opt.warmup;
    const bool iid = spec.kind != SpecKind::periodic;
    for (;;) {
        const bool can_grow = automatic && 2 * W <= opt.max_warmup;
        EnvironmentWindow w = sample_window(spec, -W, n + W, opt.seed);
        ScaledPhi sp;
        try {
            sp = solve_scaled(w, lambda, deriv, opt.tol);
        } catch (const SupercriticalError& e) {
            return supercritical_estimate(lambda, kind, e.what());
        } catch (const ConvergenceError&) {
            if (can_grow) {
                W *= 2;
                continue;
            }
            throw;
        }
        if (sp.reliable_from > -W / 2) {
            if (can_grow) {
                W *= 2;
                continue;
            }
            if (sp.reliable_from > 0)
                throw ConvergenceError("warm-up too short: excursion MGFs still depend on the boundary",
                                       sp.boundary_error[-sp.lo]);
        }
        FactorWindow fw;
        fw.lo = w.lo;
        fw.psi = std::move(sp.psi);
        fw.dpsi = std::move(sp.dpsi);
        auto br = birkhoff(fw, n, std::max(sp.reliable_from, w.lo), deriv, iid);
        if ((br.mu_spread > opt.tol || (deriv && br.nu_spread > opt.tol)) && can_grow) {
            W *= 2;
            continue;
        }
        LmgfEstimate e;
        e.lambda = lambda;
        e.kind = kind;
        e.n = n;
        e.warmup = W;
        e.mu_spread = br.mu_spread;
        e.nu_spread = br.nu_spread;
        e.c = br.c;
        e.deterministic_error = window_bound(br.c, n, spec.d);
        if (deriv) {
            e.value = br.mean_ratio;
            e.statistical_error = br.hw_ratio;
        } else {
            e.value = lambda + br.mean_log;
            e.statistical_error = br.hw_log;
            check_sandwich(spec, e);
        }
        return e;
    }
}

} // namespace detail

inline LmgfEstimate lambda_eta(const EnvironmentSpec& spec, double lambda, const LmgfOptions& opt)
{
    return detail::evaluate_full(spec, lambda, opt, false);
}

inline LmgfEstimate lambda_eta(const EnvironmentSpec& spec, double lambda, int n_levels, std::uint64_t seed)
{
    LmgfOptions o;
    o.n_levels = n_levels;
    o.seed = seed;
    return lambda_eta(spec, lambda, o);
}

inline LmgfEstimate lambda_eta_prime(const EnvironmentSpec& spec, double lambda, const LmgfOptions& opt)
{
    return detail::evaluate_full(spec, lambda, opt, true);
}

inline LmgfEstimate lambda_eta_prime(const EnvironmentSpec& spec, double lambda, int n_levels, std::uint64_t seed)
{
    LmgfOptions o;
    o.n_levels = n_levels;
    o.seed = seed;
    return lambda_eta_prime(spec, lambda, o);
}

// ---------------------------------------------------------------------------
// Truncated log-MGF.  The hitting distributions do not depend on lambda, so
// they are computed once per window and reused for every lambda.
// ---------------------------------------------------------------------------

class TruncatedModel {
public:
    TruncatedModel(const EnvironmentSpec& spec, int M, int n_levels, std::uint64_t seed, int warmup = 0)
        : spec_(spec), M_(M)
    {
        spec.validate();
        if (M < 1) throw SpecError("M must be at least 1");
        if (spec.d > 1 && M < n_kappa(spec.kappa))
            throw SpecError("M must be at least N_kappa = " + std::to_string(n_kappa(spec.kappa)) +
                            " for strictly positive truncated matrices");
        n_ = detail::averaged_levels(spec, n_levels);
        W_ = warmup > 0 ? warmup : 256;
        lo_ = -W_;
        hi_ = n_ + W_;
        if (spec.kind == SpecKind::periodic) {
            const int P = spec.period();
            EnvironmentWindow w = sample_window(spec, -M - P, P, seed);
            for (int r = 0; r < P; ++r) dists_.push_back(hitting_distribution(w, r, M));
            which_.resize(hi_ - lo_);
            for (int k = lo_; k < hi_; ++k) which_[k - lo_] = floor_mod(k, P);
        } else {
            EnvironmentWindow w = sample_window(spec, lo_ - M, hi_, seed);
            dists_.reserve(hi_ - lo_);
            which_.resize(hi_ - lo_);
            for (int k = lo_; k < hi_; ++k) {
                dists_.push_back(hitting_distribution(w, k, M));
                which_[k - lo_] = k - lo_;
            }
        }
    }

    int M() const { return M_; }
    int n() const { return n_; }
    const HittingDistribution& at(int k) const { return dists_[which_[k - lo_]]; }

    LmgfEstimate evaluate(double lambda, bool deriv) const
    {
        detail::FactorWindow fw;
        fw.lo = lo_;
        // periodic specs reuse one factor per residue
        std::vector<Matrix> cache_psi(dists_.size()), cache_d(dists_.size());
        for (std::size_t i = 0; i < dists_.size(); ++i) {
            cache_psi[i] = dists_[i].scaled(lambda);
            if (deriv) cache_d[i] = dists_[i].scaled_derivative(lambda);
        }
        fw.psi.reserve(hi_ - lo_);
        for (int k = lo_; k < hi_; ++k) {
            fw.psi.push_back(cache_psi[which_[k - lo_]]);
            if (deriv) fw.dpsi.push_back(cache_d[which_[k - lo_]]);
        }
        for (const auto& P : cache_psi)
            if (!(P.minCoeff() > 0.0) && spec_.d > 1)
                throw NumericalError("truncated matrix has a zero entry");
        const bool iid = spec_.kind != SpecKind::periodic;
        auto br = detail::birkhoff(fw, n_, lo_, deriv, iid);
        LmgfEstimate e;
        e.lambda = lambda;
        e.kind = deriv ? LmgfKind::truncated_derivative : LmgfKind::truncated;
        e.M = M_;
        e.n = n_;
        e.warmup = W_;
        e.mu_spread = br.mu_spread;
        e.nu_spread = br.nu_spread;
        e.c = br.c;
        e.deterministic_error = detail::window_bound(br.c, n_, spec_.d);
        if (deriv) {
            e.value = br.mean_ratio;
            e.statistical_error = br.hw_ratio;
        } else {
            e.value = lambda + br.mean_log;
            e.statistical_error = br.hw_log;
            // lower bound lambda + log kappa for lambda < 0, (M-2) lambda + M log kappa otherwise
            const double lb = lambda < 0 ? lambda + std::log(spec_.kappa)
                                          : (M_ - 2) * lambda + M_ * std::log(spec_.kappa);
            if (!spec_.bounded_jump && M_ >= n_kappa(spec_.kappa) && e.value < lb - 1e-9)
                throw NumericalError("truncated log-MGF fell below its lower bound");
        }
        return e;
    }

    LmgfEstimate value(double lambda) const { return evaluate(lambda, false); }
    LmgfEstimate derivative(double lambda) const { return evaluate(lambda, true); }

private:
    EnvironmentSpec spec_;
    int M_ = 0, n_ = 0, W_ = 0, lo_ = 0, hi_ = 0;
    std::vector<HittingDistribution> dists_;
    std::vector<int> which_;
};

inline LmgfEstimate lambda_eta_truncated(const EnvironmentSpec& spec, double lambda, int M, int n_levels,
                                         std::uint64_t seed)
{
    return TruncatedModel(spec, M, n_levels, seed).value(lambda);
}

inline LmgfEstimate lambda_eta_truncated_prime(const EnvironmentSpec& spec, double lambda, int M, int n_levels,
                                               std::uint64_t seed)
{
    return TruncatedModel(spec, M, n_levels, seed).derivative(lambda);
}

// ---------------------------------------------------------------------------
// LLN point, critical slope and regime.
// ---------------------------------------------------------------------------

enum class Regime { transient_right, recurrent, transient_left };

inline const char* to_string(Regime r)
{
    switch (r) {
    case Regime::transient_right: return "transient-right";
    case Regime::recurrent: return "recurrent";
    case Regime::transient_left: return "transient-left";
    }
    return "?";
}

struct EnvironmentAnalysis {
    double t0 = std::numeric_limits<double>::infinity();
    double t_star = std::numeric_limits<double>::infinity();
    double v0 = 0.0;
    CriticalExponent lambda_crit;
    Regime regime = Regime::recurrent;
    bool ambiguous = false;
    bool t0_stable = true;
    std::optional<double> lambda_at_zero;          // Lambda(0), when the recursion converged
    std::optional<double> inverted_lambda_at_zero; // same for the reflected environment
    std::string note;
};

struct AnalysisOptions {
    LmgfOptions lmgf;
    double crit_tol = 1e-7;
    int crit_levels = 400000;
    double regime_tol = 1e-8;
    int regime_max_warmup = 1 << 16;
};

namespace detail {

inline std::optional<double> lambda_at_zero(const EnvironmentSpec& spec, const AnalysisOptions& opt)
{
    LmgfOptions o = opt.lmgf;
    o.max_warmup = std::min(o.max_warmup, opt.regime_max_warmup);
    o.lambda_crit.reset();
    try {
        return lambda_eta(spec, 0.0, o).value;
    } catch (const ConvergenceError&) {
        return std::nullopt; // sublinear forgetting: the walk is (close to) recurrent
    }
}

inline double slope_at(const EnvironmentSpec& spec, double lambda, const LmgfOptions& o)
{
    auto e = lambda_eta_prime(spec, lambda, o);
    return e.supercritical ? std::numeric_limits<double>::infinity() : e.value;
}

} // namespace detail

inline EnvironmentAnalysis analyze_environment(const EnvironmentSpec& spec, const AnalysisOptions& opt)
{
    spec.validate();
    EnvironmentAnalysis a;
    a.lambda_crit = estimate_lambda_crit(spec, opt.crit_levels, opt.crit_tol, opt.lmgf.seed);
    LmgfOptions o = opt.lmgf;
    o.lambda_crit.reset();

    a.lambda_at_zero = detail::lambda_at_zero(spec, opt);
    const EnvironmentSpec inv = invert_spec(spec);
    auto t_star_of = [&](const EnvironmentSpec& sp, double lc) {
        if (lc <= opt.crit_tol) return std::numeric_limits<double>::infinity();
        double ts;
        try {
            ts = detail::slope_at(sp, lc - opt.crit_tol, o);
        } catch (const ConvergenceError&) {
            ts = std::numeric_limits<double>::infinity();
        }
        return ts > 1.0 / opt.crit_tol ? std::numeric_limits<double>::infinity() : ts;
    };
    // t0 is the left derivative at 0. When lambda_crit is clearly positive,
    // Lambda is analytic at 0 and the derivative there is exact; otherwise
    // step to -1e-6 so a recurrent-like spec cannot report a spurious value.
    // lambda_crit is invariant under inversion, so one bound serves both.
    const bool smooth_at_zero = a.lambda_crit.lambda_crit > 100.0 * opt.crit_tol;
    auto t0_of = [&](const EnvironmentSpec& sp, bool& stable) {
        const double t0 = detail::slope_at(sp, smooth_at_zero ? 0.0 : -1e-6, o);
        const double t1 = detail::slope_at(sp, -1e-4, o);
        stable = std::abs(t0 - t1) <= 1e-2 * std::max(1.0, std::abs(t0));
        return t0;
    };

    if (a.lambda_at_zero && *a.lambda_at_zero < -opt.regime_tol) {
        a.regime = Regime::transient_left;
        a.t0 = t0_of(spec, a.t0_stable);
        bool st = true;
        const double t0_inv = t0_of(inv, st);
        a.v0 = -1.0 / t0_inv;
        a.t_star = std::max(a.t0, t_star_of(spec, a.lambda_crit.lambda_crit));
        a.inverted_lambda_at_zero = detail::lambda_at_zero(inv, opt);
        return a;
    }
    a.inverted_lambda_at_zero = detail::lambda_at_zero(inv, opt);
    if (a.inverted_lambda_at_zero && *a.inverted_lambda_at_zero < -opt.regime_tol) {
        a.regime = Regime::transient_right;
        a.t0 = t0_of(spec, a.t0_stable);
        a.v0 = 1.0 / a.t0;
        a.t_star = a.lambda_crit.lambda_crit <= opt.crit_tol ? a.t0
                                                             : std::max(a.t0, t_star_of(spec, a.lambda_crit.lambda_crit));
        return a;
    }
    a.regime = Regime::recurrent;
    a.t0 = std::numeric_limits<double>::infinity();
    a.t_star = std::numeric_limits<double>::infinity();
    a.v0 = 0.0;
    if (a.lambda_at_zero && a.inverted_lambda_at_zero) {
        a.ambiguous = true;
        a.note = "both log-MGFs at 0 are within tolerance of zero";
    } else {
        a.note = "excursion MGFs at lambda = 0 forget the boundary only sublinearly";
    }
    return a;
}

inline EnvironmentAnalysis analyze_environment(const EnvironmentSpec& spec, int n_levels, std::uint64_t seed)
{
    AnalysisOptions o;
    o.lmgf.n_levels = n_levels;
    o.lmgf.seed = seed;
    return analyze_environment(spec, o);
}

} // namespace stripldp
