#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "env.hpp"

namespace stripldp {

enum class PhiKind { full, truncated, derivative };

struct PhiMatrix {
    Matrix entries;
    int level = 0;
    double lambda = 0.0;
    PhiKind kind = PhiKind::full;
    int M = 0;            // truncation horizon, 0 when untruncated
    bool warmup = false;  // boundary influence above tolerance
};

// Lower bound c_lambda on entries of Phi(lambda) for an elliptic environment.
inline double c_lambda(double kappa, double lambda)
{
    return 0.5 * kappa * std::min(std::exp(lambda * n_kappa(kappa)), 1.0);
}

inline double lambda_crit_cap(double kappa) { return -std::log(kappa * kappa / 2.0); }

// ---------------------------------------------------------------------------
// Exact left-to-right solution.  Working with Psi = e^{-lambda} Phi,
//   (I - e^l r_k - e^{2l} q_k Psi_{k-1}) Psi_k = p_k,
// started from Psi_{lo-1} = 0, gives the minimal solution: Psi_k is the
// MGF of the walk killed below lo.  Each level costs one M-matrix solve.
// The derivative Dpsi = e^{-lambda} Phi' obeys
//   (I - A_k) Psi'_k = (e^l r_k + e^{2l} q_k (2 Psi_{k-1} + Psi'_{k-1})) Psi_k,
//   Dpsi_k = Psi_k + Psi'_k.
// ---------------------------------------------------------------------------

struct ScaledStep {
    double lambda;
    double e1, e2;
    double bound; // entry cap on Psi for lambda > 0, +inf otherwise
    MMatrixLU lu;
    Matrix A;

    ScaledStep(double lam, double kappa, bool use_bound)
        : lambda(lam), e1(std::exp(lam)), e2(std::exp(2 * lam)),
          bound((use_bound && lam > 0) ? std::exp(-2 * lam) / kappa * (1 + 1e-9)
                                       : std::numeric_limits<double>::infinity())
    {
    }

    // Returns false if the level cannot be solved (supercritical).
    bool psi(const EnvironmentSlice& s, const Matrix* prev, Matrix& out)
    {
        A = e1 * s.r;
        if (prev) A.noalias() += e2 * s.q * (*prev);
        if (!lu.factor(A)) return false;
        out = s.p;
        lu.solve_in_place(out);
        if (!out.allFinite() || out.maxCoeff() > bound) return false;
        return true;
    }

    // Must follow psi() on the same level.
    void derivative(const EnvironmentSlice& s, const Matrix* prev, const Matrix* prev_d, const Matrix& cur,
                    Matrix& out_d)
    {
        Matrix left = e1 * s.r;
        if (prev) left.noalias() += e2 * s.q * (2.0 * (*prev) + (*prev_d - *prev));
        Matrix rhs = left * cur;
        lu.solve_in_place(rhs);
        out_d = cur + rhs;
    }
};

struct ScaledPhi {
    double lambda = 0.0;
    int lo = 0, hi = 0;
    std::vector<Matrix> psi;
    std::vector<Matrix> dpsi; // empty unless requested
    std::vector<double> boundary_error;
    int reliable_from = 0; // first level whose boundary error (and all later ones) is within tol

    Matrix phi(int k) const { return std::exp(lambda) * psi[k - lo]; }
    Matrix phi_prime(int k) const { return std::exp(lambda) * dpsi[k - lo]; }
};

// Two trajectories, started one level apart, bracket the boundary influence:
// their gap d_k shrinks geometrically and d_k * rho / (1 - rho) estimates the
// distance still left to the bi-infinite limit.
class BoundaryTracker {
public:
    explicit BoundaryTracker(int memory = 16) : memory_(memory) {}
    double push(double gap)
    {
        hist_.push_back(gap);
        const int n = static_cast<int>(hist_.size());
        if (gap == 0.0) return 0.0;
        const int m = std::min(memory_, n - 1);
        if (m < 4) return std::numeric_limits<double>::infinity();
        double lo_gap = hist_[n - 1 - m];
        if (!(lo_gap > 0.0)) return std::numeric_limits<double>::infinity();
        const double rho = std::pow(gap / lo_gap, 1.0 / m);
        if (!(rho < 1.0)) return std::numeric_limits<double>::infinity();
        return gap * rho / (1.0 - rho);
    }

private:
    int memory_;
    std::vector<double> hist_;
};

inline double relative_gap(const Matrix& a, const Matrix& b)
{
    const double s = a.cwiseAbs().maxCoeff();
    if (s == 0.0) return 0.0;
    return (a - b).cwiseAbs().maxCoeff() / s;
}

inline ScaledPhi solve_scaled(const EnvironmentWindow& w, double lambda, bool want_derivative, double tol = 1e-12)
{
    if (w.size() < 2) throw SpecError("window must hold at least two levels");
    ScaledPhi out;
    out.lambda = lambda;
    out.lo = w.lo;
    out.hi = w.hi;
    const int n = w.size();
    out.psi.resize(n);
    if (want_derivative) out.dpsi.resize(n);
    out.boundary_error.assign(n, std::numeric_limits<double>::infinity());

    const bool use_bound = !w.bounded_jump;
    ScaledStep main(lambda, w.kappa, use_bound), shadow(lambda, w.kappa, use_bound);
    Matrix b_psi, b_d, tmp, tmp_d;
    BoundaryTracker tracker;
    for (int k = w.lo; k < w.hi; ++k) {
        const auto& s = w.at(k);
        const int i = k - w.lo;
        const Matrix* prev = i > 0 ? &out.psi[i - 1] : nullptr;
        if (!main.psi(s, prev, out.psi[i]))
            throw SupercriticalError("lambda is supercritical: excursion MGF diverges at level " + std::to_string(k),
                                     k, lambda);
        if (want_derivative) main.derivative(s, prev, i > 0 ? &out.dpsi[i - 1] : nullptr, out.psi[i], out.dpsi[i]);
        if (i == 0) continue;
        const bool first = (i == 1);
        shadow.psi(s, first ? nullptr : &b_psi, tmp);
        if (want_derivative) shadow.derivative(s, first ? nullptr : &b_psi, first ? nullptr : &b_d, tmp, tmp_d);
        double gap = relative_gap(out.psi[i], tmp);
        if (want_derivative) gap = std::max(gap, relative_gap(out.dpsi[i], tmp_d));
        b_psi.swap(tmp);
        if (want_derivative) b_d.swap(tmp_d);
        out.boundary_error[i] = tracker.push(gap);
    }
    int last_bad = -1;
    for (int i = n - 1; i >= 0; --i)
        if (!(out.boundary_error[i] <= tol)) {
            last_bad = i;
            break;
        }
    if (last_bad == n - 1)
        throw ConvergenceError("excursion MGFs did not forget the window boundary within " + std::to_string(n) +
                                   " levels",
                               out.boundary_error[n - 1]);
    out.reliable_from = w.lo + last_bad + 1;
    return out;
}

inline std::vector<PhiMatrix> solve_phi_window(const EnvironmentWindow& w, double lambda, double tol = 1e-12,
                                               int max_iter = 1 << 20)
{
    ScaledPhi sp = solve_scaled(w, lambda, false, tol);
    if (sp.reliable_from - w.lo > max_iter)
        throw ConvergenceError("boundary forgetting needs more than max_iter levels",
                               sp.boundary_error[max_iter]);
    std::vector<PhiMatrix> out;
    out.reserve(w.size());
    for (int k = w.lo; k < w.hi; ++k)
        out.push_back({sp.phi(k), k, lambda, PhiKind::full, 0, k < sp.reliable_from});
    return out;
}

inline std::vector<PhiMatrix> phi_derivative(const EnvironmentWindow& w, double lambda, double tol = 1e-12)
{
    ScaledPhi sp = solve_scaled(w, lambda, true, tol);
    std::vector<PhiMatrix> out;
    out.reserve(w.size());
    for (int k = w.lo; k < w.hi; ++k)
        out.push_back({sp.phi_prime(k), k, lambda, PhiKind::derivative, 0, k < sp.reliable_from});
    return out;
}

// max_k || Phi_k - e^l (p_k + r_k Phi_k + q_k Phi_{k-1} Phi_k) ||, over levels past the first.
inline double phi_residual(const EnvironmentWindow& w, const std::vector<PhiMatrix>& phis)
{
    double res = 0.0;
    for (std::size_t i = 1; i < phis.size(); ++i) {
        const auto& s = w.at(phis[i].level);
        const Matrix& f = phis[i].entries;
        Matrix rhs = std::exp(phis[i].lambda) * (s.p + s.r * f + s.q * phis[i - 1].entries * f);
        res = std::max(res, (f - rhs).cwiseAbs().maxCoeff());
    }
    return res;
}

// ---------------------------------------------------------------------------
// Truncated MGFs.  H_t(i,j) = P^{(k,i)}(T_{k+1} = t, Y = j) for t <= M does not
// depend on lambda, so Phi_{k,M}(lambda) = sum_t e^{lambda t} H_t.
// ---------------------------------------------------------------------------

struct HittingDistribution {
    int level = 0;
    int M = 0;
    std::vector<Matrix> H; // H[t-1]

    static void check_range(double lambda, int M)
    {
        if (lambda * (M - 1) > 690.0)
            throw NumericalError("lambda * M too large for the truncated MGF in linear scale");
    }
    // e^{-lambda} Phi_{k,M}(lambda)
    Matrix scaled(double lambda) const
    {
        check_range(lambda, M);
        Matrix out = Matrix::Zero(H[0].rows(), H[0].cols());
        for (int t = M; t >= 1; --t) out += std::exp(lambda * (t - 1)) * H[t - 1];
        return out;
    }
    // e^{-lambda} Phi'_{k,M}(lambda)
    Matrix scaled_derivative(double lambda) const
    {
        check_range(lambda, M);
        Matrix out = Matrix::Zero(H[0].rows(), H[0].cols());
        for (int t = M; t >= 1; --t) out += (t * std::exp(lambda * (t - 1))) * H[t - 1];
        return out;
    }
    Matrix phi(double lambda) const { return std::exp(lambda) * scaled(lambda); }
    Matrix phi_prime(double lambda) const { return std::exp(lambda) * scaled_derivative(lambda); }
    Matrix total() const
    {
        Matrix out = Matrix::Zero(H[0].rows(), H[0].cols());
        for (const auto& h : H) out += h;
        return out;
    }
};

inline HittingDistribution hitting_distribution(const EnvironmentWindow& w, int k, int M)
{
    if (M < 1) throw SpecError("truncation horizon M must be at least 1");
    if (!w.contains(k) || !w.contains(k - M + 1))
        throw SpecError("window must cover levels (k - M, k] for the truncated MGF");
    const int d = w.dim();
    HittingDistribution out;
    out.level = k;
    out.M = M;
    out.H.reserve(M);
    // mass[o]: start-height x current-height mass at level k - o
    std::vector<Matrix> mass(M, Matrix::Zero(d, d)), next(M, Matrix::Zero(d, d));
    mass[0].setIdentity();
    int top = 0; // highest occupied offset
    for (int t = 1; t <= M; ++t) {
        out.H.push_back(mass[0] * w.at(k).p);
        const int maxoff = M - t - 1; // offsets that can still reach k+1 in time
        if (maxoff < 0) break;
        const int ntop = std::min(top + 1, maxoff);
        for (int o = 0; o <= ntop; ++o) next[o].setZero();
        for (int o = 0; o <= top; ++o) {
            const auto& s = w.at(k - o);
            if (o <= maxoff) next[o].noalias() += mass[o] * s.r;
            if (o >= 1 && o - 1 <= maxoff) next[o - 1].noalias() += mass[o] * s.p;
            if (o + 1 <= maxoff) next[o + 1].noalias() += mass[o] * s.q;
        }
        top = ntop;
        std::swap(mass, next);
    }
    while (static_cast<int>(out.H.size()) < M) out.H.push_back(Matrix::Zero(d, d));
    return out;
}

inline PhiMatrix phi_truncated(const EnvironmentWindow& w, double lambda, int M, int k)
{
    auto h = hitting_distribution(w, k, M);
    return {h.phi(lambda), k, lambda, PhiKind::truncated, M, false};
}

// ---------------------------------------------------------------------------
// Critical exponent.
// ---------------------------------------------------------------------------

struct CriticalExponent {
    double lambda_crit = 0.0; // feasible end of the final bracket
    double lower = 0.0;
    double upper = 0.0;
    double tolerance = 0.0;
    double certified_lower = 0.0; // envelope bound (finite-support i.i.d. only)
    std::string method;
};

struct CritOptions {
    int max_levels = 400000;   // level budget per feasibility test
    double tol = 1e-7;         // bracket width
    double conv_tol = 1e-11;   // boundary error counted as converged
    int max_word_length = 0;   // 0: pick from support size
};

// Walk the recursion along a periodic word until it converges or blows up.
inline bool periodic_feasible(const std::vector<const EnvironmentSlice*>& word, double lambda, double kappa,
                              bool use_bound, const CritOptions& opt)
{
    const int P = static_cast<int>(word.size());
    ScaledStep a(lambda, kappa, use_bound), b(lambda, kappa, use_bound);
    Matrix pa, pb, ta, tb;
    BoundaryTracker tracker;
    for (int k = 0; k < opt.max_levels; ++k) {
        const auto& s = *word[k % P];
        if (!a.psi(s, k == 0 ? nullptr : &pa, ta)) return false;
        pa.swap(ta);
        if (k == 0) continue;
        if (!b.psi(s, k == 1 ? nullptr : &pb, tb)) return false;
        pb.swap(tb);
        const double err = tracker.push(relative_gap(pa, pb));
        if (k >= 2 * P + 8 && err <= opt.conv_tol) return true;
    }
    return false;
}

// Entrywise maximum over the support of the one-level maps.  A finite limit
// dominates Psi in every environment, so the envelope certifies feasibility.
inline bool envelope_feasible(const std::vector<EnvironmentSlice>& support, double lambda, double kappa,
                              const CritOptions& opt)
{
    std::vector<ScaledStep> steps;
    for (std::size_t s = 0; s < support.size(); ++s) steps.emplace_back(lambda, kappa, true);
    Matrix u, t, best;
    BoundaryTracker tracker;
    for (int k = 0; k < opt.max_levels; ++k) {
        for (std::size_t s = 0; s < support.size(); ++s) {
            if (!steps[s].psi(support[s], k == 0 ? nullptr : &u, t)) return false;
            if (s == 0) best = t;
            else best = best.cwiseMax(t);
        }
        if (k > 0) {
            const double err = tracker.push(relative_gap(best, u));
            if (k > 8 && err <= opt.conv_tol) return true;
        }
        u = best;
    }
    return false;
}

template <class Feasible>
inline void bisect_crit(Feasible&& feasible, double lo, double hi, double tol, double& out_lo, double& out_hi)
{
    if (feasible(hi)) {
        out_lo = out_hi = hi;
        return;
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid)) lo = mid;
        else hi = mid;
    }
    out_lo = lo;
    out_hi = hi;
}

// Lyndon words (aperiodic necklaces) over {0..s-1} of length <= n, Duval's order.
inline std::vector<std::vector<int>> lyndon_words(int s, int n)
{
    std::vector<std::vector<int>> out;
    std::vector<int> w{-1};
    while (!w.empty()) {
        w.back() += 1;
        out.push_back(w);
        const std::size_t m = w.size();
        while (static_cast<int>(w.size()) < n) w.push_back(w[w.size() - m]);
        while (!w.empty() && w.back() == s - 1) w.pop_back();
    }
    return out;
}

inline CriticalExponent estimate_lambda_crit(const EnvironmentSpec& spec, int window_len, double tol,
                                             std::uint64_t seed, CritOptions opt = {})
{
    spec.validate();
    opt.tol = tol;
    if (window_len > 0) opt.max_levels = window_len;
    const double cap = lambda_crit_cap(spec.kappa);
    const bool use_bound = !spec.bounded_jump.has_value();
    CriticalExponent ce;
    ce.tolerance = tol;
    double lo = 0.0, hi = 0.0;

    if (spec.kind == SpecKind::periodic) {
        std::vector<const EnvironmentSlice*> word;
        for (const auto& s : spec.slices) word.push_back(&s);
        bisect_crit([&](double l) { return periodic_feasible(word, l, spec.kappa, use_bound, opt); }, 0.0, cap,
                    tol, lo, hi);
        ce.method = "periodic";
        ce.certified_lower = lo;
    } else if (spec.kind == SpecKind::iid_finite) {
        const int s = spec.support_size();
        int K = opt.max_word_length;
        if (K <= 0) K = s <= 2 ? 4 : (s <= 4 ? 3 : (s <= 8 ? 2 : 1));
        auto words = lyndon_words(s, K);
        double best_lo = cap, best_hi = cap;
        for (const auto& wd : words) {
            std::vector<const EnvironmentSlice*> word;
            for (int i : wd) word.push_back(&spec.slices[i]);
            auto feas = [&](double l) { return periodic_feasible(word, l, spec.kappa, use_bound, opt); };
            if (feas(best_lo)) continue; // cannot lower the minimum
            double wl, wh;
            bisect_crit(feas, 0.0, best_lo, tol, wl, wh);
            best_lo = wl;
            best_hi = wh;
        }
        lo = best_lo;
        hi = best_hi;
        double el, eh;
        bisect_crit([&](double l) { return envelope_feasible(spec.slices, l, spec.kappa, opt); }, 0.0, lo, tol, el,
                    eh);
        ce.certified_lower = el;
        ce.method = "periodic-words<=" + std::to_string(K);
    } else {
        EnvironmentWindow w = sample_window(spec, 0, opt.max_levels, seed);
        auto feas = [&](double l) {
            try {
                solve_scaled(w, l, false, 1e-9);
                return true;
            } catch (const NumericalError&) {
                return false;
            }
        };
        bisect_crit(feas, 0.0, cap, tol, lo, hi);
        ce.certified_lower = 0.0;
        ce.method = "sampled-window";
    }
    ce.lower = lo;
    ce.upper = hi;
    ce.lambda_crit = lo;
    return ce;
}

} // namespace stripldp
