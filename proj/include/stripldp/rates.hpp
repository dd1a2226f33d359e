#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lmgf.hpp"

namespace stripldp {

enum class RateKind { quenched_hitting, truncated_hitting, quenched_speed, averaged_hitting, averaged_speed };

inline const char* to_string(RateKind k)
{
    switch (k) {
    case RateKind::quenched_hitting: return "hitting";
    case RateKind::truncated_hitting: return "hitting-truncated";
    case RateKind::quenched_speed: return "speed";
    case RateKind::averaged_hitting: return "averaged-hitting";
    case RateKind::averaged_speed: return "averaged-speed";
    }
    return "?";
}

struct EvalPoint {
    double value = 0.0;
    double det_error = 0.0;
    double stat_error = 0.0;
};

using LambdaEvaluator = std::function<EvalPoint(double)>;

struct LegendreResult {
    double value = 0.0;
    double argmax = 0.0;
    double det_error = 0.0;
    double stat_error = 0.0;
    bool infinite = false;
    bool linear_branch = false;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kLambdaAtOne = -30.0;

// Maximizes g on [a, b] for concave g; returns the argmax.
template <class G>
inline double golden_max(G&& g, double a, double b, double tol)
{
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = g(x1), f2 = g(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = g(x1);
        }
    }
    return f1 > f2 ? x1 : x2;
}

inline double legendre_lower_lambda(double t, double kappa)
{
    return std::min(-10.0, std::log(kappa) / (t - 1.0) - 1.0);
}

// sup over lambda <= lambda_crit of lambda t - Lambda(lambda).
inline LegendreResult legendre_point(const LambdaEvaluator& f, double t, double lambda_crit, double kappa,
                                     std::optional<double> t_star = std::nullopt, double lambda_tol = 1e-8)
{
    LegendreResult out;
    if (t < 1.0) {
        out.value = kInf;
        out.infinite = true;
        out.argmax = -kInf;
        return out;
    }
    auto finish = [&](double lam) {
        const EvalPoint e = f(lam);
        out.argmax = lam;
        out.value = lam * t - e.value;
        out.det_error = e.det_error;
        out.stat_error = e.stat_error;
    };
    if (t == 1.0) {
        finish(kLambdaAtOne);
        return out;
    }
    if (t_star && t >= *t_star) {
        finish(lambda_crit);
        out.linear_branch = true;
        return out;
    }
    const double a = legendre_lower_lambda(t, kappa);
    auto g = [&](double lam) { return lam * t - f(lam).value; };
    const double lam = golden_max(g, a, lambda_crit, lambda_tol);
    const double inner = g(lam), edge = g(lambda_crit);
    if (edge >= inner) {
        finish(lambda_crit);
        out.linear_branch = true;
    } else {
        finish(lam);
    }
    return out;
}

struct RateCurve {
    RateKind kind = RateKind::quenched_hitting;
    std::vector<double> abscissae, values, argmax, det_error, stat_error;
    std::vector<std::vector<double>> tilts; // averaged kinds: optimal weights per abscissa
    std::vector<double> dual;               // averaged hitting: Legendre of the candidate-family lower bound
    EnvironmentAnalysis meta;
    int M = 0;
    std::string spec_hash;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;

    std::size_t size() const { return abscissae.size(); }
    void push(double x, const LegendreResult& r)
    {
        abscissae.push_back(x);
        values.push_back(r.value);
        argmax.push_back(r.argmax);
        det_error.push_back(r.det_error);
        stat_error.push_back(r.stat_error);
    }
};

struct RateOptions {
    AnalysisOptions analysis;
    std::optional<int> M;
    std::optional<EnvironmentAnalysis> known_analysis;
    double lambda_tol = 1e-8;
    // averaged rates
    int max_sweeps = 3;
    double tilt_tol = 1e-4;
    double tilt_span = 6.0;
};

inline LambdaEvaluator full_evaluator(const EnvironmentSpec& spec, const LmgfOptions& o)
{
    return [spec, o](double lam) {
        auto e = lambda_eta(spec, lam, o);
        if (e.supercritical) return EvalPoint{kInf, 0.0, 0.0};
        return EvalPoint{e.value, e.deterministic_error, e.statistical_error};
    };
}

// Grid from lo to hi with extra points clustered geometrically around t0.
inline std::vector<double> make_t_grid(double lo, double hi, int count, std::optional<double> t0 = std::nullopt)
{
    std::vector<double> g;
    for (int i = 0; i < count; ++i) g.push_back(lo + (hi - lo) * i / std::max(1, count - 1));
    if (t0 && std::isfinite(*t0) && *t0 >= lo && *t0 <= hi) {
        g.push_back(*t0);
        const double span = (hi - lo) / std::max(1, count - 1);
        for (double delta = span / 2; delta > span / 64; delta /= 2) {
            if (*t0 - delta >= lo) g.push_back(*t0 - delta);
            if (*t0 + delta <= hi) g.push_back(*t0 + delta);
        }
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end(), [](double a, double b) { return std::abs(a - b) < 1e-12; }), g.end());
    return g;
}

// Solve Lambda'_M(lambda) = t by bisection.
inline double truncated_tilt(const TruncatedModel& tm, double t, double kappa)
{
    const int M = tm.M();
    if (!(t > 1.0) || !(t < M - 2.0)) throw NumericalError("tilt equation needs 1 < t < M - 2");
    double lo = legendre_lower_lambda(t, kappa);
    const double cap = 690.0 / std::max(1, M - 1);
    double hi = std::min(0.5, cap);
    while (tm.derivative(hi).value < t) {
        if (hi >= cap) throw NumericalError("no tilt reaches the requested slope before overflow");
        hi = std::min(2 * hi, cap);
    }
    if (tm.derivative(lo).value > t) throw NumericalError("tilt bisection failed at the lower end");
    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (tm.derivative(mid).value < t) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

inline RateCurve hitting_rate_curve(const EnvironmentSpec& spec, const std::vector<double>& t_grid,
                                    const RateOptions& opt = {})
{
    spec.validate();
    for (double t : t_grid)
        if (!std::isfinite(t)) throw SpecError("t grid must be finite");
    RateCurve c;
    c.seed = opt.analysis.lmgf.seed;
    c.meta = opt.known_analysis ? *opt.known_analysis : analyze_environment(spec, opt.analysis);
    const double lc = c.meta.lambda_crit.lambda_crit;
    if (opt.M) {
        const int M = *opt.M;
        for (double t : t_grid)
            if (t > 1.0 && !(M > t + 2.0)) throw SpecError("truncation needs M > t + 2 on the whole grid");
        c.kind = RateKind::truncated_hitting;
        c.M = M;
        TruncatedModel tm(spec, M, opt.analysis.lmgf.n_levels, opt.analysis.lmgf.seed);
        for (double t : t_grid) {
            LegendreResult r;
            if (t < 1.0) {
                r.value = kInf;
                r.infinite = true;
                r.argmax = -kInf;
            } else {
                const double lam = t == 1.0 ? kLambdaAtOne : truncated_tilt(tm, t, spec.kappa);
                const auto e = tm.value(lam);
                r.argmax = lam;
                r.value = lam * t - e.value;
                r.det_error = e.deterministic_error;
                r.stat_error = e.statistical_error;
            }
            c.push(t, r);
        }
        return c;
    }
    c.kind = RateKind::quenched_hitting;
    LmgfOptions o = opt.analysis.lmgf;
    o.lambda_crit.reset();
    auto f = full_evaluator(spec, o);
    std::optional<double> ts;
    if (std::isfinite(c.meta.t_star)) ts = c.meta.t_star;
    for (double t : t_grid) c.push(t, legendre_point(f, t, lc, spec.kappa, ts, opt.lambda_tol));
    return c;
}

inline RateCurve speed_rate_curve(const EnvironmentSpec& spec, const std::vector<double>& x_grid,
                                  const RateOptions& opt = {})
{
    spec.validate();
    for (double x : x_grid)
        if (!(x >= -1.0 && x <= 1.0)) throw SpecError("speed grid must lie in [-1, 1]");
    const EnvironmentSpec inv = invert_spec(spec);
    RateCurve c;
    c.kind = RateKind::quenched_speed;
    c.seed = opt.analysis.lmgf.seed;
    c.meta = opt.known_analysis ? *opt.known_analysis : analyze_environment(spec, opt.analysis);
    const EnvironmentAnalysis inv_meta = analyze_environment(inv, opt.analysis);
    LmgfOptions o = opt.analysis.lmgf;
    o.lambda_crit.reset();
    auto f = full_evaluator(spec, o);
    auto finv = full_evaluator(inv, o);
    auto tstar = [](const EnvironmentAnalysis& a) -> std::optional<double> {
        if (std::isfinite(a.t_star)) return a.t_star;
        return std::nullopt;
    };
    auto point = [&](double x) {
        LegendreResult r;
        if (x == 0.0) {
            r.value = c.meta.lambda_crit.lambda_crit;
            r.argmax = c.meta.lambda_crit.lambda_crit;
            return r;
        }
        const bool pos = x > 0;
        const double t = 1.0 / std::abs(x);
        r = pos ? legendre_point(f, t, c.meta.lambda_crit.lambda_crit, spec.kappa, tstar(c.meta), opt.lambda_tol)
                : legendre_point(finv, t, inv_meta.lambda_crit.lambda_crit, spec.kappa, tstar(inv_meta),
                                 opt.lambda_tol);
        r.value *= std::abs(x);
        r.det_error *= std::abs(x);
        r.stat_error *= std::abs(x);
        return r;
    };
    for (double x : x_grid) c.push(x, point(x));
    const double i0 = c.meta.lambda_crit.lambda_crit;
    for (double x : {-0.02, 0.02}) {
        const double v = point(x).value;
        if (std::abs(v - i0) > 0.1 * std::max(1.0, i0))
            c.warnings.push_back("speed rate is not continuous at 0: I(" + std::to_string(x) +
                                 ") = " + std::to_string(v));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Averaged rates over product tilts of an i.i.d. finite-support law.
// ---------------------------------------------------------------------------

struct TiltedMeasure {
    std::vector<double> weights;
    double entropy = 0.0;

    static TiltedMeasure from_logits(const std::vector<double>& base, const std::vector<double>& theta)
    {
        TiltedMeasure m;
        const std::size_t s = base.size();
        double mx = -kInf;
        std::vector<double> lw(s);
        for (std::size_t i = 0; i < s; ++i) {
            lw[i] = std::log(base[i]) + theta[i];
            mx = std::max(mx, lw[i]);
        }
        double tot = 0.0;
        m.weights.resize(s);
        for (std::size_t i = 0; i < s; ++i) tot += (m.weights[i] = std::exp(lw[i] - mx));
        for (auto& w : m.weights) w /= tot;
        m.entropy = relative_entropy(m.weights, base);
        return m;
    }

    static double relative_entropy(const std::vector<double>& w, const std::vector<double>& base)
    {
        double h = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (w[i] > 0) h += w[i] * std::log(w[i] / base[i]);
        return std::max(0.0, h);
    }
};

inline EnvironmentSpec with_weights(const EnvironmentSpec& spec, const std::vector<double>& w)
{
    EnvironmentSpec out = spec;
    out.weights = w;
    return out;
}

inline EnvironmentSpec as_iid(const EnvironmentSpec& spec)
{
    if (spec.kind == SpecKind::iid_finite) return spec;
    if (spec.kind == SpecKind::periodic && spec.period() == 1) {
        EnvironmentSpec out = spec;
        out.kind = SpecKind::iid_finite;
        out.weights = {1.0};
        return out;
    }
    throw SpecError("averaged rates need an i.i.d. finite-support spec");
}

inline RateCurve averaged_rate_upper(const EnvironmentSpec& spec_in, const std::vector<double>& t_grid,
                                     const RateOptions& opt = {})
{
    const EnvironmentSpec spec = as_iid(spec_in);
    spec.validate();
    RateOptions base_opt = opt;
    base_opt.M.reset();
    RateCurve c = hitting_rate_curve(spec_in, t_grid, base_opt);
    c.kind = RateKind::averaged_hitting;
    const std::size_t s = spec.weights.size();
    c.tilts.assign(c.size(), spec.weights);
    c.dual = c.values;
    if (s == 1) return c;

    const double lc = c.meta.lambda_crit.lambda_crit;
    LmgfOptions o = opt.analysis.lmgf;
    o.lambda_crit.reset();
    auto tilted_J = [&](const TiltedMeasure& m, double t) {
        auto f = full_evaluator(with_weights(spec, m.weights), o);
        return legendre_point(f, t, lc, spec.kappa, std::nullopt, opt.lambda_tol);
    };

    std::vector<TiltedMeasure> candidates{TiltedMeasure{spec.weights, 0.0}};
    for (std::size_t g = 0; g < c.size(); ++g) {
        const double t = c.abscissae[g];
        if (t < 1.0) continue;
        std::vector<double> theta(s, 0.0);
        double best = c.values[g];
        double best_arg = c.argmax[g];
        std::vector<double> best_w = spec.weights;
        for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
            const double before = best;
            for (std::size_t i = 1; i < s; ++i) {
                auto obj = [&](double th) {
                    auto tt = theta;
                    tt[i] = th;
                    auto m = TiltedMeasure::from_logits(spec.weights, tt);
                    return tilted_J(m, t).value + m.entropy;
                };
                const double th = golden_max([&](double x) { return -obj(x); }, theta[i] - opt.tilt_span,
                                             theta[i] + opt.tilt_span, opt.tilt_tol);
                auto tt = theta;
                tt[i] = th;
                auto m = TiltedMeasure::from_logits(spec.weights, tt);
                auto r = tilted_J(m, t);
                const double v = r.value + m.entropy;
                if (v < best - 1e-12) {
                    best = v;
                    best_arg = r.argmax;
                    best_w = m.weights;
                    theta = tt;
                }
            }
            if (before - best < 1e-9) break;
        }
        c.values[g] = best;
        c.argmax[g] = best_arg;
        c.tilts[g] = best_w;
        if (best_w != spec.weights)
            candidates.push_back({best_w, TiltedMeasure::relative_entropy(best_w, spec.weights)});
    }

    // Lower bound on the averaged log-MGF from the same candidates; its
    // Legendre transform cannot exceed the upper bound.
    std::vector<LambdaEvaluator> evs;
    for (const auto& m : candidates) evs.push_back(full_evaluator(with_weights(spec, m.weights), o));
    LambdaEvaluator lower = [&](double lam) {
        EvalPoint best{-kInf, 0, 0};
        for (std::size_t i = 0; i < evs.size(); ++i) {
            auto e = evs[i](lam);
            if (e.value - candidates[i].entropy > best.value) best = {e.value - candidates[i].entropy, e.det_error, e.stat_error};
        }
        return best;
    };
    for (std::size_t g = 0; g < c.size(); ++g) {
        const double t = c.abscissae[g];
        c.dual[g] = t < 1.0 ? kInf : legendre_point(lower, t, lc, spec.kappa, std::nullopt, opt.lambda_tol).value;
    }
    return c;
}

inline RateCurve averaged_speed_upper(const EnvironmentSpec& spec, const std::vector<double>& x_grid,
                                      const RateOptions& opt = {})
{
    for (double x : x_grid)
        if (!(x >= -1.0 && x <= 1.0)) throw SpecError("speed grid must lie in [-1, 1]");
    std::vector<double> tpos, tneg;
    for (double x : x_grid) {
        if (x > 0) tpos.push_back(1.0 / x);
        if (x < 0) tneg.push_back(1.0 / -x);
    }
    RateCurve pos = averaged_rate_upper(spec, tpos, opt);
    RateCurve neg;
    if (!tneg.empty()) {
        RateOptions o2 = opt;
        o2.known_analysis.reset();
        neg = averaged_rate_upper(invert_spec(spec), tneg, o2);
    }
    RateCurve c;
    c.kind = RateKind::averaged_speed;
    c.meta = pos.meta;
    c.seed = pos.seed;
    std::size_t ip = 0, in = 0;
    for (double x : x_grid) {
        LegendreResult r;
        std::vector<double> w = as_iid(spec).weights;
        if (x == 0) {
            r.value = c.meta.lambda_crit.lambda_crit;
            r.argmax = r.value;
        } else {
            const RateCurve& src = x > 0 ? pos : neg;
            const std::size_t k = x > 0 ? ip++ : in++;
            r.value = std::abs(x) * src.values[k];
            r.argmax = src.argmax[k];
            r.det_error = std::abs(x) * src.det_error[k];
            r.stat_error = std::abs(x) * src.stat_error[k];
            w = src.tilts[k];
        }
        c.push(x, r);
        c.tilts.push_back(w);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Shape diagnostics.
// ---------------------------------------------------------------------------

// Largest excess of J(mid) over the chord through equally spaced neighbours,
// minus the allowed tolerance and error bars; <= 0 means convex.
inline double midpoint_convexity_excess(const RateCurve& c, double tol)
{
    double worst = -kInf;
    for (std::size_t i = 1; i + 1 < c.size(); ++i) {
        const double a = c.abscissae[i - 1], m = c.abscissae[i], b = c.abscissae[i + 1];
        if (!std::isfinite(c.values[i - 1]) || !std::isfinite(c.values[i + 1])) continue;
        const double chord = c.values[i - 1] + (c.values[i + 1] - c.values[i - 1]) * (m - a) / (b - a);
        const double err = c.det_error[i] + c.stat_error[i] + c.det_error[i - 1] + c.stat_error[i - 1] +
                           c.det_error[i + 1] + c.stat_error[i + 1];
        worst = std::max(worst, c.values[i] - chord - tol - err);
    }
    return worst;
}

inline std::vector<std::string> shape_warnings(const RateCurve& c)
{
    std::vector<std::string> w = c.warnings;
    if (midpoint_convexity_excess(c, 1e-6) > 0) w.push_back("curve fails the midpoint convexity test");
    for (std::size_t i = 0; i < c.size(); ++i)
        if (c.values[i] < -1e-12) {
            w.push_back("negative rate value at abscissa " + std::to_string(c.abscissae[i]));
            break;
        }
    if (c.kind == RateKind::quenched_hitting || c.kind == RateKind::averaged_hitting) {
        const double t0 = c.meta.t0;
        for (std::size_t i = 1; i < c.size(); ++i) {
            const double a = c.abscissae[i - 1], b = c.abscissae[i];
            if (a < 1.0) continue;
            const double dv = c.values[i] - c.values[i - 1];
            const double slack = 1e-9 + c.det_error[i] + c.stat_error[i];
            if ((b <= t0 && dv > slack) || (a >= t0 && dv < -slack)) {
                w.push_back("curve is not monotone on both sides of t0");
                break;
            }
        }
    }
    return w;
}

} // namespace stripldp
