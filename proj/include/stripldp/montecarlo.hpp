#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rates.hpp"

namespace stripldp {

// ---------------------------------------------------------------------------
// Trial runner: fixed-size chunks, results combined in chunk order so the
// answer does not depend on the thread count.
// ---------------------------------------------------------------------------

inline int default_threads()
{
    if (const char* s = std::getenv("STRIPLDP_THREADS")) {
        const int v = std::atoi(s);
        if (v > 0) return v;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline constexpr long long kChunkTrials = 4096;

template <class Acc, class F>
Acc run_chunks(long long trials, int threads, F&& chunk_fn)
{
    const long long chunks = (trials + kChunkTrials - 1) / kChunkTrials;
    std::vector<Acc> parts(static_cast<std::size_t>(chunks));
    std::atomic<long long> next{0};
    auto worker = [&] {
        for (long long c; (c = next.fetch_add(1)) < chunks;) {
            const long long b = c * kChunkTrials;
            parts[c] = chunk_fn(b, std::min(trials, b + kChunkTrials));
        }
    };
    threads = static_cast<int>(std::clamp<long long>(threads, 1, std::max(1LL, chunks)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    Acc total{};
    for (auto& p : parts) total += p;
    return total;
}

inline Rng trial_rng(std::uint64_t seed, long long trial)
{
    return Rng(derive_seed(seed, kStreamTrials, static_cast<std::uint64_t>(trial)));
}

inline std::uint64_t trial_environment_seed(std::uint64_t seed, long long trial)
{
    return derive_seed(seed, kStreamEnvironment, static_cast<std::uint64_t>(trial));
}

inline double uniform01(Rng& rng) { return unit_from_bits(rng()); }

// ---------------------------------------------------------------------------
// Walk simulation.
// ---------------------------------------------------------------------------

// Per support slice, per height: cumulative law of the 3d outcomes
// (left j | stay j | right j).
class StepTables {
public:
    explicit StepTables(const EnvironmentWindow& w) : d_(w.dim())
    {
        cdf_.reserve(w.support->size());
        for (const auto& s : *w.support) {
            std::vector<double> t(static_cast<std::size_t>(d_ * 3 * d_));
            for (int i = 0; i < d_; ++i) {
                double acc = 0.0;
                for (int o = 0; o < 3 * d_; ++o) {
                    const Matrix& m = o < d_ ? s.q : (o < 2 * d_ ? s.r : s.p);
                    acc += m(i, o % d_);
                    t[i * 3 * d_ + o] = acc;
                }
                t[i * 3 * d_ + 3 * d_ - 1] = std::numeric_limits<double>::infinity();
            }
            cdf_.push_back(std::move(t));
        }
    }

    int dim() const { return d_; }

    // Returns the level move (-1, 0, +1) and writes the new height.
    int draw(int support_index, int i, double u, int& j) const
    {
        const double* row = cdf_[support_index].data() + i * 3 * d_;
        int o = 0;
        while (u >= row[o]) ++o;
        j = o % d_;
        return o / d_ - 1;
    }

private:
    int d_;
    std::vector<std::vector<double>> cdf_;
};

inline int draw_start(const StartDistribution& start, Rng& rng)
{
    const double u = uniform01(rng);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < start.pi.size(); ++i) {
        acc += start.pi(i);
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(start.pi.size()) - 1;
}

struct WalkRecord {
    std::vector<long long> hitting_times; // T_1 .. T_k for the levels reached
    long long final_x = 0;
    int final_y = 0;
    long long steps = 0;
    bool completed = false; // reached the target level
    bool truncation_ok = true;
    int M = 0;
    std::uint64_t seed = 0;

    std::vector<long long> increments() const
    {
        std::vector<long long> out(hitting_times.size());
        long long prev = 0;
        for (std::size_t k = 0; k < hitting_times.size(); ++k) {
            out[k] = hitting_times[k] - prev;
            prev = hitting_times[k];
        }
        return out;
    }
};

// Runs the quenched chain from level 0 until level n is first hit or step_cap
// steps have been made.  The walk must stay inside the window.
inline WalkRecord simulate_walk(const EnvironmentWindow& w, const StepTables& tables, const StartDistribution& start,
                                int n, long long step_cap, Rng& rng, int M = 0)
{
    WalkRecord rec;
    rec.M = M;
    long long x = 0;
    int y = draw_start(start, rng);
    long long prev = 0;
    while (rec.steps < step_cap && static_cast<long long>(rec.hitting_times.size()) < n) {
        if (!w.contains(static_cast<int>(x)))
            throw BudgetError("walk left its environment window at level " + std::to_string(x) +
                              "; widen the window");
        int j;
        const int dx = tables.draw(w.support_index(static_cast<int>(x)), y, uniform01(rng), j);
        x += dx;
        y = j;
        ++rec.steps;
        if (x > static_cast<long long>(rec.hitting_times.size())) {
            rec.hitting_times.push_back(rec.steps);
            if (M > 0 && rec.steps - prev > M) rec.truncation_ok = false;
            prev = rec.steps;
        }
    }
    rec.completed = static_cast<long long>(rec.hitting_times.size()) >= n;
    rec.final_x = x;
    rec.final_y = y;
    return rec;
}

inline WalkRecord simulate_walk(const EnvironmentWindow& w, const StartDistribution& start, int n,
                                long long step_cap, std::uint64_t seed, int M = 0)
{
    start.validate(w.dim());
    StepTables tables(w);
    Rng rng(seed);
    WalkRecord rec = simulate_walk(w, tables, start, n, step_cap, rng, M);
    rec.seed = seed;
    return rec;
}

struct SpeedEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    long long replicas = 0;
    long long steps = 0;
};

// Mean of X_N / N over replicas, each in a fresh environment.
inline SpeedEstimate empirical_speed(const EnvironmentSpec& spec, long long steps, long long replicas,
                                     std::uint64_t seed, int threads = 1)
{
    spec.validate();
    if (steps < 1 || replicas < 2) throw SpecError("need at least one step and two replicas");
    struct Acc {
        double s = 0, s2 = 0;
        Acc& operator+=(const Acc& o) { s += o.s; s2 += o.s2; return *this; }
    };
    const auto start = StartDistribution::uniform(spec.d);
    const int span = static_cast<int>(steps) + 1;
    auto acc = run_chunks<Acc>(replicas, threads, [&](long long b, long long e) {
        Acc a;
        for (long long t = b; t < e; ++t) {
            auto w = sample_window(spec, -span, span, trial_environment_seed(seed, t));
            StepTables tab(w);
            Rng rng = trial_rng(seed, t);
            auto rec = simulate_walk(w, tab, start, std::numeric_limits<int>::max(), steps, rng);
            const double v = static_cast<double>(rec.final_x) / steps;
            a.s += v;
            a.s2 += v * v;
        }
        return a;
    });
    SpeedEstimate out;
    out.replicas = replicas;
    out.steps = steps;
    out.mean = acc.s / replicas;
    const double var = std::max(0.0, (acc.s2 - replicas * out.mean * out.mean) / (replicas - 1));
    out.std_error = std::sqrt(var / replicas);
    return out;
}

// ---------------------------------------------------------------------------
// Tail estimates.
// ---------------------------------------------------------------------------

struct TailEstimate {
    int n = 0;
    std::string event;
    std::string method = "direct";
    std::string mode = "averaged";
    double point = 0.0;               // -(1/n) log P
    std::array<double, 2> ci{0.0, 0.0}; // on the same scale
    double probability = 0.0;
    long long trials = 0;
    long long hits = 0;
    double ess = 0.0;
    double lambda = 0.0;
    int M = 0;
    bool one_sided = false;
    std::uint64_t seed = 0;
    std::optional<std::uint64_t> environment_seed;
    std::vector<std::string> warnings;
};

inline std::array<double, 2> wilson_interval(long long hits, long long trials, double z = 1.96)
{
    const double N = static_cast<double>(trials);
    const double ph = hits / N;
    const double den = 1.0 + z * z / N;
    const double centre = (ph + z * z / (2 * N)) / den;
    const double half = z * std::sqrt(ph * (1 - ph) / N + z * z / (4 * N * N)) / den;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

inline double rate_of(double prob, int n)
{
    return prob > 0 ? -std::log(prob) / n : kInf;
}

inline void fill_from_counts(TailEstimate& est, long long hits, long long trials)
{
    est.hits = hits;
    est.trials = trials;
    est.probability = static_cast<double>(hits) / trials;
    est.ess = static_cast<double>(trials);
    const auto wi = wilson_interval(hits, trials);
    if (hits == 0) {
        est.one_sided = true;
        est.point = rate_of(wi[1], est.n);
        est.ci = {est.point, kInf};
        est.warnings.push_back("no hits: point is a lower bound on the rate");
    } else {
        est.point = rate_of(est.probability, est.n);
        est.ci = {rate_of(wi[1], est.n), rate_of(wi[0], est.n)};
    }
}

enum class SimMode { averaged, quenched };

struct SimOptions {
    SimMode mode = SimMode::averaged;
    std::uint64_t environment_seed = 0; // quenched mode
    int threads = 1;
    long long step_budget = 0;          // 0 = unlimited
};

inline long long threshold_steps(int n, double t) { return static_cast<long long>(std::ceil(t * n - 1e-9)); }

// Direct estimate of P(T_n >= t n).
inline TailEstimate empirical_hitting_tail(const EnvironmentSpec& spec, int n, double t, long long trials,
                                           std::uint64_t seed, const SimOptions& opt = {})
{
    spec.validate();
    if (n < 1 || trials < 1) throw SpecError("need n >= 1 and trials >= 1");
    const long long m = threshold_steps(n, t);
    TailEstimate est;
    est.n = n;
    est.event = "T_n >= " + std::to_string(t) + " n";
    est.mode = opt.mode == SimMode::averaged ? "averaged" : "quenched";
    est.seed = seed;
    if (opt.step_budget > 0 && static_cast<double>(m) * trials > static_cast<double>(opt.step_budget))
        throw BudgetError("direct simulation would exceed the step budget");
    const auto start = StartDistribution::uniform(spec.d);
    // a walk making at most m - 1 steps never goes below -m
    const int lo = -static_cast<int>(m) - 1, hi = n + 1;
    std::optional<EnvironmentWindow> fixed;
    std::optional<StepTables> fixed_tab;
    if (opt.mode == SimMode::quenched) {
        fixed = sample_window(spec, lo, hi, opt.environment_seed);
        fixed_tab.emplace(*fixed);
        est.environment_seed = opt.environment_seed;
    }
    struct Acc {
        long long hits = 0;
        Acc& operator+=(const Acc& o) { hits += o.hits; return *this; }
    };
    auto acc = run_chunks<Acc>(trials, opt.threads, [&](long long b, long long e) {
        Acc a;
        for (long long tr = b; tr < e; ++tr) {
            Rng rng = trial_rng(seed, tr);
            bool hit;
            if (fixed) {
                hit = !simulate_walk(*fixed, *fixed_tab, start, n, m - 1, rng).completed;
            } else {
                auto w = sample_window(spec, lo, hi, trial_environment_seed(seed, tr));
                StepTables tab(w);
                hit = !simulate_walk(w, tab, start, n, m - 1, rng).completed;
            }
            a.hits += hit;
        }
        return a;
    });
    fill_from_counts(est, acc.hits, trials);
    return est;
}

// Direct estimate of P(X_N <= x N) (lower tail) or P(X_N >= x N).
inline TailEstimate empirical_speed_tail(const EnvironmentSpec& spec, int N, double x, bool lower_tail,
                                         long long trials, std::uint64_t seed, const SimOptions& opt = {})
{
    spec.validate();
    if (N < 1 || trials < 1) throw SpecError("need N >= 1 and trials >= 1");
    if (opt.step_budget > 0 && static_cast<double>(N) * trials > static_cast<double>(opt.step_budget))
        throw BudgetError("direct simulation would exceed the step budget");
    TailEstimate est;
    est.n = N;
    est.event = std::string("X_n ") + (lower_tail ? "<= " : ">= ") + std::to_string(x) + " n";
    est.mode = opt.mode == SimMode::averaged ? "averaged" : "quenched";
    est.seed = seed;
    const auto start = StartDistribution::uniform(spec.d);
    std::optional<EnvironmentWindow> fixed;
    std::optional<StepTables> fixed_tab;
    if (opt.mode == SimMode::quenched) {
        fixed = sample_window(spec, -N - 1, N + 1, opt.environment_seed);
        fixed_tab.emplace(*fixed);
        est.environment_seed = opt.environment_seed;
    }
    const double thr = x * N;
    struct Acc {
        long long hits = 0;
        Acc& operator+=(const Acc& o) { hits += o.hits; return *this; }
    };
    auto acc = run_chunks<Acc>(trials, opt.threads, [&](long long b, long long e) {
        Acc a;
        for (long long tr = b; tr < e; ++tr) {
            Rng rng = trial_rng(seed, tr);
            WalkRecord r;
            if (fixed) {
                r = simulate_walk(*fixed, *fixed_tab, start, std::numeric_limits<int>::max(), N, rng);
            } else {
                auto w = sample_window(spec, -N - 1, N + 1, trial_environment_seed(seed, tr));
                StepTables tab(w);
                r = simulate_walk(w, tab, start, std::numeric_limits<int>::max(), N, rng);
            }
            a.hits += lower_tail ? (r.final_x <= thr + 1e-9) : (r.final_x >= thr - 1e-9);
        }
        return a;
    });
    fill_from_counts(est, acc.hits, trials);
    return est;
}

// ---------------------------------------------------------------------------
// Excursion-tilted sampling.  Level by level, the excursion (length s, exit
// height j) from height i is drawn with probability proportional to
// e^{lambda s} H_k(s)[i, j] w_{k+1}[j], where w_k = Phi_{k,M} ... Phi_{n-1,M} 1.
// The likelihood ratio of a completed path is Z e^{-lambda T_n} with
// Z = pi Phi_{0,M} ... Phi_{n-1,M} 1.
// ---------------------------------------------------------------------------

class TiltedSampler {
public:
    TiltedSampler(const EnvironmentWindow& w, const StartDistribution& start, int n, int M, double lambda)
        : n_(n), M_(M), d_(w.dim()), lambda_(lambda)
    {
        start.validate(d_);
        if (n < 1 || M < 1) throw SpecError("tilted sampler needs n >= 1 and M >= 1");
        if (lambda * std::max(1, M - 1) > 690.0) throw NumericalError("tilt too large for the excursion cap");
        std::vector<Matrix> E(static_cast<std::size_t>(M)); // e^{lambda s} H_k(s), s = 1..M
        Vector wnext = Vector::Ones(d_);
        double log_scale = 0.0;
        cdf_.assign(static_cast<std::size_t>(n), {});
        const bool periodic_cache = !w.seed.has_value() && !w.bounded_jump;
        std::vector<std::pair<int, HittingDistribution>> cache;
        for (int k = n - 1; k >= 0; --k) {
            const HittingDistribution* hd = nullptr;
            std::optional<HittingDistribution> local;
            if (periodic_cache) {
                const int key = w.support_index(k);
                for (auto& [kk, h] : cache)
                    if (kk == key && same_history(w, k, h.level, M)) hd = &h;
                if (!hd) {
                    cache.emplace_back(key, hitting_distribution(w, k, M));
                    hd = &cache.back().second;
                }
            } else {
                local = hitting_distribution(w, k, M);
                hd = &*local;
            }
            for (int s = 1; s <= M; ++s) E[s - 1] = std::exp(lambda * s) * hd->H[s - 1];
            Matrix phi = Matrix::Zero(d_, d_);
            for (const auto& e : E) phi += e;
            Vector wk = phi * wnext;
            auto& table = cdf_[k];
            table.assign(static_cast<std::size_t>(d_ * M * d_), 0.0);
            for (int i = 0; i < d_; ++i) {
                double acc = 0.0;
                for (int s = 1; s <= M; ++s)
                    for (int j = 0; j < d_; ++j) {
                        if (wk(i) > 0) acc += E[s - 1](i, j) * wnext(j) / wk(i);
                        table[(i * M + (s - 1)) * d_ + j] = acc;
                    }
            }
            const double norm = wk.sum();
            if (!(norm > 0)) throw NumericalError("no excursion of length <= M exists at level " + std::to_string(k));
            log_scale += std::log(norm);
            wnext = wk / norm;
        }
        Vector sw = start.pi.cwiseProduct(wnext);
        const double z = sw.sum();
        if (!(z > 0)) throw NumericalError("tilted measure has zero mass");
        log_z_ = log_scale + std::log(z);
        start_cdf_.resize(d_);
        double acc = 0.0;
        for (int i = 0; i < d_; ++i) start_cdf_[i] = (acc += sw(i) / z);
    }

    struct Sample {
        long long T = 0;
        double log_weight = 0.0; // log of dP/dQ on {all excursions <= M}
    };

    Sample sample(Rng& rng) const
    {
        int i = pick(start_cdf_.data(), d_, uniform01(rng));
        long long T = 0;
        for (int k = 0; k < n_; ++k) {
            const double* row = cdf_[k].data() + static_cast<std::size_t>(i) * M_ * d_;
            const int o = pick(row, M_ * d_, uniform01(rng));
            T += o / d_ + 1;
            i = o % d_;
        }
        return {T, log_z_ - lambda_ * T};
    }

    double log_normalizer() const { return log_z_; }
    double lambda() const { return lambda_; }
    int n() const { return n_; }
    int M() const { return M_; }

private:
    static int pick(const double* cdf, int len, double u)
    {
        u *= cdf[len - 1];
        int lo = 0, hi = len - 1;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (u < cdf[mid]) hi = mid;
            else lo = mid + 1;
        }
        return lo;
    }

    // Periodic windows: H_k depends on the slices at levels (k - M, k].
    static bool same_history(const EnvironmentWindow& w, int k, int k2, int M)
    {
        for (int s = 0; s < M; ++s)
            if (w.support_index(k - s) != w.support_index(k2 - s)) return false;
        return true;
    }

    int n_, M_, d_;
    double lambda_;
    double log_z_ = 0.0;
    std::vector<std::vector<double>> cdf_;
    std::vector<double> start_cdf_;
};

// Importance-sampled estimate of P(T_n >= t n, all excursions <= M), tilted at
// lambda_{t,M}.  Quenched in the environment drawn from environment_seed.
inline TailEstimate importance_sample_hitting(const EnvironmentSpec& spec, int n, double t, int M, long long trials,
                                              std::uint64_t seed, const SimOptions& opt = {},
                                              int model_levels = 4096)
{
    spec.validate();
    if (!(t > 1.0)) throw SpecError("importance sampling needs t > 1");
    if (!(M > t + 2.0)) throw SpecError("importance sampling needs M > t + 2");
    if (spec.d > 1 && M < n_kappa(spec.kappa)) throw SpecError("importance sampling needs M >= N_kappa");
    if (n < 1 || trials < 2) throw SpecError("need n >= 1 and trials >= 2");
    TruncatedModel tm(spec, M, model_levels, opt.environment_seed);
    const double lam = truncated_tilt(tm, t, spec.kappa);
    auto w = sample_window(spec, -M - 1, n + 1, opt.environment_seed);
    TiltedSampler sampler(w, StartDistribution::uniform(spec.d), n, M, lam);
    const long long m = threshold_steps(n, t);
    const double t_ref = lam >= 0 ? static_cast<double>(m) : static_cast<double>(n) * M;

    struct Acc {
        double s = 0, s2 = 0;
        long long hits = 0;
        Acc& operator+=(const Acc& o) { s += o.s; s2 += o.s2; hits += o.hits; return *this; }
    };
    auto acc = run_chunks<Acc>(trials, opt.threads, [&](long long b, long long e) {
        Acc a;
        for (long long tr = b; tr < e; ++tr) {
            Rng rng = trial_rng(seed, tr);
            const auto smp = sampler.sample(rng);
            if (smp.T < m) continue;
            const double r = std::exp(-lam * (smp.T - t_ref));
            a.s += r;
            a.s2 += r * r;
            ++a.hits;
        }
        return a;
    });

    TailEstimate est;
    est.n = n;
    est.event = "T_n >= " + std::to_string(t) + " n, excursions <= " + std::to_string(M);
    est.method = "importance-sampled";
    est.mode = "quenched";
    est.environment_seed = opt.environment_seed;
    est.lambda = lam;
    est.M = M;
    est.seed = seed;
    est.trials = trials;
    est.hits = acc.hits;
    const double N = static_cast<double>(trials);
    const double shift = sampler.log_normalizer() - lam * t_ref;
    if (acc.hits == 0) {
        est.one_sided = true;
        est.point = kInf;
        est.ci = {kInf, kInf};
        est.warnings.push_back("no tilted sample reached the event");
        return est;
    }
    const double mean = acc.s / N;
    const double var = std::max(0.0, (acc.s2 / N - mean * mean) * N / (N - 1));
    const double se = std::sqrt(var / N);
    est.probability = std::exp(shift + std::log(mean));
    est.point = -(shift + std::log(mean)) / n;
    const double rel = 1.96 * se / mean;
    est.ci = {-(shift + std::log(mean) + std::log1p(rel)) / n,
              rel < 1 ? -(shift + std::log(mean) + std::log1p(-rel)) / n : kInf};
    est.ess = acc.s * acc.s / acc.s2;
    if (est.ess < 100) est.warnings.push_back("effective sample size below 100");
    return est;
}

// ---------------------------------------------------------------------------
// Slowdown: P(inf_{m >= n} X_m <= 0), the infimum taken up to a finite horizon.
// ---------------------------------------------------------------------------

enum class SlowdownMethod { exact, direct };

struct SlowdownOptions {
    SlowdownMethod method = SlowdownMethod::exact;
    std::uint64_t environment_seed = 0;
    int threads = 1;
    std::optional<Regime> known_regime;
    AnalysisOptions analysis;
};

// Forward evolution of the quenched law with absorption at X <= 0 for steps in
// [n, horizon].
inline double slowdown_exact(const EnvironmentWindow& w, const StartDistribution& start, int n, long long horizon)
{
    const int d = w.dim();
    const int lo = -n;
    const long long hi_ll = horizon + 1;
    if (!w.contains(lo) || !w.contains(static_cast<int>(hi_ll))) throw BudgetError("window too small for the horizon");
    const int width = static_cast<int>(hi_ll - lo + 1);
    std::vector<double> cur(static_cast<std::size_t>(width) * d, 0.0), nxt(cur.size());
    auto at = [&](std::vector<double>& v, int x, int i) -> double& { return v[static_cast<std::size_t>(x - lo) * d + i]; };
    for (int i = 0; i < d; ++i) at(cur, 0, i) = start.pi(i);
    int xmin = 0, xmax = 0;
    double absorbed = 0.0;
    for (long long m = 0; m <= horizon; ++m) {
        if (m >= n) {
            for (int x = xmin; x <= std::min(0, xmax); ++x)
                for (int i = 0; i < d; ++i) {
                    absorbed += at(cur, x, i);
                    at(cur, x, i) = 0.0;
                }
            xmin = std::max(xmin, 1);
        }
        if (m == horizon || xmin > xmax) break;
        for (int x = xmin - 1; x <= xmax + 1; ++x)
            for (int i = 0; i < d; ++i) at(nxt, x, i) = 0.0;
        for (int x = xmin; x <= xmax; ++x) {
            const auto& s = w.at(x);
            for (int i = 0; i < d; ++i) {
                const double mass = at(cur, x, i);
                if (mass == 0.0) continue;
                for (int j = 0; j < d; ++j) {
                    at(nxt, x - 1, j) += mass * s.q(i, j);
                    at(nxt, x, j) += mass * s.r(i, j);
                    at(nxt, x + 1, j) += mass * s.p(i, j);
                }
            }
        }
        --xmin;
        ++xmax;
        std::swap(cur, nxt);
    }
    return absorbed;
}

inline TailEstimate slowdown_probability(const EnvironmentSpec& spec, int n, long long trials, double horizon_factor,
                                         std::uint64_t seed, const SlowdownOptions& opt = {})
{
    spec.validate();
    if (n < 1 || !(horizon_factor >= 1.0)) throw SpecError("need n >= 1 and horizon_factor >= 1");
    const Regime regime = opt.known_regime ? *opt.known_regime : analyze_environment(spec, opt.analysis).regime;
    if (regime != Regime::transient_right)
        throw SpecError(std::string("slowdown probabilities need a right-transient spec; regime is ") +
                        to_string(regime));
    const long long horizon = static_cast<long long>(std::ceil(horizon_factor * n));
    auto w = sample_window(spec, -n - 1, static_cast<int>(horizon) + 2, opt.environment_seed);
    const auto start = StartDistribution::uniform(spec.d);
    TailEstimate est;
    est.n = n;
    est.event = "inf_{n <= m <= " + std::to_string(horizon) + "} X_m <= 0";
    est.mode = "quenched";
    est.environment_seed = opt.environment_seed;
    est.seed = seed;
    if (opt.method == SlowdownMethod::exact) {
        const double p = slowdown_exact(w, start, n, horizon);
        est.method = "exact";
        est.probability = p;
        est.point = rate_of(p, n);
        est.ci = {est.point, est.point};
        return est;
    }
    if (trials < 1) throw SpecError("need trials >= 1");
    StepTables tab(w);
    struct Acc {
        long long hits = 0;
        Acc& operator+=(const Acc& o) { hits += o.hits; return *this; }
    };
    auto acc = run_chunks<Acc>(trials, opt.threads, [&](long long b, long long e) {
        Acc a;
        for (long long tr = b; tr < e; ++tr) {
            Rng rng = trial_rng(seed, tr);
            long long x = 0;
            int y = draw_start(start, rng);
            for (long long m = 0;; ++m) {
                if (m >= n && x <= 0) {
                    ++a.hits;
                    break;
                }
                if (m == horizon) break;
                int j;
                x += tab.draw(w.support_index(static_cast<int>(x)), y, uniform01(rng), j);
                y = j;
            }
        }
        return a;
    });
    est.method = "direct";
    fill_from_counts(est, acc.hits, trials);
    return est;
}

} // namespace stripldp
