#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "seeding.hpp"

namespace stripldp {

inline constexpr double kStochasticTol = 1e-12;
inline constexpr int kMaxDim = 64;

// One level of the strip: left, stay and right transition blocks.
struct EnvironmentSlice {
    Matrix q, r, p;

    int dim() const { return static_cast<int>(q.rows()); }
    bool operator==(const EnvironmentSlice& o) const
    {
        return q.rows() == o.q.rows() && q == o.q && r == o.r && p == o.p;
    }
};

inline void check_slice(const EnvironmentSlice& s)
{
    const auto d = s.q.rows();
    if (d < 1 || d > kMaxDim) throw SpecError("slice dimension must be in [1, 64]");
    for (const Matrix* m : {&s.q, &s.r, &s.p}) {
        if (m->rows() != d || m->cols() != d) throw SpecError("q, r, p must be square with equal size");
        if (!m->allFinite() || m->minCoeff() < 0.0 || m->maxCoeff() > 1.0)
            throw SpecError("transition entries must lie in [0, 1]");
    }
    for (Eigen::Index i = 0; i < d; ++i) {
        const double row = s.q.row(i).sum() + s.r.row(i).sum() + s.p.row(i).sum();
        if (std::abs(row - 1.0) > kStochasticTol) {
            std::ostringstream os;
            os << "row " << i << " of q+r+p sums to " << row << ", not 1";
            throw SpecError(os.str());
        }
    }
}

inline EnvironmentSlice make_slice(Matrix q, Matrix r, Matrix p)
{
    EnvironmentSlice s{std::move(q), std::move(r), std::move(p)};
    check_slice(s);
    return s;
}

inline EnvironmentSlice scalar_slice(double q, double r, double p)
{
    return make_slice(Matrix::Constant(1, 1, q), Matrix::Constant(1, 1, r), Matrix::Constant(1, 1, p));
}

inline EnvironmentSlice swap_sides(const EnvironmentSlice& s) { return {s.p, s.r, s.q}; }

inline int n_kappa(double kappa)
{
    return static_cast<int>(std::ceil(std::log(kappa / 2.0) / std::log(1.0 - 2.0 * kappa)));
}

struct EllipticityReport {
    bool left_step = false;   // every row of q sums to >= kappa
    bool right_step = false;  // every row of p sums to >= kappa
    bool left_exit = false;   // (I-r)^{-1} q >= kappa entrywise
    bool right_exit = false;  // (I-r)^{-1} p >= kappa entrywise
    bool singular = false;
    int n_kappa = 0;
    double min_left_step = 0, min_right_step = 0, min_left_exit = 0, min_right_exit = 0;
    std::string diagnostic;

    bool passed() const { return !singular && left_step && right_step && left_exit && right_exit; }
    // Largest kappa at which this slice would pass.
    double constant() const
    {
        if (singular) return 0.0;
        return std::min({min_left_step, min_right_step, min_left_exit, min_right_exit});
    }
};

inline EllipticityReport validate_ellipticity(const EnvironmentSlice& s, double kappa)
{
    if (!(kappa > 0.0 && kappa < 0.5)) throw SpecError("kappa must lie in (0, 1/2)");
    check_slice(s);
    EllipticityReport rep;
    rep.n_kappa = n_kappa(kappa);
    rep.min_left_step = s.q.rowwise().sum().minCoeff();
    rep.min_right_step = s.p.rowwise().sum().minCoeff();
    rep.left_step = rep.min_left_step >= kappa;
    rep.right_step = rep.min_right_step >= kappa;

    const auto d = s.q.rows();
    Matrix I_r = Matrix::Identity(d, d) - s.r;
    Eigen::FullPivLU<Matrix> lu(I_r);
    Matrix eq = lu.solve(s.q);
    Matrix ep = lu.solve(s.p);
    const double res = std::max((I_r * eq - s.q).cwiseAbs().maxCoeff(), (I_r * ep - s.p).cwiseAbs().maxCoeff());
    if (!lu.isInvertible() || !(res <= 1e-10) || !eq.allFinite() || !ep.allFinite()) {
        rep.singular = true;
        rep.diagnostic = "I - r is singular: the walk can be trapped inside one level";
        return rep;
    }
    rep.min_left_exit = eq.minCoeff();
    rep.min_right_exit = ep.minCoeff();
    rep.left_exit = rep.min_left_exit >= kappa;
    rep.right_exit = rep.min_right_exit >= kappa;

    std::ostringstream os;
    if (!rep.left_step) os << "row sum of q below kappa (" << rep.min_left_step << "); ";
    if (!rep.right_step) os << "row sum of p below kappa (" << rep.min_right_step << "); ";
    if (!rep.left_exit) os << "(I-r)^-1 q has entry " << rep.min_left_exit << " below kappa; ";
    if (!rep.right_exit) os << "(I-r)^-1 p has entry " << rep.min_right_exit << " below kappa; ";
    rep.diagnostic = os.str();
    return rep;
}

struct StartDistribution {
    Vector pi;

    static StartDistribution uniform(int d) { return {Vector::Constant(d, 1.0 / d)}; }
    static StartDistribution point(int d, int i)
    {
        Vector v = Vector::Zero(d);
        v(i) = 1.0;
        return {v};
    }
    void validate(int d) const
    {
        if (pi.size() != d) throw SpecError("start distribution has wrong dimension");
        if (pi.minCoeff() < 0.0 || std::abs(pi.sum() - 1.0) > kStochasticTol)
            throw SpecError("start distribution must be a probability vector");
    }
};

enum class SpecKind { periodic, iid_finite, iid_parametric };

inline const char* to_string(SpecKind k)
{
    switch (k) {
    case SpecKind::periodic: return "periodic";
    case SpecKind::iid_finite: return "iid";
    case SpecKind::iid_parametric: return "iid-parametric";
    }
    return "?";
}

struct BoundedJumpInfo {
    int L = 0, R = 0;
    std::vector<std::vector<double>> kernels; // per site within one period, indexed z+L
};

// Generative law of the environment.  Periodic specs place slices[k mod P] at
// level k; i.i.d. specs draw each level independently.
struct EnvironmentSpec {
    SpecKind kind = SpecKind::periodic;
    int d = 1;
    double kappa = 0.25;
    std::vector<EnvironmentSlice> slices;
    std::vector<double> weights;
    std::function<EnvironmentSlice(Rng&)> sampler; // iid_parametric only
    std::string sampler_name;
    std::optional<BoundedJumpInfo> bounded_jump;

    int period() const { return static_cast<int>(slices.size()); }
    int support_size() const { return static_cast<int>(slices.size()); }
    bool is_point_mass() const
    {
        return kind != SpecKind::iid_parametric && slices.size() == 1;
    }

    void validate() const
    {
        if (!(kappa > 0.0 && kappa < 0.5)) throw SpecError("kappa must lie in (0, 1/2)");
        if (kind == SpecKind::iid_parametric) {
            if (!sampler) throw SpecError("parametric spec needs a sampler");
            return;
        }
        if (slices.empty()) throw SpecError("spec needs at least one slice");
        for (const auto& s : slices) {
            if (s.dim() != d) throw SpecError("slice dimension differs from d");
            check_slice(s);
        }
        if (kind == SpecKind::iid_finite) {
            if (weights.size() != slices.size()) throw SpecError("one weight per support slice required");
            double tot = 0.0;
            for (double w : weights) {
                if (!(w > 0.0)) throw SpecError("support weights must be positive");
                tot += w;
            }
            if (std::abs(tot - 1.0) > kStochasticTol) throw SpecError("support weights must sum to 1");
        }
        if (bounded_jump && bounded_jump->L != bounded_jump->R) return;
        for (std::size_t i = 0; i < slices.size(); ++i) {
            auto rep = validate_ellipticity(slices[i], kappa);
            if (!rep.passed())
                throw SpecError("slice " + std::to_string(i) + " fails ellipticity: " + rep.diagnostic);
        }
    }

    static EnvironmentSpec periodic(std::vector<EnvironmentSlice> s, double kappa)
    {
        EnvironmentSpec sp;
        sp.kind = SpecKind::periodic;
        sp.d = s.empty() ? 0 : s.front().dim();
        sp.kappa = kappa;
        sp.slices = std::move(s);
        sp.validate();
        return sp;
    }
    static EnvironmentSpec iid(std::vector<EnvironmentSlice> s, std::vector<double> w, double kappa)
    {
        EnvironmentSpec sp;
        sp.kind = SpecKind::iid_finite;
        sp.d = s.empty() ? 0 : s.front().dim();
        sp.kappa = kappa;
        sp.slices = std::move(s);
        sp.weights = std::move(w);
        sp.validate();
        return sp;
    }
    static EnvironmentSpec parametric(int d, double kappa, std::function<EnvironmentSlice(Rng&)> f,
                                      std::string name = "custom")
    {
        EnvironmentSpec sp;
        sp.kind = SpecKind::iid_parametric;
        sp.d = d;
        sp.kappa = kappa;
        sp.sampler = std::move(f);
        sp.sampler_name = std::move(name);
        sp.validate();
        return sp;
    }
};

inline EnvironmentSpec homogeneous_spec(double p, double kappa = -1.0)
{
    const double q = 1.0 - p;
    if (kappa < 0) kappa = std::min({p, q, 0.49});
    return EnvironmentSpec::periodic({scalar_slice(q, 0.0, p)}, kappa);
}

// Finite realization of an environment over levels [lo, hi).  Slices are held
// by index into a shared support so long windows stay cheap.
struct EnvironmentWindow {
    int lo = 0, hi = 0;
    std::optional<std::uint64_t> seed;
    std::shared_ptr<const std::vector<EnvironmentSlice>> support;
    std::vector<int> index;
    double kappa = 0.25;
    bool bounded_jump = false;

    int size() const { return hi - lo; }
    int dim() const { return support->front().dim(); }
    bool contains(int k) const { return k >= lo && k < hi; }
    const EnvironmentSlice& at(int k) const { return (*support)[index[k - lo]]; }
    int support_index(int k) const { return index[k - lo]; }

    bool operator==(const EnvironmentWindow& o) const
    {
        if (lo != o.lo || hi != o.hi) return false;
        for (int k = lo; k < hi; ++k)
            if (!(at(k) == o.at(k))) return false;
        return true;
    }
};

inline int floor_mod(long long a, int m)
{
    long long r = a % m;
    return static_cast<int>(r < 0 ? r + m : r);
}

// Uniform variate attached to (seed, level): any two windows sampled with the
// same seed agree on their common levels.
inline double level_uniform(std::uint64_t seed, int level)
{
    return unit_from_bits(derive_seed(seed, kStreamLevels, static_cast<std::uint64_t>(static_cast<std::int64_t>(level))));
}

inline int pick_index(const std::vector<double>& cdf, double u)
{
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    int i = static_cast<int>(it - cdf.begin());
    return std::min(i, static_cast<int>(cdf.size()) - 1);
}

inline std::vector<double> cumulative(const std::vector<double>& w)
{
    std::vector<double> c(w.size());
    std::partial_sum(w.begin(), w.end(), c.begin());
    if (!c.empty()) c.back() = 1.0;
    return c;
}

// Support indices for levels [lo, hi) drawn with the given weights.  The same
// uniforms are used for every weight vector, so tilted windows stay coupled.
inline std::vector<int> sample_indices(const std::vector<double>& weights, int lo, int hi, std::uint64_t seed)
{
    auto cdf = cumulative(weights);
    std::vector<int> idx(hi - lo);
    for (int k = lo; k < hi; ++k) idx[k - lo] = pick_index(cdf, level_uniform(seed, k));
    return idx;
}

inline EnvironmentWindow sample_window(const EnvironmentSpec& spec, int lo, int hi, std::uint64_t seed,
                                       const std::vector<double>* tilt = nullptr)
{
    if (!(lo < hi)) throw SpecError("window needs lo < hi");
    EnvironmentWindow w;
    w.lo = lo;
    w.hi = hi;
    w.kappa = spec.kappa;
    w.bounded_jump = spec.bounded_jump.has_value();
    switch (spec.kind) {
    case SpecKind::periodic: {
        w.support = std::make_shared<const std::vector<EnvironmentSlice>>(spec.slices);
        w.index.resize(hi - lo);
        for (int k = lo; k < hi; ++k) w.index[k - lo] = floor_mod(k, spec.period());
        break;
    }
    case SpecKind::iid_finite: {
        w.seed = seed;
        w.support = std::make_shared<const std::vector<EnvironmentSlice>>(spec.slices);
        w.index = sample_indices(tilt ? *tilt : spec.weights, lo, hi, seed);
        break;
    }
    case SpecKind::iid_parametric: {
        w.seed = seed;
        auto sup = std::make_shared<std::vector<EnvironmentSlice>>();
        sup->reserve(hi - lo);
        w.index.resize(hi - lo);
        for (int k = lo; k < hi; ++k) {
            Rng rng(derive_seed(seed, kStreamLevels, static_cast<std::uint64_t>(static_cast<std::int64_t>(k))));
            EnvironmentSlice s = spec.sampler(rng);
            check_slice(s);
            w.index[k - lo] = static_cast<int>(sup->size());
            sup->push_back(std::move(s));
        }
        w.support = std::move(sup);
        break;
    }
    }
    return w;
}

// Reflect through level 0: level m of the result carries the slice of level -m
// with q and p exchanged.  [lo, hi) maps to (-hi, -lo].
inline EnvironmentWindow invert_window(const EnvironmentWindow& w)
{
    EnvironmentWindow out;
    out.lo = -w.hi + 1;
    out.hi = -w.lo + 1;
    out.seed = w.seed;
    out.kappa = w.kappa;
    out.bounded_jump = w.bounded_jump;
    auto sup = std::make_shared<std::vector<EnvironmentSlice>>();
    sup->reserve(w.support->size());
    for (const auto& s : *w.support) sup->push_back(swap_sides(s));
    out.support = std::move(sup);
    out.index.resize(w.index.size());
    for (int m = out.lo; m < out.hi; ++m) out.index[m - out.lo] = w.support_index(-m);
    return out;
}

inline EnvironmentSpec invert_spec(const EnvironmentSpec& spec)
{
    EnvironmentSpec out = spec;
    switch (spec.kind) {
    case SpecKind::periodic: {
        const int P = spec.period();
        for (int m = 0; m < P; ++m) out.slices[m] = swap_sides(spec.slices[floor_mod(-m, P)]);
        break;
    }
    case SpecKind::iid_finite:
        for (auto& s : out.slices) s = swap_sides(s);
        break;
    case SpecKind::iid_parametric: {
        auto f = spec.sampler;
        out.sampler = [f](Rng& rng) { return swap_sides(f(rng)); };
        out.sampler_name = spec.sampler_name + ":inverted";
        break;
    }
    }
    if (out.bounded_jump) {
        std::swap(out.bounded_jump->L, out.bounded_jump->R);
        out.bounded_jump->kernels.clear();
    }
    return out;
}

// Window exported as a periodic spec with one slice per level, so it can be
// reloaded and reproduced exactly.
inline EnvironmentSpec window_as_spec(const EnvironmentWindow& w)
{
    EnvironmentSpec sp;
    sp.kind = SpecKind::periodic;
    sp.d = w.dim();
    sp.kappa = w.kappa;
    const int n = w.size();
    sp.slices.resize(n);
    // slice for level k sits at position k mod n
    for (int k = w.lo; k < w.hi; ++k) sp.slices[floor_mod(k, n)] = w.at(k);
    return sp;
}

struct EmbeddingReport {
    int d = 0;
    bool appendix_pattern = false; // L > R zero pattern present
    std::string warning;
};

// Bounded-jump walk on Z with steps in [-L, R] as a strip walk of width
// d = max(L, R): site x = k d + (i - 1) becomes level k, height i.
// `kernels` holds one kernel per site of a spatial period (a multiple of d
// sites, or a single kernel for a homogeneous walk), each indexed by z + L.
inline EnvironmentSpec embed_bounded_jump(std::vector<std::vector<double>> kernels, int L, int R, double kappa,
                                          EmbeddingReport* report = nullptr)
{
    if (L < 1 || R < 1) throw SpecError("bounded-jump walk needs L >= 1 and R >= 1");
    if (kernels.empty()) throw SpecError("bounded-jump spec needs a kernel");
    const int d = std::max(L, R);
    for (const auto& ker : kernels) {
        if (static_cast<int>(ker.size()) != L + R + 1) throw SpecError("kernel must list L + R + 1 probabilities");
        double tot = 0.0;
        for (double v : ker) {
            if (!(v >= 0.0 && v <= 1.0)) throw SpecError("kernel entries must lie in [0, 1]");
            tot += v;
        }
        if (std::abs(tot - 1.0) > kStochasticTol) throw SpecError("kernel must sum to 1");
        for (int z = -L; z <= R; ++z)
            if (z != 0 && ker[z + L] < kappa)
                throw SpecError("kernel probability of step " + std::to_string(z) + " is below kappa");
    }
    if (kernels.size() == 1) kernels.assign(d, kernels.front());
    if (kernels.size() % d != 0) throw SpecError("per-site kernels must cover whole levels");
    const int levels = static_cast<int>(kernels.size()) / d;

    std::vector<EnvironmentSlice> slices;
    for (int k = 0; k < levels; ++k) {
        Matrix q = Matrix::Zero(d, d), r = Matrix::Zero(d, d), p = Matrix::Zero(d, d);
        for (int i = 0; i < d; ++i) {
            const auto& ker = kernels[k * d + i];
            const int x = i; // offset within the level
            for (int z = -L; z <= R; ++z) {
                const double w = ker[z + L];
                if (w == 0.0) continue;
                const int y = x + z;
                const int dk = (y >= 0) ? y / d : -((-y + d - 1) / d);
                const int j = y - dk * d;
                if (dk == -1) q(i, j) += w;
                else if (dk == 0) r(i, j) += w;
                else p(i, j) += w;
            }
        }
        slices.push_back(make_slice(q, r, p));
    }

    EnvironmentSpec sp;
    sp.kind = SpecKind::periodic;
    sp.d = d;
    sp.slices = std::move(slices);
    sp.bounded_jump = BoundedJumpInfo{L, R, kernels};
    EmbeddingReport rep;
    rep.d = d;
    if (L == R) {
        // Strip ellipticity may hold only at a smaller constant than the kernel bound.
        double c = kappa;
        for (const auto& s : sp.slices) c = std::min(c, validate_ellipticity(s, std::min(kappa, 0.49)).constant());
        if (!(c > 0.0)) throw SpecError("embedded slices are not elliptic");
        sp.kappa = c;
    } else {
        sp.kappa = kappa;
        rep.appendix_pattern = L > R;
        rep.warning = "jump range is asymmetric (L != R): strip slices have zero rows/columns and fail "
                      "strip ellipticity; use block-reduced products";
    }
    sp.validate();
    if (report) *report = rep;
    return sp;
}

} // namespace stripldp
