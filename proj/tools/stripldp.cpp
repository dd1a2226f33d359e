// stripldp command-line driver: analyze, rate, simulate, convert-bounded-jump.

#include <chrono>
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include <stripldp/stripldp.hpp>

using namespace stripldp;

namespace {

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 2, kNumerical = 3, kBudget = 4 };

std::vector<double> parse_grid(const std::string& g)
{
    std::vector<double> parts;
    std::stringstream ss(g);
    std::string tok;
    while (std::getline(ss, tok, ':')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw SpecError("--grid: cannot read number '" + tok + "'");
        }
    }
    if (parts.size() == 1) return parts;
    if (parts.size() != 3) throw SpecError("--grid expects A:STEP:B");
    const double a = parts[0], step = parts[1], b = parts[2];
    if (!(step > 0) || b < a) throw SpecError("--grid needs STEP > 0 and A <= B");
    const long long count = std::llround(std::floor((b - a) / step + 1e-9)) + 1;
    if (count > 100000) throw SpecError("--grid has too many points");
    std::vector<double> out;
    for (long long i = 0; i < count; ++i) out.push_back(a + i * step);
    return out;
}

struct Common {
    std::string spec_path;
    std::uint64_t seed = 1;
    int levels = 4096;
    int threads = 0;
    std::string out;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--spec", c.spec_path, "environment spec JSON")->required();
    app->add_option("--seed", c.seed, "root seed");
    app->add_option("--levels", c.levels, "levels in ergodic averages");
    app->add_option("--threads", c.threads, "worker threads (default: STRIPLDP_THREADS or logical cores)");
    app->add_option("--out", c.out, "output path");
}

int threads_of(const Common& c) { return c.threads > 0 ? c.threads : default_threads(); }

void write_manifest(const std::string& command, const Common& c, const std::string& hash, const json& params,
                    double seconds)
{
    if (c.out.empty()) return;
    json m;
    m["command"] = command;
    m["spec"] = c.spec_path;
    m["spec_hash"] = hash;
    m["seed"] = c.seed;
    m["parameters"] = params;
    m["outputs"] = {c.out};
    m["wall_clock_seconds"] = seconds;
    m["version"] = kVersion;
    write_file(c.out + ".manifest.json", m.dump(2) + "\n");
}

std::string manifest_name(const Common& c) { return c.out.empty() ? "" : c.out + ".manifest.json"; }

AnalysisOptions analysis_options(const Common& c, double tol)
{
    AnalysisOptions o;
    o.lmgf.n_levels = c.levels;
    o.lmgf.seed = c.seed;
    o.crit_tol = tol;
    return o;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Large deviations of random walks in random environments on a strip"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    Common ca, cr, cs, cc;
    double tol = 1e-7;
    auto* analyze = app.add_subcommand("analyze", "lambda_crit, t0, t*, v0 and regime");
    add_common(analyze, ca);
    analyze->add_option("--tol", tol, "bracket width for lambda_crit");

    std::string kind = "hitting", grid;
    int rate_M = 0;
    double rate_tol = 1e-7;
    auto* rate = app.add_subcommand("rate", "rate function curve as CSV");
    add_common(rate, cr);
    rate->add_option("--kind", kind, "hitting | speed | averaged-hitting | averaged-speed")
        ->check(CLI::IsMember({"hitting", "speed", "averaged-hitting", "averaged-speed"}));
    rate->add_option("--grid", grid, "A:STEP:B")->required();
    rate->add_option("--M", rate_M, "excursion cap (hitting only)");
    rate->add_option("--tol", rate_tol, "bracket width for lambda_crit");

    double t_thr = std::nan(""), x_thr = std::nan(""), horizon = 20.0;
    int sim_n = 100, sim_M = 0;
    long long trials = 100000, budget = 0;
    std::string method = "direct", mode = "averaged";
    std::uint64_t env_seed = 0;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo tail estimate as JSON");
    add_common(simulate, cs);
    auto* topt = simulate->add_option("--t", t_thr, "event T_n >= t n");
    auto* xopt = simulate->add_option("--x", x_thr, "event X_n <= x n (x < v0) or X_n >= x n (x > v0)");
    topt->excludes(xopt);
    simulate->add_option("--n", sim_n, "scale n");
    simulate->add_option("--trials", trials, "number of trials");
    simulate->add_option("--method", method, "direct | is | slowdown")
        ->check(CLI::IsMember({"direct", "is", "slowdown"}));
    simulate->add_option("--M", sim_M, "excursion cap (is)");
    simulate->add_option("--mode", mode, "averaged | quenched (direct)")
        ->check(CLI::IsMember({"averaged", "quenched"}));
    simulate->add_option("--env-seed", env_seed, "environment seed for quenched runs");
    simulate->add_option("--horizon", horizon, "horizon factor (slowdown)");
    simulate->add_option("--budget", budget, "maximum simulated steps (0 = unlimited)");

    auto* convert = app.add_subcommand("convert-bounded-jump", "embed an (L, R) walk into a strip spec");
    convert->add_option("--spec", cc.spec_path, "bounded-jump kernel JSON")->required();
    convert->add_option("--out", cc.out, "output strip spec JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count(); };

    try {
        if (*analyze) {
            const auto ls = load_spec(ca.spec_path);
            if (ls.embedding && !ls.embedding->warning.empty()) std::cerr << "warning: " << ls.embedding->warning << "\n";
            const auto a = analyze_environment(ls.spec, analysis_options(ca, tol));
            json j = analysis_to_json(a);
            j["spec_hash"] = ls.hash;
            j["seed"] = ca.seed;
            if (!ca.out.empty()) j["manifest"] = manifest_name(ca);
            std::cout << j.dump(2) << "\n";
            if (!ca.out.empty()) write_file(ca.out, j.dump(2) + "\n");
            write_manifest("analyze", ca, ls.hash, {{"levels", ca.levels}, {"tol", tol}}, elapsed());
            return kOk;
        }
        if (*rate) {
            const auto ls = load_spec(cr.spec_path);
            if (ls.embedding && !ls.embedding->warning.empty()) std::cerr << "warning: " << ls.embedding->warning << "\n";
            const auto g = parse_grid(grid);
            RateOptions o;
            o.analysis = analysis_options(cr, rate_tol);
            if (rate_M > 0) {
                if (kind != "hitting") throw SpecError("--M applies to --kind hitting only");
                o.M = rate_M;
            }
            RateCurve c;
            if (kind == "hitting") c = hitting_rate_curve(ls.spec, g, o);
            else if (kind == "speed") c = speed_rate_curve(ls.spec, g, o);
            else if (kind == "averaged-hitting") c = averaged_rate_upper(ls.spec, g, o);
            else c = averaged_speed_upper(ls.spec, g, o);
            c.spec_hash = ls.hash;
            for (const auto& w : shape_warnings(c)) std::cerr << "warning: " << w << "\n";
            std::string csv = curve_to_csv(c);
            if (!cr.out.empty()) {
                // reference the manifest from the metadata line
                csv.insert(csv.find('\n'), " manifest=" + manifest_name(cr));
                write_file(cr.out, csv);
            } else {
                std::cout << csv;
            }
            write_manifest("rate", cr, ls.hash,
                           {{"kind", kind}, {"grid", grid}, {"M", rate_M}, {"levels", cr.levels}, {"tol", rate_tol}},
                           elapsed());
            return kOk;
        }
        if (*simulate) {
            const auto ls = load_spec(cs.spec_path);
            const bool has_t = !std::isnan(t_thr), has_x = !std::isnan(x_thr);
            SimOptions so;
            so.threads = threads_of(cs);
            so.mode = mode == "quenched" ? SimMode::quenched : SimMode::averaged;
            so.environment_seed = env_seed;
            so.step_budget = budget;
            TailEstimate est;
            std::optional<double> analytic;
            std::string analytic_name;
            if (method == "is") {
                if (sim_M <= 0) throw SpecError("--method is requires --M");
                if (!has_t) throw SpecError("--method is requires --t");
                est = importance_sample_hitting(ls.spec, sim_n, t_thr, sim_M, trials, cs.seed, so, cs.levels);
                RateOptions o;
                o.analysis.lmgf.n_levels = cs.levels;
                o.analysis.lmgf.seed = env_seed;
                o.M = sim_M;
                analytic = hitting_rate_curve(ls.spec, {t_thr}, o).values[0];
                analytic_name = "J_M(t)";
            } else if (method == "slowdown") {
                SlowdownOptions o;
                o.environment_seed = env_seed;
                o.threads = so.threads;
                o.analysis = analysis_options(cs, 1e-7);
                // exact forward evolution unless a trial count is asked for
                o.method = simulate->count("--trials") ? SlowdownMethod::direct : SlowdownMethod::exact;
                est = slowdown_probability(ls.spec, sim_n, trials, horizon, cs.seed, o);
                analytic = analyze_environment(ls.spec, o.analysis).lambda_crit.lambda_crit;
                analytic_name = "lambda_crit";
            } else {
                if (has_t == has_x) throw SpecError("--method direct needs exactly one of --t or --x");
                RateOptions o;
                o.analysis = analysis_options(cs, 1e-7);
                if (has_t) {
                    est = empirical_hitting_tail(ls.spec, sim_n, t_thr, trials, cs.seed, so);
                    analytic = hitting_rate_curve(ls.spec, {t_thr}, o).values[0];
                    analytic_name = "J(t)";
                } else {
                    const auto a = analyze_environment(ls.spec, o.analysis);
                    o.known_analysis = a;
                    est = empirical_speed_tail(ls.spec, sim_n, x_thr, x_thr < a.v0, trials, cs.seed, so);
                    analytic = speed_rate_curve(ls.spec, {x_thr}, o).values[0];
                    analytic_name = "I(x)";
                }
            }
            json j = tail_to_json(est, ls.hash);
            if (!cs.out.empty()) j["manifest"] = manifest_name(cs);
            std::cout << j.dump(2) << "\n";
            if (analytic)
                std::fprintf(stderr, "compare: estimate %.6g vs %s = %.6g (relative gap %.3g)\n", est.point,
                             analytic_name.c_str(), *analytic, (est.point - *analytic) / std::abs(*analytic));
            if (!cs.out.empty()) write_file(cs.out, j.dump(2) + "\n");
            write_manifest("simulate", cs, ls.hash,
                           {{"method", method}, {"mode", mode}, {"n", sim_n}, {"trials", trials}, {"M", sim_M},
                            {"t", has_t ? json(t_thr) : json(nullptr)}, {"x", has_x ? json(x_thr) : json(nullptr)},
                            {"env_seed", env_seed}, {"horizon", horizon}},
                           elapsed());
            return kOk;
        }
        if (*convert) {
            const json in = parse_json_text(read_file(cc.spec_path), cc.spec_path);
            if (!in.is_object() || in.value("kind", "") != "bounded-jump")
                throw SpecError(cc.spec_path + ": expected a bounded-jump document");
            const auto ls = parse_spec_text(in.dump(), cc.spec_path);
            if (ls.embedding && !ls.embedding->warning.empty()) std::cerr << "warning: " << ls.embedding->warning << "\n";
            const std::string out = spec_to_json(ls.spec).dump(2) + "\n";
            if (cc.out.empty()) std::cout << out;
            else write_file(cc.out, out);
            return kOk;
        }
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const BudgetError& e) {
        std::cerr << "budget exhausted: " << e.what() << "\n";
        return kBudget;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return kUsage;
}
