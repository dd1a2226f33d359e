#pragma once

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <openssl/evp.h>

#include <json.hpp>

#include "montecarlo.hpp"

namespace stripldp {

using json = nlohmann::json;

inline std::string sha256_hex(const std::string& data)
{
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, md, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("SHA-256 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

// ---------------------------------------------------------------------------
// Spec documents.
// ---------------------------------------------------------------------------

inline json matrix_to_json(const Matrix& m)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        a.push_back(row);
    }
    return a;
}

inline std::string path_join(const std::string& path, const std::string& key) { return path + "/" + key; }

inline const json& require_field(const json& j, const std::string& key, const std::string& path)
{
    if (!j.is_object() || !j.contains(key)) throw SpecError(path_join(path, key) + ": missing field");
    return j.at(key);
}

inline double number_at(const json& j, const std::string& path)
{
    if (!j.is_number()) throw SpecError(path + ": expected a number");
    return j.get<double>();
}

inline int int_at(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) throw SpecError(path + ": expected an integer");
    return j.get<int>();
}

// A d x d matrix given as nested arrays; a bare number is accepted when d = 1.
inline Matrix matrix_from_json(const json& j, int d, const std::string& path)
{
    if (j.is_number()) {
        if (d != 1) throw SpecError(path + ": scalar entry needs d = 1");
        return Matrix::Constant(1, 1, j.get<double>());
    }
    if (!j.is_array() || static_cast<int>(j.size()) != d) throw SpecError(path + ": expected " + std::to_string(d) + " rows");
    Matrix m(d, d);
    for (int i = 0; i < d; ++i) {
        const auto& row = j[i];
        const std::string rp = path + "/" + std::to_string(i);
        if (!row.is_array() || static_cast<int>(row.size()) != d)
            throw SpecError(rp + ": expected " + std::to_string(d) + " columns");
        for (int c = 0; c < d; ++c) m(i, c) = number_at(row[c], rp + "/" + std::to_string(c));
    }
    return m;
}

inline std::vector<double> vector_from_json(const json& j, const std::string& path)
{
    if (!j.is_array()) throw SpecError(path + ": expected an array");
    std::vector<double> v;
    for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number_at(j[i], path + "/" + std::to_string(i)));
    return v;
}

struct LoadedSpec {
    EnvironmentSpec spec;
    json canonical;
    std::string hash;
    std::optional<EmbeddingReport> embedding;
};

inline json spec_to_json(const EnvironmentSpec& s)
{
    if (s.kind == SpecKind::iid_parametric) throw SpecError("parametric specs have no JSON form");
    json j;
    j["d"] = s.d;
    j["kappa"] = s.kappa;
    j["kind"] = s.kind == SpecKind::periodic ? "periodic" : "iid";
    j["slices"] = json::array();
    for (std::size_t i = 0; i < s.slices.size(); ++i) {
        json sl;
        sl["q"] = matrix_to_json(s.slices[i].q);
        sl["r"] = matrix_to_json(s.slices[i].r);
        sl["p"] = matrix_to_json(s.slices[i].p);
        if (s.kind == SpecKind::iid_finite) sl["weight"] = s.weights[i];
        j["slices"].push_back(sl);
    }
    if (s.bounded_jump) j["bounded_jump"] = {{"L", s.bounded_jump->L}, {"R", s.bounded_jump->R}};
    return j;
}

inline std::string canonical_dump(const json& j) { return j.dump(); }

inline LoadedSpec spec_from_json(const json& j)
{
    const std::string root = "";
    if (!j.is_object()) throw SpecError("/: spec must be a JSON object");
    const auto& kj = require_field(j, "kind", root);
    if (!kj.is_string()) throw SpecError("/kind: expected a string");
    const std::string kind = kj.get<std::string>();
    LoadedSpec out;
    if (kind == "bounded-jump") {
        const int L = int_at(require_field(j, "L", root), "/L");
        const int R = int_at(require_field(j, "R", root), "/R");
        std::vector<std::vector<double>> kernels;
        if (j.contains("kernels")) {
            const auto& ks = j.at("kernels");
            if (!ks.is_array()) throw SpecError("/kernels: expected an array");
            for (std::size_t i = 0; i < ks.size(); ++i) kernels.push_back(vector_from_json(ks[i], "/kernels/" + std::to_string(i)));
        } else {
            kernels.push_back(vector_from_json(require_field(j, "kernel", root), "/kernel"));
        }
        double kappa;
        if (j.contains("kappa")) {
            kappa = number_at(j.at("kappa"), "/kappa");
        } else {
            kappa = 0.49;
            for (const auto& k : kernels)
                for (int z = -L; z <= R; ++z)
                    if (z != 0 && static_cast<int>(k.size()) == L + R + 1) kappa = std::min(kappa, k[z + L]);
        }
        EmbeddingReport rep;
        out.spec = embed_bounded_jump(kernels, L, R, kappa, &rep);
        out.embedding = rep;
        json c;
        c["kind"] = "bounded-jump";
        c["L"] = L;
        c["R"] = R;
        c["kernels"] = kernels;
        c["kappa"] = kappa;
        out.canonical = c;
        out.hash = sha256_hex(canonical_dump(c));
        return out;
    }
    if (kind != "periodic" && kind != "iid") throw SpecError("/kind: expected \"periodic\", \"iid\" or \"bounded-jump\"");
    const int d = int_at(require_field(j, "d", root), "/d");
    if (d < 1 || d > kMaxDim) throw SpecError("/d: must lie in [1, " + std::to_string(kMaxDim) + "]");
    const double kappa = number_at(require_field(j, "kappa", root), "/kappa");
    const auto& sl = require_field(j, "slices", root);
    if (!sl.is_array() || sl.empty()) throw SpecError("/slices: expected a non-empty array");
    std::vector<EnvironmentSlice> slices;
    std::vector<double> weights;
    for (std::size_t i = 0; i < sl.size(); ++i) {
        const std::string p = "/slices/" + std::to_string(i);
        EnvironmentSlice s{matrix_from_json(require_field(sl[i], "q", p), d, p + "/q"),
                           matrix_from_json(require_field(sl[i], "r", p), d, p + "/r"),
                           matrix_from_json(require_field(sl[i], "p", p), d, p + "/p")};
        try {
            check_slice(s);
        } catch (const SpecError& e) {
            throw SpecError(p + ": " + e.what());
        }
        slices.push_back(std::move(s));
        if (kind == "iid") weights.push_back(number_at(require_field(sl[i], "weight", p), p + "/weight"));
    }
    EnvironmentSpec s;
    s.kind = kind == "periodic" ? SpecKind::periodic : SpecKind::iid_finite;
    s.d = d;
    s.kappa = kappa;
    s.slices = std::move(slices);
    s.weights = std::move(weights);
    if (j.contains("bounded_jump")) {
        const auto& b = j.at("bounded_jump");
        s.bounded_jump = BoundedJumpInfo{int_at(require_field(b, "L", "/bounded_jump"), "/bounded_jump/L"),
                                         int_at(require_field(b, "R", "/bounded_jump"), "/bounded_jump/R"), {}};
    }
    s.validate();
    out.spec = std::move(s);
    out.canonical = spec_to_json(out.spec);
    out.hash = sha256_hex(canonical_dump(out.canonical));
    return out;
}

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte > 0 ? byte - 1 : 0, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline json parse_json_text(const std::string& text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte);
        throw SpecError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON syntax error: " +
                        e.what());
    }
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError(path + ": cannot open file");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline LoadedSpec parse_spec_text(const std::string& text, const std::string& source = "<input>")
{
    const json j = parse_json_text(text, source);
    try {
        return spec_from_json(j);
    } catch (const SpecError& e) {
        throw SpecError(source + ":" + e.what());
    }
}

inline LoadedSpec load_spec(const std::string& path) { return parse_spec_text(read_file(path), path); }

inline json window_to_json(const EnvironmentWindow& w)
{
    json j = spec_to_json(window_as_spec(w));
    j["window"] = {{"lo", w.lo}, {"hi", w.hi}};
    if (w.seed) j["window"]["seed"] = *w.seed;
    return j;
}

// ---------------------------------------------------------------------------
// Results.
// ---------------------------------------------------------------------------

inline json finite_or_null(double v)
{
    if (std::isfinite(v)) return v;
    return nullptr;
}

inline json analysis_to_json(const EnvironmentAnalysis& a)
{
    json j;
    j["t0"] = finite_or_null(a.t0);
    j["t_star"] = finite_or_null(a.t_star);
    j["v0"] = a.v0;
    j["lambda_crit"] = {a.lambda_crit.lower, a.lambda_crit.upper};
    j["lambda_crit_certified_lower"] = a.lambda_crit.certified_lower;
    j["lambda_crit_method"] = a.lambda_crit.method;
    j["regime"] = to_string(a.regime);
    j["ambiguous"] = a.ambiguous;
    j["t0_stable"] = a.t0_stable;
    j["lambda_at_zero"] = a.lambda_at_zero ? json(*a.lambda_at_zero) : json(nullptr);
    j["inverted_lambda_at_zero"] = a.inverted_lambda_at_zero ? json(*a.inverted_lambda_at_zero) : json(nullptr);
    if (!a.note.empty()) j["note"] = a.note;
    return j;
}

inline json tail_to_json(const TailEstimate& e, const std::string& spec_hash)
{
    json j;
    j["event"] = e.event;
    j["n"] = e.n;
    j["method"] = e.method;
    j["mode"] = e.mode;
    j["point"] = finite_or_null(e.point);
    j["ci"] = {finite_or_null(e.ci[0]), finite_or_null(e.ci[1])};
    j["probability"] = e.probability;
    j["trials"] = e.trials;
    j["hits"] = e.hits;
    j["ess"] = e.ess;
    j["spec_hash"] = spec_hash;
    j["seed"] = e.seed;
    if (e.environment_seed) j["environment_seed"] = *e.environment_seed;
    if (e.method == "importance-sampled") {
        j["lambda"] = e.lambda;
        j["M"] = e.M;
    }
    j["one_sided"] = e.one_sided;
    j["warnings"] = e.warnings;
    return j;
}

inline std::string format_double(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// One '#' metadata line, a header row, then one row per abscissa.
inline std::string curve_to_csv(const RateCurve& c)
{
    std::ostringstream os;
    const bool speed = c.kind == RateKind::quenched_speed || c.kind == RateKind::averaged_speed;
    os << "# kind=" << to_string(c.kind) << " spec_hash=" << c.spec_hash << " seed=" << c.seed << " M=" << c.M
       << " t0=" << format_double(c.meta.t0) << " t_star=" << format_double(c.meta.t_star)
       << " v0=" << format_double(c.meta.v0) << " lambda_crit=[" << format_double(c.meta.lambda_crit.lower) << ","
       << format_double(c.meta.lambda_crit.upper) << "] regime=" << to_string(c.meta.regime) << "\n";
    os << (speed ? "x" : "t") << ",value,argmax_lambda,det_error,stat_error";
    if (!c.dual.empty()) os << ",dual";
    const std::size_t s = c.tilts.empty() ? 0 : c.tilts.front().size();
    for (std::size_t i = 0; i < s; ++i) os << ",tilt_" << i;
    os << "\n";
    for (std::size_t i = 0; i < c.size(); ++i) {
        os << format_double(c.abscissae[i]) << "," << format_double(c.values[i]) << "," << format_double(c.argmax[i])
           << "," << format_double(c.det_error[i]) << "," << format_double(c.stat_error[i]);
        if (!c.dual.empty()) os << "," << format_double(c.dual[i]);
        for (std::size_t k = 0; k < s; ++k) os << "," << format_double(c.tilts[i][k]);
        os << "\n";
    }
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw SpecError(path + ": cannot write file");
    out << content;
}

} // namespace stripldp
