#pragma once

#include "diagnostics.hpp"
#include "problems.hpp"
#include "trace.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

namespace krylovreg {

inline constexpr int schema_version = 1;

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Write to a sibling temporary and rename it over the target.
inline void write_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + path);
        out << content;
        out.flush();
        if (!out)
            throw IoError("write failed for " + path);
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw IoError("cannot rename into " + path);
    }
}

inline std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

using json = nlohmann::json;

inline json to_array(const Vector& v)
{
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        a.push_back(std::isfinite(v(i)) ? json(v(i)) : json(nullptr));
    return a;
}

inline Vector from_array(const json& a, const char* what)
{
    if (!a.is_array())
        throw InputError(std::string("problem file: '") + what + "' must be an array");
    Vector v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number())
            throw InputError(std::string("problem file: non-numeric entry in '") + what + "'");
        v(i) = a[i].get<double>();
    }
    return v;
}

} // namespace detail

inline nlohmann::json instance_to_json(const NoisyInstance& inst, bool with_noise)
{
    using detail::json;
    const IllPosedProblem& p = inst.problem;
    json j;
    j["schema_version"] = schema_version;
    j["name"] = p.name;
    j["kind"] = to_string(p.kind);
    j["m"] = p.m();
    j["n"] = p.n();
    json mat = json::array();
    for (Eigen::Index r = 0; r < p.m(); ++r)
        for (Eigen::Index c = 0; c < p.n(); ++c)
            mat.push_back(p.A(r, c));
    j["matrix"] = std::move(mat);
    j["b_exact"] = detail::to_array(p.b_exact);
    j["x_true"] = detail::to_array(p.x_true);
    if (with_noise) {
        json nz;
        nz["epsilon"] = inst.epsilon;
        nz["seed"] = inst.seed;
        nz["e"] = detail::to_array(inst.e);
        nz["b"] = detail::to_array(inst.b);
        if (inst.k0_estimate)
            nz["k0_estimate"] = *inst.k0_estimate;
        j["noise"] = std::move(nz);
    }
    return j;
}

inline std::string instance_to_string(const NoisyInstance& inst, bool with_noise)
{
    return instance_to_json(inst, with_noise).dump(1) + "\n";
}

inline NoisyInstance instance_from_string(const std::string& text)
{
    using detail::json;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("problem file: ") + e.what());
    }
    for (const char* key : {"schema_version", "name", "m", "n", "matrix", "b_exact", "x_true"})
        if (!j.contains(key))
            throw InputError(std::string("problem file: missing '") + key + "'");
    if (j["schema_version"].get<int>() != schema_version)
        throw InputError("problem file: unsupported schema_version");
    IllPosedProblem p;
    p.name = j["name"].get<std::string>();
    p.kind = j.contains("kind") ? parse_problem_kind(j["kind"].get<std::string>()) : ProblemKind::synthetic;
    const auto m = j["m"].get<Eigen::Index>(), n = j["n"].get<Eigen::Index>();
    const Vector flat = detail::from_array(j["matrix"], "matrix");
    if (m < 1 || n < 1 || flat.size() != m * n)
        throw InputError("problem file: matrix size does not match m x n");
    p.A.resize(m, n);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index c = 0; c < n; ++c)
            p.A(r, c) = flat(r * n + c);
    p.b_exact = detail::from_array(j["b_exact"], "b_exact");
    p.x_true = detail::from_array(j["x_true"], "x_true");
    if (p.b_exact.size() != m)
        throw InputError("problem file: b_exact has wrong length");
    if (p.x_true.size() != 0 && p.x_true.size() != n)
        throw InputError("problem file: x_true has wrong length");

    NoisyInstance inst;
    if (j.contains("noise")) {
        const json& nz = j["noise"];
        inst.epsilon = nz.at("epsilon").get<double>();
        inst.seed = nz.at("seed").get<std::uint64_t>();
        inst.e = detail::from_array(nz.at("e"), "noise.e");
        inst.b = detail::from_array(nz.at("b"), "noise.b");
        if (nz.contains("k0_estimate"))
            inst.k0_estimate = nz["k0_estimate"].get<int>();
        if (inst.b.size() != m || inst.e.size() != m)
            throw InputError("problem file: noise vectors have wrong length");
    } else {
        inst.b = p.b_exact;
        inst.e = Vector::Zero(m);
    }
    inst.problem = std::move(p);
    return inst;
}

// ---------------------------------------------------------------- traces

inline const char* trace_header = "k,residual_norm,atr_norm,solution_norm,rel_error,inner_trunc";

inline std::string trace_to_csv(const SolverTrace& t)
{
    std::string out = "# schema_version=" + std::to_string(schema_version) + " solver=" + to_string(t.solver) + "\n";
    out += trace_header;
    out += "\n";
    for (const auto& r : t.records) {
        out += std::to_string(r.k);
        out += ',' + format_double(r.residual_norm);
        out += ',' + format_double(r.normal_residual_norm);
        out += ',' + format_double(r.solution_norm);
        out += ',';
        if (r.rel_error)
            out += format_double(*r.rel_error);
        out += ',';
        if (r.inner_truncation)
            out += std::to_string(*r.inner_truncation);
        out += '\n';
    }
    return out;
}

inline SolverTrace trace_from_csv(const std::string& text)
{
    SolverTrace t;
    std::istringstream in(text);
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (line[0] == '#') {
            const auto pos = line.find("solver=");
            if (pos != std::string::npos)
                t.solver = parse_solver_kind(line.substr(pos + 7));
            continue;
        }
        if (!header) {
            if (line != trace_header)
                throw InputError("trace file: unexpected header");
            header = true;
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        if (line.back() == ',')
            cells.emplace_back();
        if (cells.size() != 6)
            throw InputError("trace file: expected 6 cells per row");
        StepRecord r;
        r.k = std::stoi(cells[0]);
        r.residual_norm = std::stod(cells[1]);
        r.normal_residual_norm = std::stod(cells[2]);
        r.solution_norm = std::stod(cells[3]);
        if (!cells[4].empty())
            r.rel_error = std::stod(cells[4]);
        if (!cells[5].empty())
            r.inner_truncation = std::stoi(cells[5]);
        t.records.push_back(r);
    }
    if (!header)
        throw InputError("trace file: missing header");
    return t;
}

// ---------------------------------------------------------------- reports

inline nlohmann::json verdict_to_json(const Verdict& v)
{
    nlohmann::json j;
    j["name"] = v.name;
    j["k"] = v.k;
    if (v.index)
        j["index"] = v.index;
    j["status"] = to_string(v.status);
    j["lhs"] = v.lhs;
    j["rhs"] = v.rhs;
    j["margin"] = v.margin;
    j["slack"] = v.slack;
    if (!v.note.empty())
        j["note"] = v.note;
    return j;
}

inline std::string report_to_string(const DiagnosticsReport& r)
{
    using detail::json;
    json j;
    j["schema_version"] = schema_version;
    const auto& m = r.metrics;
    if (m.count("gamma")) {
        j["gamma"] = detail::to_array(r.gamma);
        j["gamma_lower"] = detail::to_array(r.gamma_lower);
        j["near_best"] = r.near_best;
    }
    if (m.count("sintheta")) {
        j["sin_theta"] = detail::to_array(r.sin_theta);
        j["delta_norm"] = detail::to_array(r.delta_norm);
    }
    if (m.count("ritz")) {
        json a = json::array(), bb = json::array();
        for (std::size_t i = 0; i < r.ritz.size(); ++i) {
            a.push_back(detail::to_array(r.ritz[i]));
            bb.push_back(detail::to_array(r.ritz_bar[i]));
        }
        j["ritz"] = std::move(a);
        j["ritz_bar"] = std::move(bb);
    }
    if (m.count("filters")) {
        json a = json::array();
        for (const auto& f : r.filters)
            a.push_back(detail::to_array(f));
        j["filters"] = std::move(a);
    }
    if (m.count("classify") && r.decay) {
        const DecayFit& d = *r.decay;
        j["classify"] = {{"classification", to_string(d.classification)},
                         {"rho_hat", d.rho_hat},
                         {"alpha_hat", d.alpha_hat},
                         {"fit_window", {d.window_begin, d.window_end}},
                         {"residual_exponential", d.residual_exponential},
                         {"residual_power", d.residual_power}};
    }
    if (m.count("lsmr"))
        j["lsmr_err"] = detail::to_array(r.lsmr_err);
    if (m.count("cgme"))
        j["cgme_err"] = detail::to_array(r.cgme_err);
    if (m.count("projected_picard"))
        j["projected_picard"] = detail::to_array(r.projected_picard);
    if (m.count("picard") && r.picard) {
        j["picard"] = {{"sigma", detail::to_array(r.picard->sigma)},
                       {"fourier", detail::to_array(r.picard->fourier)},
                       {"fourier_exact", detail::to_array(r.picard->fourier_exact)},
                       {"ratios", detail::to_array(r.picard->ratios)},
                       {"transition_index", r.picard->transition_index}};
    }
    if (m.count("bounds")) {
        json a = json::array();
        for (const auto& v : r.bound_checks)
            a.push_back(verdict_to_json(v));
        j["bound_checks"] = std::move(a);
    }
    return j.dump(1) + "\n";
}

} // namespace krylovreg
