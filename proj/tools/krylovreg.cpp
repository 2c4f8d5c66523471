#include <krylovreg/io.hpp>
#include <krylovreg/krylovreg.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace kr = krylovreg;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty())
            out.push_back(item);
    return out;
}

void apply_thread_cap()
{
    if (const char* env = std::getenv("KRYLOVREG_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1)
            throw UsageError("KRYLOVREG_THREADS must be a positive integer");
        Eigen::setNbThreads(static_cast<int>(n));
    } else {
        Eigen::setNbThreads(1);
    }
}

kr::InnerRule parse_inner(const std::string& s)
{
    if (s == "lcurve")
        return kr::InnerRule::lcurve();
    if (s == "oracle")
        return kr::InnerRule::oracle();
    try {
        std::size_t pos = 0;
        const int j = std::stoi(s, &pos);
        if (pos == s.size() && j >= 1)
            return kr::InnerRule::fixed(j);
    } catch (const std::exception&) {
    }
    throw UsageError("--inner must be lcurve, oracle or a positive integer");
}

std::vector<double> tikhonov_grid(const kr::SvdTriplet& s, int count)
{
    std::vector<double> lambdas(count);
    const double s1 = s.sigma(0);
    for (int i = 0; i < count; ++i) {
        const double t = count > 1 ? double(i) / (count - 1) : 0.0;
        lambdas[i] = s1 * std::pow(10.0, -10.0 * t);
    }
    return lambdas;
}

kr::SolverTrace run_solver(kr::NoisyInstance& inst, kr::SolverKind kind, int maxit, const kr::InnerRule& inner)
{
    using kr::SolverKind;
    const int mn = static_cast<int>(std::min(inst.problem.m(), inst.problem.n()));
    switch (kind) {
    case SolverKind::lsqr: return kr::lsqr(inst, maxit);
    case SolverKind::cgls: return kr::cgls(inst, maxit);
    case SolverKind::lsmr: return kr::lsmr(inst, maxit);
    case SolverKind::cgme: return kr::cgme(inst, maxit);
    case SolverKind::hybrid_lsqr: return kr::hybrid_lsqr(inst, maxit, inner);
    case SolverKind::tsvd:
        return kr::tsvd_family(inst, kr::ensure_svd(inst.problem), std::min(maxit, mn));
    case SolverKind::tikhonov: {
        const auto& s = kr::ensure_svd(inst.problem);
        return kr::tikhonov_family(inst, s, tikhonov_grid(s, maxit));
    }
    case SolverKind::gmres:
    case SolverKind::rrgmres:
        if (inst.problem.m() != inst.problem.n())
            throw kr::InputError(std::string(kr::to_string(kind)) + " requires a square matrix");
        return kr::gmres(inst, maxit, kind == SolverKind::gmres ? kr::GmresVariant::gmres : kr::GmresVariant::rrgmres);
    }
    throw kr::InputError("unknown solver");
}

kr::NoisyInstance load(const std::string& path)
{
    return kr::instance_from_string(kr::read_file(path));
}

int cmd_gen(const std::string& problem, int n, int m, const std::string& out, std::optional<double> noise,
            std::uint64_t seed, const std::string& decay, double rho, double alpha, double beta, double eta)
{
    if (n < 1)
        throw UsageError("--n must be positive");
    const kr::ProblemKind kind = kr::parse_problem_kind(problem);
    kr::IllPosedProblem p;
    std::optional<kr::SyntheticModel> model;
    if (kind == kr::ProblemKind::synthetic) {
        if (decay == "severe")
            model = kr::SyntheticModel::severe(rho, beta, eta);
        else if (decay == "moderate" || decay == "mild")
            model = kr::SyntheticModel::power(alpha, beta, eta);
        else
            throw UsageError("--decay must be severe, moderate or mild");
        if (decay != kr::to_string(model->decay))
            throw UsageError("--alpha " + std::to_string(alpha) + " does not give " + decay + " decay");
        p = kr::generate_synthetic(*model, m > 0 ? m : n, n, seed);
    } else {
        p = kr::generate(kind, n);
    }
    kr::NoisyInstance inst;
    if (noise)
        inst = kr::add_noise(p, *noise, seed);
    else
        inst = kr::noiseless(p);
    kr::write_atomic(out, kr::instance_to_string(inst, noise.has_value()));
    return 0;
}

int cmd_solve(const std::string& in, const std::string& solver, int maxit, const std::string& inner,
              const std::string& out)
{
    auto inst = load(in);
    const auto trace = run_solver(inst, kr::parse_solver_kind(solver), maxit, parse_inner(inner));
    kr::write_atomic(out, kr::trace_to_csv(trace));
    return 0;
}

int cmd_diagnose(const std::string& in, const std::string& metrics, int kmax, const std::string& out)
{
    const auto list = split_list(metrics);
    if (list.empty())
        throw UsageError("--metrics must name at least one metric");
    std::set<std::string> set(list.begin(), list.end());
    for (const auto& m : set)
        if (!kr::known_metrics().count(m))
            throw UsageError("unknown metric '" + m + "'");
    auto inst = load(in);
    const auto report = kr::diagnose(inst, kmax, set);
    kr::write_atomic(out, kr::report_to_string(report));
    return 0;
}

int cmd_compare(const std::string& in, const std::string& solvers, int maxit, const std::string& inner,
                const std::string& out)
{
    const auto names = split_list(solvers);
    if (names.empty())
        throw UsageError("--solvers must name at least one solver");
    std::vector<kr::SolverKind> kinds;
    for (const auto& s : names)
        kinds.push_back(kr::parse_solver_kind(s));
    auto inst = load(in);
    const kr::InnerRule rule = parse_inner(inner);

    std::vector<kr::SolverTrace> traces;
    for (auto k : kinds)
        traces.push_back(run_solver(inst, k, maxit, rule));

    std::string text = "# schema_version=" + std::to_string(kr::schema_version) + "\n";
    std::size_t rows = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        rows = std::max(rows, t.records.size());
        text += "# ";
        text += kr::to_string(t.solver);
        if (t.records.size() >= 3) {
            const auto lc = kr::lcurve_corner(t.residual_norms(), t.solution_norms());
            text += " lcurve_corner=" + std::to_string(lc.corner_index);
        } else {
            text += " lcurve_corner=";
        }
        if (t.min_rel_error())
            text += " oracle_best=" + std::to_string(kr::oracle_best(t));
        text += "\n";
    }
    text += "k";
    for (const auto& t : traces) {
        const std::string s = kr::to_string(t.solver);
        text += "," + s + "_rel_error," + s + "_residual_norm," + s + "_solution_norm";
    }
    text += "\n";
    for (std::size_t r = 0; r < rows; ++r) {
        text += std::to_string(r + 1);
        for (const auto& t : traces) {
            if (r < t.records.size()) {
                const auto& rec = t.records[r];
                text += ",";
                if (rec.rel_error)
                    text += kr::format_double(*rec.rel_error);
                text += "," + kr::format_double(rec.residual_norm) + "," + kr::format_double(rec.solution_norm);
            } else {
                text += ",,,";
            }
        }
        text += "\n";
    }
    kr::write_atomic(out, text);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Krylov iterative regularization experiments"};
    app.require_subcommand(1);

    std::string problem, in, out, solver = "lsqr", solvers, metrics, inner = "lcurve", decay = "severe";
    int n = 0, m = 0, maxit = 50, kmax = 30;
    double noise = 0.0, rho = std::exp(1.0), alpha = 2.0, beta = 0.5, eta = 1e-4;
    std::uint64_t seed = 7;

    auto* gen = app.add_subcommand("gen", "generate a test problem");
    gen->add_option("--problem", problem, "shaw, wing, heat, phillips, deriv2, i_laplace or synthetic")->required();
    gen->add_option("--n", n, "number of unknowns")->required();
    gen->add_option("--m", m, "number of rows (synthetic only)");
    auto* noise_opt = gen->add_option("--noise", noise, "relative noise level");
    gen->add_option("--seed", seed, "random seed");
    gen->add_option("--decay", decay, "synthetic decay: severe, moderate or mild");
    gen->add_option("--rho", rho, "synthetic severe decay base");
    gen->add_option("--alpha", alpha, "synthetic power decay exponent");
    gen->add_option("--beta", beta, "Picard exponent");
    gen->add_option("--eta", eta, "synthetic noise floor");
    gen->add_option("-o,--out", out, "output JSON")->required();

    auto* solve = app.add_subcommand("solve", "run one solver");
    solve->add_option("--solver", solver, "solver name");
    solve->add_option("--maxit", maxit, "iterations or truncation levels");
    solve->add_option("--inner", inner, "hybrid inner rule: lcurve, oracle or a fixed index");
    solve->add_option("--in", in, "problem JSON")->required();
    solve->add_option("-o,--out", out, "output CSV")->required();

    auto* diag = app.add_subcommand("diagnose", "compute diagnostics");
    diag->add_option("--metrics", metrics, "comma separated metric names")->required();
    diag->add_option("--kmax", kmax, "largest iteration examined");
    diag->add_option("--in", in, "problem JSON")->required();
    diag->add_option("-o,--out", out, "output JSON")->required();

    auto* cmp = app.add_subcommand("compare", "run several solvers on one instance");
    cmp->add_option("--solvers", solvers, "comma separated solver names")->required();
    cmp->add_option("--maxit", maxit, "iterations or truncation levels");
    cmp->add_option("--inner", inner, "hybrid inner rule: lcurve, oracle or a fixed index");
    cmp->add_option("--in", in, "problem JSON")->required();
    cmp->add_option("-o,--out", out, "output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        apply_thread_cap();
        if (gen->parsed())
            return cmd_gen(problem, n, m, out, noise_opt->count() ? std::optional<double>(noise) : std::nullopt, seed,
                           decay, rho, alpha, beta, eta);
        if (solve->parsed())
            return cmd_solve(in, solver, maxit, inner, out);
        if (diag->parsed())
            return cmd_diagnose(in, metrics, kmax, out);
        if (cmp->parsed())
            return cmd_compare(in, solvers, maxit, inner, out);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const kr::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const kr::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const kr::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
