#include <krylovreg/io.hpp>
#include <krylovreg/krylovreg.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <sys/wait.h>

using namespace krylovreg;
namespace fs = std::filesystem;

namespace {

fs::path workdir()
{
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("krylovreg_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

int run(const std::string& args)
{
    const std::string cmd = std::string(KRYLOVREG_CLI) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string l;
    while (std::getline(in, l))
        out.push_back(l);
    return out;
}

// column of a compare CSV by header name
std::vector<double> column(const std::string& text, const std::string& name)
{
    std::vector<std::string> header;
    std::vector<double> out;
    for (const auto& l : lines(text)) {
        if (l.empty() || l[0] == '#')
            continue;
        std::vector<std::string> cells;
        std::string c;
        std::istringstream ls(l);
        while (std::getline(ls, c, ','))
            cells.push_back(c);
        if (header.empty()) {
            header = cells;
            continue;
        }
        const auto idx = std::find(header.begin(), header.end(), name) - header.begin();
        if (idx < static_cast<long>(cells.size()) && !cells[idx].empty())
            out.push_back(std::stod(cells[idx]));
    }
    return out;
}

const std::string& shaw_file()
{
    static const std::string p = [] {
        const std::string f = path("shaw256.json");
        EXPECT_EQ(run("gen --problem shaw --n 256 --noise 1e-3 --seed 7 -o " + f), 0);
        return f;
    }();
    return p;
}

} // namespace

TEST(Io, ProblemRoundTripIsLossless)
{
    const auto inst = add_noise(generate(ProblemKind::shaw, 16), 1e-3, 7);
    const auto back = instance_from_string(instance_to_string(inst, true));
    EXPECT_EQ(back.problem.A, inst.problem.A);
    EXPECT_EQ(back.problem.b_exact, inst.problem.b_exact);
    EXPECT_EQ(back.problem.x_true, inst.problem.x_true);
    EXPECT_EQ(back.b, inst.b);
    EXPECT_EQ(back.e, inst.e);
    EXPECT_EQ(back.epsilon, inst.epsilon);
    EXPECT_EQ(back.seed, inst.seed);
    EXPECT_EQ(back.problem.name, "shaw");
}

TEST(Io, TraceRoundTripIsBitExact)
{
    auto inst = add_noise(generate(ProblemKind::deriv2, 64), 1e-3, 7);
    const auto t = hybrid_lsqr(inst, 20);
    const auto back = trace_from_csv(trace_to_csv(t));
    ASSERT_EQ(back.records.size(), t.records.size());
    EXPECT_EQ(back.solver, t.solver);
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        EXPECT_EQ(back.records[i].k, t.records[i].k);
        EXPECT_EQ(back.records[i].residual_norm, t.records[i].residual_norm);
        EXPECT_EQ(back.records[i].normal_residual_norm, t.records[i].normal_residual_norm);
        EXPECT_EQ(back.records[i].solution_norm, t.records[i].solution_norm);
        EXPECT_EQ(back.records[i].rel_error, t.records[i].rel_error);
        EXPECT_EQ(back.records[i].inner_truncation, t.records[i].inner_truncation);
    }
}

TEST(Io, RejectsMalformedProblem)
{
    EXPECT_THROW(instance_from_string("{"), InputError);
    EXPECT_THROW(instance_from_string(R"({"schema_version":1,"name":"x"})"), InputError);
    EXPECT_THROW(
        instance_from_string(
            R"({"schema_version":1,"name":"x","m":2,"n":2,"matrix":[1,2,3],"b_exact":[1,2],"x_true":[1,2]})"),
        InputError);
}

TEST(CliGen, WritesLosslessJson)
{
    const std::string f = path("shaw16.json");
    ASSERT_EQ(run("gen --problem shaw --n 16 -o " + f), 0);
    const auto inst = instance_from_string(read_file(f));
    const auto ref = generate(ProblemKind::shaw, 16);
    EXPECT_EQ(inst.problem.A, ref.A);
    EXPECT_EQ(inst.problem.b_exact, ref.b_exact);
    EXPECT_EQ(inst.problem.x_true, ref.x_true);
    EXPECT_NE(read_file(f).find("\"schema_version\""), std::string::npos);
    EXPECT_EQ(read_file(f).find("\"noise\""), std::string::npos);
}

TEST(CliGen, Deterministic)
{
    const std::string a = path("det_a.json"), b = path("det_b.json");
    ASSERT_EQ(run("gen --problem heat --n 32 --noise 1e-3 --seed 7 -o " + a), 0);
    ASSERT_EQ(run("gen --problem heat --n 32 --noise 1e-3 --seed 7 -o " + b), 0);
    EXPECT_EQ(read_file(a), read_file(b));
    EXPECT_NE(read_file(a).find("\"noise\""), std::string::npos);
}

TEST(CliGen, UsageErrors)
{
    EXPECT_EQ(run("gen --problem shaw --n 0 -o " + path("zero.json")), 2);
    EXPECT_EQ(run("gen --problem baart --n 16 -o " + path("baart.json")), 2);
    EXPECT_EQ(run("gen --problem shaw --n 16 -o /nonexistent_dir/x.json"), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_FALSE(fs::exists(path("zero.json")));
}

TEST(CliSolve, HeaderRowsAndRoundTrip)
{
    const std::string out = path("trace.csv");
    ASSERT_EQ(run("solve --solver lsqr --maxit 30 --in " + shaw_file() + " -o " + out), 0);
    const std::string text = read_file(out);
    const auto ls = lines(text);
    ASSERT_GE(ls.size(), 3u);
    EXPECT_EQ(ls[0].rfind("# schema_version=", 0), 0u);
    EXPECT_EQ(ls[1], "k,residual_norm,atr_norm,solution_norm,rel_error,inner_trunc");
    EXPECT_EQ(text.find('\r'), std::string::npos);

    const auto t = trace_from_csv(text);
    EXPECT_LE(t.records.size(), 30u);
    for (std::size_t i = 0; i < t.records.size(); ++i)
        EXPECT_EQ(t.records[i].k, int(i) + 1);

    const auto ref = lsqr(instance_from_string(read_file(shaw_file())), 30);
    ASSERT_EQ(ref.records.size(), t.records.size());
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        EXPECT_EQ(t.records[i].residual_norm, ref.records[i].residual_norm);
        EXPECT_EQ(t.records[i].rel_error, ref.records[i].rel_error);
        EXPECT_FALSE(t.records[i].inner_truncation.has_value());
    }
}

TEST(CliSolve, Errors)
{
    EXPECT_EQ(run("solve --solver lsqr --maxit 5 --in " + path("missing.json") + " -o " + path("m.csv")), 2);
    const std::string rect = path("rect.json");
    ASSERT_EQ(run("gen --problem synthetic --decay severe --m 30 --n 20 -o " + rect), 0);
    EXPECT_EQ(run("solve --solver gmres --maxit 5 --in " + rect + " -o " + path("g.csv")), 2);
    EXPECT_EQ(run("solve --solver lsqr --maxit 5 --in " + rect + " -o " + path("g.csv")), 0);
    EXPECT_EQ(run("solve --solver bicg --maxit 5 --in " + rect + " -o " + path("g.csv")), 2);
}

TEST(CliSolve, ThreadCap)
{
    const std::string out = path("threads.csv");
    EXPECT_EQ(run("solve --solver cgls --maxit 5 --in " + shaw_file() + " -o " + out), 0);
    const std::string ref = read_file(out);
    const std::string cmd = "KRYLOVREG_THREADS=2 " + std::string(KRYLOVREG_CLI) + " solve --solver cgls --maxit 5 --in " +
                            shaw_file() + " -o " + out;
    EXPECT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_EQ(read_file(out), ref);
    const std::string bad = "KRYLOVREG_THREADS=zero " + std::string(KRYLOVREG_CLI) + " solve --in " + shaw_file() +
                            " -o " + out + " 2>/dev/null";
    const int status = std::system(bad.c_str());
    EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST(CliDiagnose, OnlyRequestedKeys)
{
    const std::string out = path("rep.json");
    ASSERT_EQ(run("diagnose --metrics gamma,classify --kmax 20 --in " + shaw_file() + " -o " + out), 0);
    const auto j = nlohmann::json::parse(read_file(out));
    std::set<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it)
        keys.insert(it.key());
    EXPECT_EQ(keys, (std::set<std::string>{"schema_version", "gamma", "gamma_lower", "near_best", "classify"}));
    EXPECT_EQ(j["classify"]["classification"], "severe");
    const auto g = j["gamma"].get<std::vector<double>>();
    for (std::size_t i = 1; i < g.size(); ++i)
        EXPECT_LT(g[i], g[i - 1]);
}

TEST(CliDiagnose, AllMetrics)
{
    const std::string out = path("rep_all.json");
    ASSERT_EQ(run("diagnose --metrics gamma,sintheta,ritz,filters,classify --kmax 10 --in " + shaw_file() + " -o " + out), 0);
    const auto j = nlohmann::json::parse(read_file(out));
    EXPECT_EQ(j["ritz"].size(), 10u);
    EXPECT_EQ(j["filters"].size(), 10u);
    EXPECT_EQ(j["sin_theta"].size(), 10u);
}

TEST(CliDiagnose, UnknownMetric)
{
    EXPECT_EQ(run("diagnose --metrics gamma,entropy --in " + shaw_file() + " -o " + path("bad.json")), 2);
}

TEST(CliCompare, ShawCornersForBothSolvers)
{
    const std::string out = path("cmp.csv");
    ASSERT_EQ(run("compare --solvers lsqr,tsvd --maxit 30 --in " + shaw_file() + " -o " + out), 0);
    const std::string text = read_file(out);
    EXPECT_EQ(text.rfind("# schema_version=", 0), 0u);
    EXPECT_NE(text.find("# lsqr lcurve_corner="), std::string::npos);
    EXPECT_NE(text.find("# tsvd lcurve_corner="), std::string::npos);
    EXPECT_EQ(column(text, "tsvd_rel_error").size(), 30u);
}

TEST(CliCompare, HybridBeatsLsqrOnDeriv2)
{
    const std::string in = path("deriv2.json"), out = path("cmp_d2.csv");
    ASSERT_EQ(run("gen --problem deriv2 --n 256 --noise 1e-3 --seed 7 -o " + in), 0);
    ASSERT_EQ(run("compare --solvers lsqr,hybrid_lsqr --inner oracle --maxit 30 --in " + in + " -o " + out), 0);
    const std::string text = read_file(out);
    const auto a = column(text, "lsqr_rel_error"), h = column(text, "hybrid_lsqr_rel_error");
    ASSERT_FALSE(a.empty());
    ASSERT_FALSE(h.empty());
    EXPECT_LT(*std::min_element(h.begin(), h.end()), *std::min_element(a.begin(), a.end()));
}

TEST(CliCompare, SingleSolverMatchesSolve)
{
    const std::string cmp = path("single.csv"), sol = path("single_solve.csv");
    ASSERT_EQ(run("compare --solvers lsqr --maxit 20 --in " + shaw_file() + " -o " + cmp), 0);
    ASSERT_EQ(run("solve --solver lsqr --maxit 20 --in " + shaw_file() + " -o " + sol), 0);
    const auto t = trace_from_csv(read_file(sol));
    const auto err = column(read_file(cmp), "lsqr_rel_error");
    ASSERT_EQ(err.size(), t.records.size());
    for (std::size_t i = 0; i < err.size(); ++i)
        EXPECT_EQ(err[i], *t.records[i].rel_error);
    EXPECT_NE(read_file(cmp).find("lcurve_corner="), std::string::npos);
}
