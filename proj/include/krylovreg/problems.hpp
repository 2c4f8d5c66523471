#pragma once

#include "numerics.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace krylovreg {

enum class ProblemKind { shaw, wing, heat, phillips, deriv2, i_laplace, synthetic };

inline const char* to_string(ProblemKind k)
{
    switch (k) {
    case ProblemKind::shaw: return "shaw";
    case ProblemKind::wing: return "wing";
    case ProblemKind::heat: return "heat";
    case ProblemKind::phillips: return "phillips";
    case ProblemKind::deriv2: return "deriv2";
    case ProblemKind::i_laplace: return "i_laplace";
    case ProblemKind::synthetic: return "synthetic";
    }
    return "unknown";
}

inline ProblemKind parse_problem_kind(const std::string& s)
{
    for (auto k : {ProblemKind::shaw, ProblemKind::wing, ProblemKind::heat, ProblemKind::phillips,
                   ProblemKind::deriv2, ProblemKind::i_laplace, ProblemKind::synthetic})
        if (s == to_string(k))
            return k;
    throw InputError("unknown problem '" + s + "'");
}

struct IllPosedProblem {
    std::string name;
    ProblemKind kind = ProblemKind::synthetic;
    Matrix A;
    Vector b_exact;
    Vector x_true;
    std::optional<SvdTriplet> svd_cache;

    Eigen::Index m() const { return A.rows(); }
    Eigen::Index n() const { return A.cols(); }
};

enum class DecayKind { severe, moderate, mild };

inline const char* to_string(DecayKind d)
{
    switch (d) {
    case DecayKind::severe: return "severe";
    case DecayKind::moderate: return "moderate";
    case DecayKind::mild: return "mild";
    }
    return "unknown";
}

struct SyntheticModel {
    DecayKind decay = DecayKind::severe;
    double rho = std::numbers::e; // severe
    double alpha = 2.0;           // moderate and mild
    double zeta = 1.0;
    double beta = 0.5;
    double eta = 1e-4;
    std::vector<int> multiplicities;

    static SyntheticModel severe(double rho, double beta = 0.5, double eta = 1e-4)
    {
        SyntheticModel s;
        s.decay = DecayKind::severe;
        s.rho = rho;
        s.beta = beta;
        s.eta = eta;
        return s;
    }
    static SyntheticModel power(double alpha, double beta = 0.5, double eta = 1e-4)
    {
        SyntheticModel s;
        s.decay = alpha > 1.0 ? DecayKind::moderate : DecayKind::mild;
        s.alpha = alpha;
        s.beta = beta;
        s.eta = eta;
        return s;
    }

    // sigma of the i-th distinct singular value, i >= 1
    double sigma(int i) const
    {
        if (decay == DecayKind::severe)
            return zeta * std::pow(rho, -static_cast<double>(i));
        return zeta * std::pow(static_cast<double>(i), -alpha);
    }

    void validate() const
    {
        if (zeta <= 0.0 || beta <= 0.0 || eta < 0.0)
            throw InputError("synthetic model: zeta, beta must be positive and eta nonnegative");
        switch (decay) {
        case DecayKind::severe:
            if (!(rho > 1.0))
                throw InputError("synthetic model: severe decay needs rho > 1");
            break;
        case DecayKind::moderate:
            if (!(alpha > 1.0))
                throw InputError("synthetic model: moderate decay needs alpha > 1");
            break;
        case DecayKind::mild:
            if (!(alpha > 0.5 && alpha <= 1.0))
                throw InputError("synthetic model: mild decay needs alpha in (1/2, 1]");
            break;
        }
        for (int c : multiplicities)
            if (c < 1)
                throw InputError("synthetic model: multiplicities must be positive");
    }

    // Continuous crossing point of sigma(k)^(1+beta) = eta.
    double crossing() const
    {
        const double num = std::log(std::pow(zeta, 1.0 + beta) / eta);
        if (decay == DecayKind::severe)
            return num / ((1.0 + beta) * std::log(rho));
        return std::exp(num / (alpha * (1.0 + beta)));
    }

    int k0() const
    {
        if (eta <= 0.0)
            throw InputError("synthetic model: k0 needs a positive noise floor eta");
        if (eta >= std::pow(sigma(1), 1.0 + beta))
            throw InputError("synthetic model: eta exceeds every Fourier coefficient");
        return std::max(1, static_cast<int>(std::floor(crossing())) - 1);
    }
};

struct NoisyInstance {
    IllPosedProblem problem;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    Vector e;
    Vector b;
    std::optional<int> k0_estimate;
};

struct PicardReport {
    Vector sigma;
    Vector fourier;
    Vector fourier_exact;
    Vector ratios;
    int transition_index = 1;
};

namespace detail {

inline IllPosedProblem finish(std::string name, ProblemKind kind, Matrix A, Vector x)
{
    IllPosedProblem p;
    p.name = std::move(name);
    p.kind = kind;
    p.b_exact = A * x;
    p.A = std::move(A);
    p.x_true = std::move(x);
    return p;
}

inline IllPosedProblem make_shaw(int n)
{
    const double h = std::numbers::pi / n;
    Vector t(n);
    for (int i = 0; i < n; ++i)
        t(i) = -std::numbers::pi / 2 + (i + 0.5) * h;
    Matrix A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double c = std::cos(t(i)) + std::cos(t(j));
            const double u = std::numbers::pi * (std::sin(t(i)) + std::sin(t(j)));
            const double s = std::abs(u) < 1e-300 ? 1.0 : std::sin(u) / u;
            A(i, j) = h * (c * s) * (c * s);
        }
    Vector x(n);
    for (int i = 0; i < n; ++i)
        x(i) = 2.0 * std::exp(-6.0 * (t(i) - 0.8) * (t(i) - 0.8)) + std::exp(-2.0 * (t(i) + 0.5) * (t(i) + 0.5));
    return finish("shaw", ProblemKind::shaw, std::move(A), std::move(x));
}

inline IllPosedProblem make_wing(int n)
{
    const double h = 1.0 / n;
    Vector st(n);
    for (int i = 0; i < n; ++i)
        st(i) = (i + 0.5) * h;
    Matrix A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            A(i, j) = h * st(j) * std::exp(-st(i) * st(j) * st(j));
    Vector x(n);
    for (int i = 0; i < n; ++i)
        x(i) = (st(i) > 1.0 / 3.0 && st(i) < 2.0 / 3.0) ? std::sqrt(h) : 0.0;
    return finish("wing", ProblemKind::wing, std::move(A), std::move(x));
}

inline IllPosedProblem make_heat(int n, double kappa = 1.0)
{
    const double h = 1.0 / n;
    const double c = h / (2.0 * kappa * std::sqrt(std::numbers::pi));
    Vector d(n);
    for (int i = 0; i < n; ++i) {
        const double t = h / 2 + i * h;
        d(i) = c * std::pow(t, -1.5) * std::exp(-1.0 / (4.0 * kappa * kappa * t));
    }
    Matrix A = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j)
            A(i, j) = d(i - j);
    Vector x = Vector::Zero(n);
    for (int i = 1; i <= n / 2; ++i) {
        const double ti = i * 20.0 / n;
        double v;
        if (ti < 2.0)
            v = 0.75 * ti * ti / 4.0;
        else if (ti < 3.0)
            v = 0.75 + (ti - 2.0) * (3.0 - ti);
        else
            v = 0.75 * std::exp(-(ti - 3.0) * 2.0);
        x(i - 1) = v;
    }
    return finish("heat", ProblemKind::heat, std::move(A), std::move(x));
}

inline IllPosedProblem make_phillips(int n)
{
    if (n % 4 != 0)
        throw InputError("phillips: n must be a multiple of 4");
    const double h = 12.0 / n;
    const int n4 = n / 4;
    const double pi = std::numbers::pi;
    std::vector<double> c(n4 + 2);
    for (int i = 0; i < n4 + 2; ++i)
        c[i] = std::cos((i - 1) * 4.0 * pi / n);
    Vector r1 = Vector::Zero(n);
    for (int i = 0; i < n4; ++i)
        r1(i) = h + 9.0 / (h * pi * pi) * (2.0 * c[i + 1] - c[i] - c[i + 2]);
    r1(n4) = h / 2 + 9.0 / (h * pi * pi) * (std::cos(4.0 * pi / n) - 1.0);
    Matrix A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            A(i, j) = r1(std::abs(i - j));
    Vector x = Vector::Zero(n);
    const double cc = pi / 3.0;
    for (int i = 0; i < n4; ++i) {
        const double d = std::sin((i + 1) * h * cc) - std::sin(i * h * cc);
        x(2 * n4 + i) = (h + d / cc) / std::sqrt(h);
    }
    for (int i = 0; i < n4; ++i)
        x(n4 + i) = x(3 * n4 - 1 - i);
    return finish("phillips", ProblemKind::phillips, std::move(A), std::move(x));
}

inline IllPosedProblem make_deriv2(int n)
{
    const double h = 1.0 / n;
    const double h2 = h * h;
    Matrix A(n, n);
    for (int i = 1; i <= n; ++i) {
        A(i - 1, i - 1) = h2 * ((i * i - i + 0.25) * h - (i - 2.0 / 3.0));
        for (int j = 1; j < i; ++j) {
            A(i - 1, j - 1) = h2 * (j - 0.5) * ((i - 0.5) * h - 1.0);
            A(j - 1, i - 1) = A(i - 1, j - 1);
        }
    }
    // hat-shaped solution
    Vector x(n);
    const double sqhi = 1.0 / std::sqrt(h);
    for (int i = 1; i <= n; ++i) {
        const double half = ((i * h) * (i * h) - ((i - 1) * h) * ((i - 1) * h)) / 2.0;
        x(i - 1) = 2 * i <= n ? sqhi * half : sqhi * (h - half);
    }
    return finish("deriv2", ProblemKind::deriv2, std::move(A), std::move(x));
}

inline IllPosedProblem make_i_laplace(int n)
{
    Vector diag(n), sub(n - 1);
    for (int i = 0; i < n; ++i)
        diag(i) = 2.0 * i + 1.0;
    for (int i = 0; i < n - 1; ++i)
        sub(i) = -(i + 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericalError("i_laplace: Gauss-Laguerre nodes did not converge");
    const Vector t = es.eigenvalues();

    // Gauss-Laguerre weights w = t / ((n+1)^2 L_{n+1}(t)^2), kept in log form
    Vector lw(n);
    for (int j = 0; j < n; ++j) {
        const double tj = t(j);
        double p0 = 1.0, p1 = 1.0 - tj, lscale = 0.0;
        for (int k = 1; k <= n; ++k) {
            const double p2 = ((2.0 * k + 1.0 - tj) * p1 - k * p0) / (k + 1.0);
            p0 = p1;
            p1 = p2;
            const double mag = std::abs(p1);
            if (mag > 1e100) {
                p0 /= mag;
                p1 /= mag;
                lscale += std::log(mag);
            }
        }
        lw(j) = std::log(tj) - 2.0 * std::log(n + 1.0) - 2.0 * (std::log(std::abs(p1)) + lscale);
    }
    Matrix A(n, n);
    for (int i = 0; i < n; ++i) {
        const double s = 10.0 * (i + 1.0) / n;
        for (int j = 0; j < n; ++j)
            A(i, j) = std::exp(lw(j) + (1.0 - s) * t(j));
    }
    Vector x(n);
    for (int j = 0; j < n; ++j)
        x(j) = std::exp(-t(j) / 2.0);
    return finish("i_laplace", ProblemKind::i_laplace, std::move(A), std::move(x));
}

inline Matrix random_orthonormal(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    Matrix G(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i)
            G(i, j) = rng.normal();
    return thin_qr(G);
}

} // namespace detail

inline IllPosedProblem generate(ProblemKind kind, int n)
{
    if (n < 8)
        throw InputError("generate: n must be at least 8");
    switch (kind) {
    case ProblemKind::shaw: return detail::make_shaw(n);
    case ProblemKind::wing: return detail::make_wing(n);
    case ProblemKind::heat: return detail::make_heat(n);
    case ProblemKind::phillips: return detail::make_phillips(n);
    case ProblemKind::deriv2: return detail::make_deriv2(n);
    case ProblemKind::i_laplace: return detail::make_i_laplace(n);
    case ProblemKind::synthetic: break;
    }
    throw InputError("generate: synthetic problems need a model");
}

inline const SvdTriplet& ensure_svd(IllPosedProblem& p)
{
    if (!p.svd_cache)
        p.svd_cache = svd(p.A);
    return *p.svd_cache;
}

// Distinct singular values are expanded by the model's multiplicities; indices beyond
// the listed groups continue the decay as simple values. b_exact has exactly one
// unit-length component per distinct value, with |u^T b_exact| = sigma^(1+beta).
inline IllPosedProblem generate_synthetic(const SyntheticModel& model, int m, int n, std::uint64_t seed)
{
    model.validate();
    if (n < 1 || m < n)
        throw InputError("generate_synthetic: need m >= n >= 1");
    if (model.eta > 0.0 && model.eta >= std::pow(model.sigma(1), 1.0 + model.beta))
        throw InputError("generate_synthetic: eta exceeds every sigma^(1+beta)");

    std::vector<int> counts = model.multiplicities;
    int used = 0;
    for (int c : counts)
        used += c;
    if (used > n)
        throw InputError("generate_synthetic: multiplicities exceed n");
    while (used < n) {
        counts.push_back(1);
        ++used;
    }

    Rng rng(seed);
    Matrix U = detail::random_orthonormal(rng, m, n);
    Matrix V = detail::random_orthonormal(rng, n, n);

    Vector sigma(n);
    Vector coef = Vector::Zero(n);
    int idx = 0;
    for (std::size_t g = 0; g < counts.size(); ++g) {
        const double s = model.sigma(static_cast<int>(g) + 1);
        coef(idx) = std::pow(s, 1.0 + model.beta);
        for (int c = 0; c < counts[g]; ++c)
            sigma(idx++) = s;
    }

    IllPosedProblem p;
    p.name = std::string("synthetic_") + to_string(model.decay);
    p.kind = ProblemKind::synthetic;
    p.A = U * sigma.asDiagonal() * V.transpose();
    p.b_exact = U * coef;
    p.x_true = V * coef.cwiseQuotient(sigma);
    p.svd_cache = SvdTriplet{std::move(U), std::move(sigma), std::move(V)};
    return p;
}

namespace detail {

inline int transition_index(const Vector& fourier)
{
    const Eigen::Index n = fourier.size();
    const Eigen::Index start = n - std::max<Eigen::Index>(1, n / 4);
    std::vector<double> tail(fourier.data() + start, fourier.data() + n);
    std::nth_element(tail.begin(), tail.begin() + tail.size() / 2, tail.end());
    double med = tail[tail.size() / 2];
    if (tail.size() % 2 == 0) {
        const double lo = *std::max_element(tail.begin(), tail.begin() + tail.size() / 2);
        med = 0.5 * (med + lo);
    }
    // smallest k whose successor coefficient has dropped to the noise level
    for (Eigen::Index k = 1; k < n; ++k)
        if (fourier(k) <= 2.0 * med)
            return static_cast<int>(k);
    return static_cast<int>(n);
}

} // namespace detail

inline PicardReport picard_data(const NoisyInstance& inst, const SvdTriplet& s)
{
    if (s.U.rows() != inst.b.size())
        throw InputError("picard_data: svd does not match the instance");
    PicardReport r;
    r.sigma = s.sigma;
    r.fourier = (s.U.transpose() * inst.b).cwiseAbs();
    r.fourier_exact = (s.U.transpose() * inst.problem.b_exact).cwiseAbs();
    r.ratios = r.fourier.cwiseQuotient(s.sigma);
    r.transition_index = detail::transition_index(r.fourier);
    return r;
}

inline NoisyInstance noiseless(IllPosedProblem p)
{
    NoisyInstance inst;
    inst.b = p.b_exact;
    inst.e = Vector::Zero(p.b_exact.size());
    inst.problem = std::move(p);
    return inst;
}

inline NoisyInstance add_noise(IllPosedProblem p, double epsilon, std::uint64_t seed)
{
    if (!(epsilon > 0.0))
        throw InputError("add_noise: epsilon must be positive");
    const double bn = p.b_exact.norm();
    if (bn == 0.0)
        throw InputError("add_noise: exact right-hand side is zero");
    Rng rng(seed);
    Vector g(p.b_exact.size());
    for (Eigen::Index i = 0; i < g.size(); ++i)
        g(i) = rng.normal();
    NoisyInstance inst;
    inst.epsilon = epsilon;
    inst.seed = seed;
    inst.e = (epsilon * bn / g.norm()) * g;
    inst.b = p.b_exact + inst.e;
    inst.problem = std::move(p);
    if (inst.problem.svd_cache)
        inst.k0_estimate = picard_data(inst, *inst.problem.svd_cache).transition_index;
    return inst;
}

// Right-hand side following the idealized model exactly: sigma^(1+beta) up to k0,
// then the flat floor eta.
inline NoisyInstance model_instance(const IllPosedProblem& p, const SyntheticModel& model)
{
    if (!p.svd_cache || p.kind != ProblemKind::synthetic)
        throw InputError("model_instance: needs a synthetic problem");
    if (!model.multiplicities.empty())
        throw InputError("model_instance: multiplicities are not supported");
    const int k0 = model.k0();
    const SvdTriplet& s = *p.svd_cache;
    Vector coef(s.sigma.size());
    for (Eigen::Index i = 0; i < coef.size(); ++i)
        coef(i) = i < k0 ? std::pow(s.sigma(i), 1.0 + model.beta) : model.eta;
    NoisyInstance inst;
    inst.problem = p;
    inst.b = s.U * coef;
    inst.e = inst.b - p.b_exact;
    inst.epsilon = inst.e.norm() / p.b_exact.norm();
    inst.k0_estimate = k0;
    return inst;
}

} // namespace krylovreg
