#pragma once

#include "bidiag.hpp"
#include "paramchoice.hpp"
#include "problems.hpp"
#include "trace.hpp"

#include <algorithm>
#include <string>

namespace krylovreg {

struct InnerRule {
    enum class Kind { lcurve, oracle, fixed } kind = Kind::lcurve;
    int j = 0;

    static InnerRule lcurve() { return {Kind::lcurve, 0}; }
    static InnerRule oracle() { return {Kind::oracle, 0}; }
    static InnerRule fixed(int j) { return {Kind::fixed, j}; }
};

namespace detail {

inline StepRecord make_record(const NoisyInstance& inst, int k, const Vector& x)
{
    const Matrix& A = inst.problem.A;
    Vector r = inst.b - A * x;
    StepRecord rec;
    rec.k = k;
    rec.residual_norm = r.norm();
    rec.normal_residual_norm = (A.transpose() * r).norm();
    rec.solution_norm = x.norm();
    const double xt = inst.problem.x_true.norm();
    if (inst.problem.x_true.size() == x.size() && xt > 0.0)
        rec.rel_error = (x - inst.problem.x_true).norm() / xt;
    return rec;
}

inline void push(SolverTrace& t, const NoisyInstance& inst, int k, const Vector& x, bool store)
{
    t.records.push_back(make_record(inst, k, x));
    if (store)
        t.iterates.push_back(x);
}

inline void check_maxit(const NoisyInstance& inst, int maxit, const char* who)
{
    const auto lim = std::min(inst.problem.m(), inst.problem.n());
    if (maxit < 1 || maxit > lim)
        throw InputError(std::string(who) + ": maxit = " + std::to_string(maxit) + " out of range [1, " +
                         std::to_string(lim) + "]");
}

// Truncated SVD solution of the projected problem min ||B y - c|| keeping j terms.
struct ProjectedSvd {
    SvdTriplet s;
    Vector coeffs; // U^T c

    ProjectedSvd(const Matrix& B, const Vector& c) : s(svd(B)), coeffs(s.U.transpose() * c) {}

    // singular values at or below the default rank tolerance count as zero
    Vector solve(int j) const
    {
        Vector y = Vector::Zero(s.V.rows());
        const double cut = 1e-14 * s.sigma(0);
        for (int i = 0; i < j && s.sigma(i) > cut; ++i)
            y.noalias() += (coeffs(i) / s.sigma(i)) * s.V.col(i);
        return y;
    }
};

} // namespace detail

inline SolverTrace lsqr(const NoisyInstance& inst, int maxit, bool store_iterates = false)
{
    detail::check_maxit(inst, maxit, "lsqr");
    Bidiagonalization f = lanczos_bidiag(inst.problem.A, inst.b, maxit);
    SolverTrace t;
    t.solver = SolverKind::lsqr;
    for (int k = 1; k <= f.steps; ++k) {
        Vector c = Vector::Zero(k + 1);
        c(0) = f.beta1;
        detail::ProjectedSvd ps(bidiag_matrix(f, k), c);
        detail::push(t, inst, k, f.Q.leftCols(k) * ps.solve(k), store_iterates);
    }
    return t;
}

inline SolverTrace cgls(const NoisyInstance& inst, int maxit, bool store_iterates = false)
{
    detail::check_maxit(inst, maxit, "cgls");
    const Matrix& A = inst.problem.A;
    Vector x = Vector::Zero(A.cols());
    Vector r = inst.b;
    Vector s = A.transpose() * r;
    Vector p = s;
    double gamma = s.squaredNorm();
    SolverTrace t;
    t.solver = SolverKind::cgls;
    for (int k = 1; k <= maxit; ++k) {
        if (gamma == 0.0)
            break;
        Vector q = A * p;
        const double qq = q.squaredNorm();
        if (qq == 0.0)
            break;
        const double a = gamma / qq;
        x += a * p;
        r -= a * q;
        s = A.transpose() * r;
        const double g2 = s.squaredNorm();
        p = s + (g2 / gamma) * p;
        gamma = g2;
        detail::push(t, inst, k, x, store_iterates);
    }
    return t;
}

// MINRES on the normal equations: minimizes ||A^T(b - A x)|| over span(Q_k). With
// A^T P_{k+1} = Q_{k+1} Bbar_k^T the objective is ||Bbar_k^T (beta1 e1 - B_k y)||;
// it is solved through a QR of B_k to avoid squaring the condition number.
inline SolverTrace lsmr(const NoisyInstance& inst, int maxit, bool store_iterates = false)
{
    detail::check_maxit(inst, maxit, "lsmr");
    Bidiagonalization f = lanczos_bidiag(inst.problem.A, inst.b, maxit);
    SolverTrace t;
    t.solver = SolverKind::lsmr;
    for (int k = 1; k <= f.steps; ++k) {
        Matrix B = bidiag_matrix(f, k);
        Matrix Bt = Matrix::Zero(k + 1, k + 1); // Bbar_k^T
        Bt.leftCols(k) = B;
        Bt.transposeInPlace();
        Bt(k, k) = (k < f.steps) ? f.alpha(k) : f.alpha_next;
        Eigen::HouseholderQR<Matrix> qr(B);
        Matrix Qb = qr.householderQ() * Matrix::Identity(k + 1, k);
        Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        Vector rhs = Vector::Zero(k + 1);
        rhs(0) = f.beta1 * f.alpha(0);
        Vector z = min_norm_lstsq(Bt * Qb, rhs);
        Vector y = R.triangularView<Eigen::Upper>().solve(z);
        detail::push(t, inst, k, f.Q.leftCols(k) * y, store_iterates);
    }
    return t;
}

inline SolverTrace cgme(const NoisyInstance& inst, int maxit, bool store_iterates = false)
{
    detail::check_maxit(inst, maxit, "cgme");
    Bidiagonalization f = lanczos_bidiag(inst.problem.A, inst.b, maxit);
    SolverTrace t;
    t.solver = SolverKind::cgme;
    Vector y = Vector::Zero(f.steps);
    for (int k = 1; k <= f.steps; ++k) {
        // forward substitution on the lower bidiagonal Bbar_{k-1}
        const int j = k - 1;
        const double rhs = (j == 0) ? f.beta1 : -f.beta(j - 1) * y(j - 1);
        if (f.alpha(j) == 0.0) {
            t.params["singular_step"] = {static_cast<double>(k)};
            break;
        }
        y(j) = rhs / f.alpha(j);
        detail::push(t, inst, k, f.Q.leftCols(k) * y.head(k), store_iterates);
    }
    return t;
}

inline SolverTrace tsvd_family(const NoisyInstance& inst, const SvdTriplet& s, int kmax, bool store_iterates = false)
{
    const int r = static_cast<int>(s.sigma.size());
    if (kmax < 1 || kmax > r)
        throw InputError("tsvd_family: kmax out of range");
    SolverTrace t;
    t.solver = SolverKind::tsvd;
    Vector c = s.U.transpose() * inst.b;
    Vector x = Vector::Zero(s.V.rows());
    for (int k = 1; k <= kmax; ++k) {
        x += (c(k - 1) / s.sigma(k - 1)) * s.V.col(k - 1);
        detail::push(t, inst, k, x, store_iterates);
    }
    return t;
}

inline SolverTrace tikhonov_family(const NoisyInstance& inst, const SvdTriplet& s, const std::vector<double>& lambdas,
                                   bool store_iterates = false)
{
    SolverTrace t;
    t.solver = SolverKind::tikhonov;
    Vector c = s.U.transpose() * inst.b;
    int k = 0;
    for (double lam : lambdas) {
        if (!(lam > 0.0))
            throw InputError("tikhonov_family: lambdas must be positive");
        Vector x = Vector::Zero(s.V.rows());
        for (Eigen::Index i = 0; i < s.sigma.size(); ++i) {
            const double sg = s.sigma(i);
            if (sg == 0.0)
                continue;
            x += (sg * c(i) / (sg * sg + lam * lam)) * s.V.col(i);
        }
        detail::push(t, inst, ++k, x, store_iterates);
    }
    t.params["lambda"] = lambdas;
    return t;
}

inline SolverTrace hybrid_lsqr(const NoisyInstance& inst, int maxit, InnerRule rule = InnerRule::lcurve(),
                               bool store_iterates = false)
{
    detail::check_maxit(inst, maxit, "hybrid_lsqr");
    if (rule.kind == InnerRule::Kind::fixed && rule.j < 1)
        throw InputError("hybrid_lsqr: fixed inner truncation must be positive");
    if (rule.kind == InnerRule::Kind::oracle && inst.problem.x_true.size() == 0)
        throw InputError("hybrid_lsqr: oracle rule needs x_true");
    Bidiagonalization f = lanczos_bidiag(inst.problem.A, inst.b, maxit);
    SolverTrace t;
    t.solver = SolverKind::hybrid_lsqr;
    for (int k = 1; k <= f.steps; ++k) {
        Vector c = Vector::Zero(k + 1);
        c(0) = f.beta1;
        detail::ProjectedSvd ps(bidiag_matrix(f, k), c);
        const auto Qk = f.Q.leftCols(k);
        int j = k;
        switch (rule.kind) {
        case InnerRule::Kind::fixed:
            j = std::min(rule.j, k);
            break;
        case InnerRule::Kind::oracle: {
            double best = 0.0;
            for (int i = 1; i <= k; ++i) {
                const double err = (Qk * ps.solve(i) - inst.problem.x_true).norm();
                if (i == 1 || err < best) {
                    best = err;
                    j = i;
                }
            }
            break;
        }
        case InnerRule::Kind::lcurve: {
            if (k < 4)
                break;
            // projected residual and solution norms of the inner TSVD family
            Vector rn(k), sn(k);
            const double total = c.squaredNorm();
            double captured = 0.0, ynorm2 = 0.0;
            for (int i = 1; i <= k; ++i) {
                const double ci = ps.coeffs(i - 1);
                if (ps.s.sigma(i - 1) > 1e-14 * ps.s.sigma(0)) {
                    captured += ci * ci;
                    ynorm2 += (ci / ps.s.sigma(i - 1)) * (ci / ps.s.sigma(i - 1));
                }
                rn(i - 1) = std::sqrt(std::max(total - captured, 0.0));
                sn(i - 1) = std::sqrt(ynorm2);
            }
            const double floor = 1e-300 + machine_eps * std::sqrt(total);
            for (int i = 0; i < k; ++i)
                rn(i) = std::max(rn(i), floor);
            try {
                j = lcurve_corner(rn, sn).corner_index;
            } catch (const NumericalError&) {
                j = k;
            }
            break;
        }
        }
        detail::push(t, inst, k, Qk * ps.solve(j), store_iterates);
        t.records.back().inner_truncation = j;
    }
    return t;
}

enum class GmresVariant { gmres, rrgmres };

inline SolverTrace gmres(const NoisyInstance& inst, int maxit, GmresVariant variant = GmresVariant::gmres,
                         bool store_iterates = false)
{
    const Matrix& A = inst.problem.A;
    if (A.rows() != A.cols())
        throw InputError("gmres: matrix must be square");
    detail::check_maxit(inst, maxit, "gmres");
    const Vector start = variant == GmresVariant::gmres ? inst.b : Vector(A * inst.b);
    ArnoldiFactorization a = arnoldi(A, start, maxit);
    SolverTrace t;
    t.solver = variant == GmresVariant::gmres ? SolverKind::gmres : SolverKind::rrgmres;
    for (int k = 1; k <= a.steps; ++k) {
        const bool last_square = a.terminated_early && k == a.steps;
        const int rows = last_square ? k : k + 1;
        Matrix Hk = a.H.topLeftCorner(rows, k);
        Vector c = a.W.leftCols(rows).transpose() * inst.b;
        Vector y = min_norm_lstsq(Hk, c);
        detail::push(t, inst, k, a.W.leftCols(k) * y, store_iterates);
    }
    return t;
}

} // namespace krylovreg
