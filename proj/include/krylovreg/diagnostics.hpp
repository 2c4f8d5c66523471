#pragma once

#include "bidiag.hpp"
#include "problems.hpp"
#include "solvers.hpp"
#include "trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace krylovreg {

enum class VerdictStatus { pass, fail, inapplicable };

inline const char* to_string(VerdictStatus s)
{
    switch (s) {
    case VerdictStatus::pass: return "pass";
    case VerdictStatus::fail: return "fail";
    case VerdictStatus::inapplicable: return "inapplicable";
    }
    return "unknown";
}

// lhs <= rhs (or lhs < rhs when strict); margin = rhs - lhs.
struct Verdict {
    std::string name;
    int k = 0;
    int index = 0;
    VerdictStatus status = VerdictStatus::pass;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    double slack = 1.0;
    std::string note;

    bool passed() const { return status != VerdictStatus::fail; }
};

inline Verdict check_le(std::string name, int k, double lhs, double rhs, double tol = 0.0, double slack = 1.0,
                        int index = 0)
{
    Verdict v;
    v.name = std::move(name);
    v.k = k;
    v.index = index;
    v.lhs = lhs;
    v.rhs = rhs;
    v.margin = rhs - lhs;
    v.slack = slack;
    v.status = (std::isfinite(lhs) && lhs <= rhs + tol) ? VerdictStatus::pass : VerdictStatus::fail;
    return v;
}

inline Verdict check_lt(std::string name, int k, double lhs, double rhs, double tol = 0.0, double slack = 1.0,
                        int index = 0)
{
    Verdict v = check_le(std::move(name), k, lhs, rhs, 0.0, slack, index);
    v.status = (std::isfinite(lhs) && lhs < rhs + tol) ? VerdictStatus::pass : VerdictStatus::fail;
    return v;
}

inline Verdict inapplicable(std::string name, int k, std::string why)
{
    Verdict v;
    v.name = std::move(name);
    v.k = k;
    v.status = VerdictStatus::inapplicable;
    v.note = std::move(why);
    return v;
}

// ---------------------------------------------------------------- rank-k errors

inline double rank_approx_error(const Matrix& A, const Bidiagonalization& f, int k)
{
    if (k < 1 || k > f.steps)
        throw InputError("rank_approx_error: k out of range");
    return spectral_norm(A - f.P.leftCols(k + 1) * bidiag_matrix(f, k) * f.Q.leftCols(k).transpose());
}

// ||G_k||, the trailing block of the complete bidiagonal B_n.
inline double gamma_trailing_block(const Bidiagonalization& f, int k)
{
    const Eigen::Index n = f.Q.rows();
    if (f.steps < n && !f.terminated_early)
        throw InputError("gamma_trailing_block: factorization too short");
    if (k < 1 || k > f.steps)
        throw InputError("gamma_trailing_block: k out of range");
    if (k == f.steps)
        return std::abs(f.beta(k - 1));
    const Matrix B = bidiag_matrix(f, f.steps);
    return spectral_norm(B.bottomRightCorner(f.steps + 1 - k, f.steps - k));
}

// ||A^T A - Q_{k+1} Q_{k+1}^T A^T A Q_k Q_k^T||
inline double lsmr_rank_error(const Matrix& A, const Bidiagonalization& f, int k)
{
    if (k < 1 || k > f.steps)
        throw InputError("lsmr_rank_error: k out of range");
    Matrix Q1(A.cols(), k + 1);
    Q1.leftCols(k) = f.Q.leftCols(k);
    if (k < f.steps)
        Q1.col(k) = f.Q.col(k);
    else if (f.q_next.size() == A.cols())
        Q1.col(k) = f.q_next;
    else
        throw InputError("lsmr_rank_error: needs q_{k+1}");
    const Matrix AtA = A.transpose() * A;
    const auto Qk = f.Q.leftCols(k);
    return spectral_norm(AtA - Q1 * (Q1.transpose() * AtA * Qk) * Qk.transpose());
}

// ||A^T A - Q_k Q_k^T A^T A Q_k Q_k^T||
inline double lsqr_normal_rank_error(const Matrix& A, const Bidiagonalization& f, int k)
{
    if (k < 1 || k > f.steps)
        throw InputError("lsqr_normal_rank_error: k out of range");
    const Matrix AtA = A.transpose() * A;
    const auto Qk = f.Q.leftCols(k);
    return spectral_norm(AtA - Qk * (Qk.transpose() * AtA * Qk) * Qk.transpose());
}

struct CgmeRankError {
    double cgme = 0.0;      // ||A - P_k Bbar_{k-1} Q_k^T||
    double left_proj = 0.0; // ||(I - P_{k+1} P_{k+1}^T) A||
};

inline CgmeRankError cgme_rank_error(const Matrix& A, const Bidiagonalization& f, int k)
{
    if (k < 1 || k > f.steps)
        throw InputError("cgme_rank_error: k out of range");
    CgmeRankError e;
    e.cgme = spectral_norm(A - f.P.leftCols(k) * bidiag_bar(f, k) * f.Q.leftCols(k).transpose());
    const auto P1 = f.P.leftCols(k + 1);
    e.left_proj = spectral_norm(A - P1 * (P1.transpose() * A));
    return e;
}

inline double gmres_rank_error(const Matrix& A, const ArnoldiFactorization& a, int k)
{
    if (A.rows() != A.cols())
        throw InputError("gmres_rank_error: matrix must be square");
    if (k < 1 || k > a.steps)
        throw InputError("gmres_rank_error: k out of range");
    const Eigen::Index rows = std::min<Eigen::Index>(k + 1, a.W.cols());
    return spectral_norm(A - a.W.leftCols(rows) * a.H.topLeftCorner(rows, k) * a.W.leftCols(k).transpose());
}

inline double projected_picard(const Bidiagonalization& f, const Vector& b_exact, int k)
{
    if (k < 1 || k > f.steps)
        throw InputError("projected_picard: k out of range");
    const Vector rhs = f.P.leftCols(k + 1).transpose() * b_exact;
    return min_norm_lstsq(bidiag_matrix(f, k), rhs).norm();
}

// ---------------------------------------------------------------- subspace angles

struct SinThetaSeries {
    Vector sin_theta;
    Vector delta_norm;
};

inline double delta_from_sine(double s)
{
    const double c2 = 1.0 - s * s;
    if (c2 <= 1e-15)
        return std::numeric_limits<double>::infinity();
    return s / std::sqrt(c2);
}

inline SinThetaSeries sin_theta_series(const SvdTriplet& s, const Bidiagonalization& f, int kmax)
{
    const int K = std::min(kmax, f.steps);
    SinThetaSeries out;
    out.sin_theta.resize(K);
    out.delta_norm.resize(K);
    for (int k = 1; k <= K; ++k) {
        const double st = max_angle_sine(s.V.leftCols(k), f.Q.leftCols(k));
        out.sin_theta(k - 1) = st;
        out.delta_norm(k - 1) = delta_from_sine(st);
    }
    return out;
}

inline constexpr int delta_cap = 25;

namespace detail {

inline void require_distinct(const Vector& sigma, int k, const char* who)
{
    for (int i = 1; i < k; ++i)
        if (!(sigma(i) < sigma(i - 1)))
            throw InputError(std::string(who) + ": repeated singular values among the first k");
}

// log|x^2 - y^2| computed as log|x - y| + log(x + y)
inline double log_diff_sq(double x, double y)
{
    return std::log(std::abs(x - y)) + std::log(x + y);
}

} // namespace detail

inline Vector lagrange_factors(const Vector& sigma, int k)
{
    if (k < 1 || k > sigma.size())
        throw InputError("lagrange_factors: k out of range");
    detail::require_distinct(sigma, k, "lagrange_factors");
    Vector L(k);
    for (int j = 0; j < k; ++j) {
        double lg = 0.0;
        for (int i = 0; i < k; ++i)
            if (i != j)
                lg += 2.0 * std::log(sigma(i)) - detail::log_diff_sq(sigma(j), sigma(i));
        L(j) = std::exp(lg);
    }
    return L;
}

// Delta_k = D_2 T_{k2} T_{k1}^{-1} D_1^{-1}, entries L_j(sigma_i^2) scaled by the
// Krylov weights sigma_i u_i^T b.
inline Matrix delta_matrix(const SvdTriplet& s, const Vector& b, int k)
{
    const int n = static_cast<int>(s.sigma.size());
    if (k < 1 || k >= n)
        throw InputError("delta_matrix: k out of range");
    if (k > delta_cap)
        throw InputError("delta_matrix: k above the conditioning cap of " + std::to_string(delta_cap));
    detail::require_distinct(s.sigma, k + 1, "delta_matrix");
    const Vector c = s.U.transpose() * b;
    Vector w(n);
    for (int i = 0; i < n; ++i)
        w(i) = s.sigma(i) * c(i);
    for (int j = 0; j < k; ++j)
        if (w(j) == 0.0)
            throw InputError("delta_matrix: b has no component on u_" + std::to_string(j + 1));

    Matrix D = Matrix::Zero(n - k, k);
    for (int i = k; i < n; ++i) {
        if (w(i) == 0.0)
            continue;
        for (int j = 0; j < k; ++j) {
            double lg = std::log(std::abs(w(i))) - std::log(std::abs(w(j)));
            int sign = ((w(i) < 0) != (w(j) < 0)) ? -1 : 1;
            bool zero = false;
            for (int l = 0; l < k; ++l) {
                if (l == j)
                    continue;
                if (s.sigma(i) == s.sigma(l)) {
                    zero = true;
                    break;
                }
                lg += detail::log_diff_sq(s.sigma(i), s.sigma(l)) - detail::log_diff_sq(s.sigma(j), s.sigma(l));
                if ((s.sigma(i) < s.sigma(l)) != (s.sigma(j) < s.sigma(l)))
                    sign = -sign;
            }
            if (!zero)
                D(i - k, j) = sign * std::exp(lg);
        }
    }
    return D;
}

// ---------------------------------------------------------------- Ritz values and filters

struct RitzPair {
    Vector theta;     // singular values of B_k
    Vector theta_bar; // singular values of Bbar_{k-1} (first k rows of B_k)
};

inline RitzPair ritz_values(const Bidiagonalization& f, int k)
{
    RitzPair r;
    r.theta = singular_values(bidiag_matrix(f, k));
    r.theta_bar = singular_values(bidiag_bar(f, k));
    return r;
}

struct FilterFactors {
    Vector f;
    Vector cross;     // sigma_i (v_i^T x) / (u_i^T b); NaN outside the stability cutoff
    double max_discrepancy = 0.0;
};

// 1 - prod_j (1 - sigma^2 / theta_j^2), accurate when the product is close to one.
inline double filter_factor(double sigma, const Vector& theta)
{
    double lg = 0.0;
    int sign = 1;
    bool all_below = true;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
        const double x = (sigma / theta(j)) * (sigma / theta(j));
        if (x == 1.0)
            return 1.0;
        if (x < 1.0) {
            lg += std::log1p(-x);
        } else {
            all_below = false;
            lg += std::log(x - 1.0);
            sign = -sign;
        }
    }
    if (all_below)
        return -std::expm1(lg);
    return 1.0 - sign * std::exp(lg);
}

inline FilterFactors filter_factors(const Bidiagonalization& fb, const SvdTriplet& s, int k)
{
    if (k < 1 || k > fb.steps)
        throw InputError("filter_factors: k out of range");
    const Vector theta = singular_values(bidiag_matrix(fb, k));
    const Eigen::Index n = s.sigma.size();
    FilterFactors out;
    out.f.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out.f(i) = filter_factor(s.sigma(i), theta);

    Vector c = Vector::Zero(k + 1);
    c(0) = fb.beta1;
    const Vector x = fb.Q.leftCols(k) * detail::ProjectedSvd(bidiag_matrix(fb, k), c).solve(k);
    const Vector b = fb.beta1 * fb.P.col(0);
    const Vector ub = s.U.transpose() * b;
    const Vector vx = s.V.transpose() * x;
    const double cut = std::sqrt(machine_eps) * s.sigma(0);
    out.cross = Vector::Constant(n, std::numeric_limits<double>::quiet_NaN());
    for (Eigen::Index i = 0; i < n; ++i) {
        if (s.sigma(i) <= cut || ub(i) == 0.0)
            continue;
        out.cross(i) = s.sigma(i) * vx(i) / ub(i);
        out.max_discrepancy = std::max(out.max_discrepancy, std::abs(out.cross(i) - out.f(i)));
    }
    return out;
}

// sum_i f_i (u_i^T b / sigma_i) v_i
inline Vector filtered_expansion(const SvdTriplet& s, const Vector& b, const Vector& f)
{
    const Vector c = s.U.transpose() * b;
    Vector x = Vector::Zero(s.V.rows());
    for (Eigen::Index i = 0; i < s.sigma.size(); ++i)
        if (s.sigma(i) > 0.0 && f(i) != 0.0)
            x += (f(i) * c(i) / s.sigma(i)) * s.V.col(i);
    return x;
}

// ---------------------------------------------------------------- decay classification

struct DecayFit {
    DecayKind classification = DecayKind::severe;
    double rho_hat = 0.0;
    double alpha_hat = 0.0;
    int window_begin = 1;
    int window_end = 0;
    double residual_exponential = 0.0;
    double residual_power = 0.0;
};

inline DecayFit decay_classify(const Vector& alpha, const Vector& beta)
{
    const Eigen::Index K = std::min(alpha.size(), beta.size());
    if (K < 1)
        throw InputError("decay_classify: insufficient data");
    const double s1 = alpha(0) + beta(0);
    int end = 0;
    for (Eigen::Index k = 0; k < K; ++k) {
        const double s = alpha(k) + beta(k);
        if (!(s > 1e-12 * s1))
            break;
        end = static_cast<int>(k) + 1;
    }
    if (end < 6)
        throw InputError("decay_classify: fewer than 6 entries above the plateau");

    Vector y(end);
    Matrix Xe(end, 2), Xp(end, 2);
    for (int k = 0; k < end; ++k) {
        y(k) = std::log(alpha(k) + beta(k));
        Xe(k, 0) = 1.0;
        Xe(k, 1) = k + 1.0;
        Xp(k, 0) = 1.0;
        Xp(k, 1) = std::log(k + 1.0);
    }
    const Vector ce = Xe.colPivHouseholderQr().solve(y);
    const Vector cp = Xp.colPivHouseholderQr().solve(y);
    DecayFit d;
    d.window_begin = 1;
    d.window_end = end;
    d.residual_exponential = (Xe * ce - y).squaredNorm();
    d.residual_power = (Xp * cp - y).squaredNorm();
    d.rho_hat = std::exp(-ce(1));
    d.alpha_hat = -cp(1);
    if (d.residual_exponential < d.residual_power)
        d.classification = DecayKind::severe;
    else
        d.classification = d.alpha_hat > 1.0 ? DecayKind::moderate : DecayKind::mild;
    return d;
}

// ---------------------------------------------------------------- worst vector

struct WorstVectorCheck {
    int k = 0;
    bool skipped = false;
    std::string reason;
    double eps_worstvec = 0.0; // eps_k with sin^2 = 1 - eps_k^2
    double rayleigh = 0.0;
    double lower = 0.0;
    double upper = 0.0;        // eps^2 sigma_1^2 + (1 - eps^2) sigma_{k+1}^2
    double upper_stated = 0.0; // eps^2 sigma_{k+1}^2 + (1 - eps^2) sigma_1^2
    double theta_k = 0.0;
    bool lower_ok = false;
    bool upper_ok = false;
    bool upper_stated_ok = false;
    bool theta_ok = false;

    bool passed() const { return skipped || (lower_ok && upper_ok && theta_ok); }
};

inline WorstVectorCheck worst_vector_check(const SvdTriplet& s, const Bidiagonalization& f, int k)
{
    const int n = static_cast<int>(s.sigma.size());
    WorstVectorCheck w;
    w.k = k;
    if (k < 1 || k > f.steps)
        throw InputError("worst_vector_check: k out of range");
    if (k >= n - 1) {
        w.skipped = true;
        w.reason = "k >= n-1 leaves no interior complement";
        return w;
    }
    const Matrix Qk = f.Q.leftCols(k);
    const Matrix Vp = s.V.rightCols(s.V.cols() - k);
    SvdTriplet t = svd(Vp.transpose() * Qk);
    const double st = std::min(1.0, t.sigma(0));
    const double e2 = 1.0 - st * st;
    if (e2 <= 0.0 || e2 >= 1.0) {
        w.skipped = true;
        w.reason = "eps_k outside (0, 1)";
        return w;
    }
    const Vector q = Qk * t.V.col(0);
    // A^T A Rayleigh quotient through the SVD
    const Vector vq = s.V.transpose() * q;
    double rq = 0.0;
    for (int i = 0; i < n; ++i)
        rq += s.sigma(i) * s.sigma(i) * vq(i) * vq(i);
    const double s1 = s.sigma(0) * s.sigma(0), sk = s.sigma(k - 1) * s.sigma(k - 1);
    const double sk1 = s.sigma(k) * s.sigma(k), sn = s.sigma(n - 1) * s.sigma(n - 1);
    const double tol = 1e2 * machine_eps * s1;
    w.eps_worstvec = std::sqrt(e2);
    w.rayleigh = rq;
    w.lower = e2 * sk + (1.0 - e2) * sn;
    w.upper = e2 * s1 + (1.0 - e2) * sk1;
    w.upper_stated = e2 * sk1 + (1.0 - e2) * s1;
    w.theta_k = singular_values(bidiag_matrix(f, k))(k - 1);
    w.lower_ok = w.lower < rq + tol;
    w.upper_ok = rq < w.upper + tol;
    w.upper_stated_ok = rq < w.upper_stated + tol;
    w.theta_ok = w.theta_k <= std::sqrt(rq) + tol / s.sigma(0);
    return w;
}

// ---------------------------------------------------------------- LSQR versus TSVD

struct TsvdComparisonReport {
    int k = 0;
    double E_norm = 0.0;
    double kappa = 0.0;
    double eps_k = 0.0;
    double eps_hat_k = 0.0;
    double lhs_solution_diff = 0.0;
    double lhs_prediction_diff = 0.0;
    double rhs_solution = 0.0;
    double rhs_prediction = 0.0;
    double mirsky_lhs = 0.0;
    bool applicable = false;
    bool solution_bound_ok = false;
    bool prediction_bound_ok = false;
    bool mirsky_ok = false;
};

inline TsvdComparisonReport tsvd_comparison(const SvdTriplet& s, const Bidiagonalization& f, const SolverTrace& lsqr_trace,
                                            const SolverTrace& tsvd_trace, int k)
{
    if (static_cast<int>(lsqr_trace.iterates.size()) < k || static_cast<int>(tsvd_trace.iterates.size()) < k)
        throw InputError("tsvd_comparison: traces must store iterates up to k");
    if (k < 1 || k > f.steps || k >= s.sigma.size())
        throw InputError("tsvd_comparison: k out of range");
    const Vector& x = lsqr_trace.iterates[k - 1];
    const Vector& xt = tsvd_trace.iterates[k - 1];
    const Matrix Ak = s.U.leftCols(k) * s.sigma.head(k).asDiagonal() * s.V.leftCols(k).transpose();
    const Matrix Lk = f.P.leftCols(k + 1) * bidiag_matrix(f, k) * f.Q.leftCols(k).transpose();
    const Vector b = f.beta1 * f.P.col(0);
    const double sk = s.sigma(k - 1), sk1 = s.sigma(k);

    TsvdComparisonReport r;
    r.k = k;
    r.E_norm = spectral_norm(Lk - Ak);
    r.kappa = s.sigma(0) / sk;
    r.eps_k = r.E_norm / sk;
    r.eps_hat_k = sk1 / sk;
    r.lhs_solution_diff = (x - xt).norm() / xt.norm();
    r.lhs_prediction_diff = (Lk * x - Ak * xt).norm() / b.norm();
    const Vector theta = singular_values(bidiag_matrix(f, k));
    for (int i = 0; i < k; ++i)
        r.mirsky_lhs = std::max(r.mirsky_lhs, std::abs(s.sigma(i) - theta(i)));
    const double tol = 1e2 * machine_eps * s.sigma(0);
    r.mirsky_ok = r.mirsky_lhs <= r.E_norm + tol;
    r.applicable = r.E_norm <= sk - sk1 && r.eps_k < 1.0 && r.eps_k + r.eps_hat_k < 1.0;
    if (r.applicable) {
        const Vector Ax = Ak * xt;
        r.rhs_solution = r.kappa / (1.0 - r.eps_k) *
                         (r.E_norm / s.sigma(0) + r.eps_k / (1.0 - r.eps_k - r.eps_hat_k) * (Ax - b).norm() / Ax.norm());
        r.rhs_prediction = r.eps_k / (1.0 - r.eps_k);
        r.solution_bound_ok = r.lhs_solution_diff <= r.rhs_solution * (1.0 + 1e-10);
        r.prediction_bound_ok = r.lhs_prediction_diff <= r.rhs_prediction * (1.0 + 1e-10);
    }
    return r;
}

// ---------------------------------------------------------------- inequality suite

// Floating-point resolution used for strict inequalities between computed singular values.
inline double resolution(double scale) { return 1e2 * machine_eps * scale; }

// Rank-approximation and Ritz-value inequalities that hold for any A and b; checked
// for k = 1..kmax (kmax < f.steps).
inline std::vector<Verdict> inequality_suite(const Matrix& A, const SvdTriplet& s, const Bidiagonalization& f, int kmax)
{
    std::vector<Verdict> out;
    const int K = std::min(kmax, f.steps - 1);
    const double s1 = s.sigma(0);
    const double tol = resolution(s1);
    const double tol2 = resolution(s1 * s1);
    std::vector<double> gamma(K + 1);
    gamma[0] = s1;
    for (int k = 1; k <= K; ++k)
        gamma[k] = rank_approx_error(A, f, k);

    Vector prev_theta;
    for (int k = 1; k <= K; ++k) {
        const double g = gamma[k];
        const double sk1 = k < s.sigma.size() ? s.sigma(k) : 0.0;
        out.push_back(check_lt("gamma_decreasing", k, g, gamma[k - 1], tol));
        out.push_back(check_le("gamma_lower", k, sk1, g, tol));
        const double a1 = f.alpha(k), b2 = f.beta(k);
        out.push_back(check_lt("alpha_next", k, a1, g, tol));
        out.push_back(check_lt("beta_next", k, b2, g, tol));
        out.push_back(check_le("alpha_beta_product", k, 2.0 * a1 * b2, g * g, tol2));

        const RitzPair rp = ritz_values(f, k);
        double mirsky = 0.0;
        for (int i = 0; i < k; ++i)
            mirsky = std::max(mirsky, std::abs(s.sigma(i) - rp.theta(i)));
        out.push_back(check_le("mirsky", k, mirsky, g, tol));

        if (k > 1) {
            // theta^{(k)} strictly interlaces theta^{(k-1)}
            double worst = std::numeric_limits<double>::infinity();
            for (int i = 0; i < k - 1; ++i) {
                worst = std::min(worst, rp.theta(i) - prev_theta(i));
                worst = std::min(worst, prev_theta(i) - rp.theta(i + 1));
            }
            out.push_back(check_lt("cauchy_interlace", k, 0.0, worst, tol));
        }
        // theta_i^{(k)} > thetabar_i^{(k-1)} > theta_{i+1}^{(k)}
        {
            double worst = std::numeric_limits<double>::infinity();
            for (int i = 0; i < k; ++i) {
                worst = std::min(worst, rp.theta(i) - rp.theta_bar(i));
                if (i + 1 < k)
                    worst = std::min(worst, rp.theta_bar(i) - rp.theta(i + 1));
            }
            worst = std::min(worst, rp.theta_bar(k - 1));
            out.push_back(check_lt("bar_interlace", k, 0.0, worst, tol));
        }
        // thetabar^{(k)} (k+1 values) against theta^{(k)}
        {
            const Vector tb = singular_values(bidiag_bar(f, k + 1));
            double worst = std::numeric_limits<double>::infinity();
            for (int i = 0; i < k; ++i) {
                worst = std::min(worst, tb(i) - rp.theta(i));
                worst = std::min(worst, rp.theta(i) - tb(i + 1));
            }
            worst = std::min(worst, tb(k));
            out.push_back(check_lt("bar_chain", k, 0.0, worst, tol));
        }
        prev_theta = rp.theta;

        const double lm = lsmr_rank_error(A, f, k);
        out.push_back(check_le("lsmr_lower", k, g * g, lm, tol2));
        out.push_back(check_le("lsmr_upper", k, lm, std::sqrt(1.0 + std::pow(gamma[k - 1] / g, 2)) * g * g, tol2));
        out.push_back(check_le("lsmr_vs_lsqr", k, lm, lsqr_normal_rank_error(A, f, k), tol2));

        const CgmeRankError ce = cgme_rank_error(A, f, k);
        out.push_back(check_lt("cgme_lower", k, g, ce.cgme, tol));
        out.push_back(check_le("cgme_upper", k, ce.cgme, gamma[k - 1], tol));
        out.push_back(check_le("leftsub", k, ce.left_proj, g, tol));
    }
    return out;
}

// ---------------------------------------------------------------- model bounds

inline constexpr double model_slack = 3.0;

namespace detail {

// eps_rank^2 = ||S Dt D (I + Dt D)^{-1}||^2 + ||S Dt (I + D Dt)^{-1}||^2 with S = Sigma_k
inline double eps_rank(const Vector& sig_k, const Matrix& D)
{
    const Eigen::Index k = D.cols();
    const Matrix DtD = D.transpose() * D;
    const Matrix Ik = Matrix::Identity(k, k);
    const Matrix inv = (Ik + DtD).inverse();
    const Matrix t1 = sig_k.asDiagonal() * inv * DtD;
    const Matrix t2 = sig_k.asDiagonal() * inv * D.transpose();
    const double a = spectral_norm(t1), b = spectral_norm(t2);
    return std::sqrt(a * a + b * b);
}

inline double xi(double dn)
{
    if (dn >= 1.0)
        return std::sqrt(5.0) / 2.0;
    const double t = dn / (1.0 + dn * dn);
    return std::sqrt(t * t + 1.0);
}

} // namespace detail

struct ModelBoundResult {
    std::vector<Verdict> verdicts;
    std::vector<bool> near_best; // index k-1
    Vector eta_bound;            // slack-inflated eta_k bounds
    Vector gamma;
    int k0 = 0;

    bool all_passed() const
    {
        return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.passed(); });
    }
};

inline ModelBoundResult model_bound_suite(const SvdTriplet& s, const Vector& b, const SyntheticModel& model, int kmax)
{
    model.validate();
    if (!model.multiplicities.empty())
        throw InputError("model_bound_suite: needs simple singular values");
    const int n = static_cast<int>(s.sigma.size());
    const int K = std::min({kmax, delta_cap, n - 1});
    const int k0 = std::min(model.k0(), n - 1);
    const bool severe = model.decay == DecayKind::severe;
    const double a = model.alpha, beta = model.beta;
    const double rfac = severe ? 1.0 + model_slack / (model.rho * model.rho) : 1.0;
    const Vector& sg = s.sigma;
    const Vector c = (s.U.transpose() * b).cwiseAbs();
    const double tol = resolution(sg(0));

    const Matrix A = s.U * sg.asDiagonal() * s.V.transpose();
    const int depth = model.decay == DecayKind::mild ? std::max(K + 1, k0) : K + 1;
    const Bidiagonalization f = lanczos_bidiag(A, b, std::min(depth, n));

    ModelBoundResult res;
    res.k0 = k0;
    res.near_best.assign(K, false);
    res.eta_bound = Vector::Zero(K);
    res.gamma = Vector::Zero(K);
    auto& out = res.verdicts;
    auto root = [&](double kk) { return std::sqrt(kk * kk / (4 * a * a - 1) + kk / (2 * a - 1)); };

    for (int k = 1; k <= K && k <= f.steps; ++k) {
        const Matrix D = delta_matrix(s, b, k);
        const double dn = spectral_norm(D);
        const Vector L = lagrange_factors(sg, k);
        const double Lmax = L.maxCoeff();
        const double ratio = sg(k) / sg(k - 1);
        const double cr = c(k) / c(k - 1);
        const Matrix SD = sg.head(k).asDiagonal() * D.transpose();
        const double sdn = spectral_norm(SD);
        const double xi = detail::xi(dn);

        // sin Theta identity
        const double st = max_angle_sine(s.V.leftCols(k), f.Q.leftCols(k));
        out.push_back(check_le("deltabound", k, std::abs(st - dn / std::sqrt(1 + dn * dn)), 1e-6));

        double eta_rhs = 0.0;
        if (severe) {
            if (k == 1) {
                out.push_back(check_le("k1", k, dn, ratio * cr * rfac, 0, model_slack));
                out.push_back(check_le("case5", k, dn, std::pow(ratio, 2 + beta) * rfac, 0, model_slack));
                const double d1 = D.col(0).norm();
                out.push_back(check_le("columndelta1", k, d1, ratio * cr * rfac, 0, model_slack, 1));
            } else {
                out.push_back(check_le("eqres1", k, dn, ratio * cr * rfac * Lmax, 0, model_slack));
                if (k <= k0)
                    out.push_back(check_le("case1", k, dn, std::pow(ratio, 2 + beta) * rfac * Lmax, 0, model_slack));
                else
                    out.push_back(check_le("case2", k, dn, ratio * rfac * Lmax, 0, model_slack));
                for (int j = 1; j <= k; ++j)
                    out.push_back(check_le("columndelta", k, D.col(j - 1).norm(),
                                           sg(k) / sg(j - 1) * c(k) / c(j - 1) * rfac * L(j - 1), 0, model_slack, j));
            }
            if (k <= k0)
                out.push_back(check_le("case3", k, dn, std::pow(ratio, 2 + beta) * rfac, 0, model_slack));
            else
                out.push_back(check_le("case4", k, dn, ratio * rfac, 0, model_slack));
            out.push_back(check_le("lkkest", k, L(k - 1), rfac, 0, model_slack));
            out.push_back(check_le("lkkest_lower", k, 1.0, L(k - 1) * (1 + 1e-12)));
            out.push_back(check_le("lkk", k, Lmax, rfac, 0, model_slack));
            const double pn = k <= k0 ? sg(k) * cr * rfac : sg(k) * std::sqrt(k - k0 + 1.0) * rfac;
            out.push_back(check_le("prodnorm", k, sdn, pn, 0, model_slack));
            eta_rhs = k <= k0 ? xi * cr * rfac : xi * std::sqrt(k - k0 + 1.0) * rfac;
        } else {
            if (k == 1) {
                out.push_back(check_le("k2", k, dn, cr * std::sqrt(1 / (2 * a - 1))));
                out.push_back(check_le("mod1", k, dn, std::pow(ratio, 1 + beta) * std::sqrt(1 / (2 * a - 1))));
                out.push_back(check_le("columnnorm", k, D.col(0).norm(), cr * std::sqrt(1 / (2 * a - 1)), 0, 1, 1));
                const double pn = sg(0) * cr * std::sqrt(1 / (2 * a - 1));
                out.push_back(check_le("prodnorm2", k, sdn, pn));
                eta_rhs = xi * sg(0) / sg(1) * cr * std::sqrt(1 / (2 * a - 1));
            } else {
                out.push_back(check_le("modera1", k, dn, cr * root(k) * Lmax));
                if (k <= k0)
                    out.push_back(check_le("modera2", k, dn, std::pow(ratio, 1 + beta) * root(k) * Lmax));
                else
                    out.push_back(check_le("modera3", k, dn, root(k) * Lmax));
                for (int j = 1; j <= k; ++j)
                    out.push_back(check_le("columndelta2", k, D.col(j - 1).norm(),
                                           sg(k - 1) / sg(j - 1) * c(k) / c(j - 1) * std::sqrt(k / (2 * a - 1)) * L(j - 1),
                                           0, 1, j));
                const double big = k <= k0 ? cr * root(k) * Lmax
                                           : std::sqrt(k * double(k0) / (4 * a * a - 1) +
                                                       k * (k - k0 + 1.0) / (2 * a - 1)) *
                                                 Lmax;
                out.push_back(check_le("prodnorm2", k, sdn, sg(k - 1) * big));
                eta_rhs = xi * sg(k - 1) / sg(k) * big;
            }
            if (k >= 3)
                out.push_back(check_lt("lowerbound", k, k / (2 * a + 1), L(k - 1)));
        }

        // gamma_k against sigma_{k+1}
        const double g = rank_approx_error(A, f, k);
        res.gamma(k - 1) = g;
        res.eta_bound(k - 1) = eta_rhs;
        const double er = detail::eps_rank(sg.head(k), D);
        out.push_back(check_le("estimate1", k, g * g, sg(k) * sg(k) + er * er, resolution(sg(0) * sg(0))));
        out.push_back(check_le("final_lower", k, sg(k), g, tol));
        out.push_back(check_le(severe ? "const1" : "const2", k, g, std::sqrt(1 + eta_rhs * eta_rhs) * sg(k), tol,
                               severe ? model_slack : 1.0));
        res.near_best[k - 1] = g < (sg(k - 1) + sg(k)) / 2;
        if (severe && model.rho > 2 && k <= k0)
            out.push_back(check_lt("near", k, g, (sg(k - 1) + sg(k)) / 2));

        // Ritz values
        const Vector theta = singular_values(bidiag_matrix(f, k));
        for (int i = 0; i < k; ++i) {
            const double d = sg(i) - theta(i);
            Verdict v = check_le("error", k, d, std::sqrt(1 + eta_rhs * eta_rhs) * sg(k), tol, 1.0, i + 1);
            if (!(d > -tol))
                v.status = VerdictStatus::fail;
            out.push_back(v);
        }
        if (model.decay != DecayKind::mild && k <= k0) {
            double worst = std::numeric_limits<double>::infinity();
            for (int i = 0; i < k; ++i)
                worst = std::min({worst, theta(i) - sg(i + 1), sg(i) - theta(i)});
            out.push_back(check_lt("error2", k, 0.0, worst, tol));
        }
    }

    if (model.decay == DecayKind::mild) {
        // partial regularization: some theta_k^{(k)} below sigma_{k0+1}
        double best = std::numeric_limits<double>::infinity();
        int at = 0;
        for (int k = 1; k <= std::min(k0, f.steps); ++k) {
            const double tk = singular_values(bidiag_matrix(f, k))(k - 1);
            if (tk < best) {
                best = tk;
                at = k;
            }
        }
        Verdict v = check_lt("partial_regularization", at, best, sg(k0) * (1.0 - 1e-10));
        v.note = "smallest theta_k^(k) over k <= k0 against sigma_{k0+1}";
        out.push_back(v);
    }
    return res;
}

// ---------------------------------------------------------------- report

struct DiagnosticsReport {
    Vector gamma;
    Vector gamma_lower;
    std::optional<Vector> eta_bound;
    Vector sin_theta;
    Vector delta_norm;
    std::vector<Vector> ritz;
    std::vector<Vector> ritz_bar;
    std::vector<Vector> filters;
    Vector lsmr_err;
    Vector cgme_err;
    Vector projected_picard;
    std::vector<bool> near_best;
    std::vector<Verdict> bound_checks;
    std::optional<DecayFit> decay;
    std::optional<PicardReport> picard;
    std::set<std::string> metrics;
};

inline const std::set<std::string>& known_metrics()
{
    static const std::set<std::string> m{"gamma", "sintheta", "ritz", "filters", "classify",
                                         "lsmr",  "cgme",     "picard", "bounds", "projected_picard"};
    return m;
}

inline DiagnosticsReport diagnose(NoisyInstance& inst, int kmax, const std::set<std::string>& metrics)
{
    for (const auto& m : metrics)
        if (!known_metrics().count(m))
            throw InputError("unknown metric '" + m + "'");
    const Matrix& A = inst.problem.A;
    const SvdTriplet& s = ensure_svd(inst.problem);
    const int n = static_cast<int>(std::min(A.rows(), A.cols()));
    kmax = std::max(1, std::min(kmax, n - 1));
    const int depth = metrics.count("classify") ? n : kmax + 1;
    const Bidiagonalization f = lanczos_bidiag(A, inst.b, depth);
    const int K = std::min(kmax, f.steps);

    DiagnosticsReport r;
    r.metrics = metrics;
    if (metrics.count("gamma")) {
        r.gamma.resize(K);
        r.gamma_lower.resize(K);
        r.near_best.resize(K);
        for (int k = 1; k <= K; ++k) {
            r.gamma(k - 1) = rank_approx_error(A, f, k);
            r.gamma_lower(k - 1) = k < s.sigma.size() ? s.sigma(k) : 0.0;
            r.near_best[k - 1] = r.gamma(k - 1) < (s.sigma(k - 1) + r.gamma_lower(k - 1)) / 2;
        }
    }
    if (metrics.count("sintheta")) {
        SinThetaSeries st = sin_theta_series(s, f, K);
        r.sin_theta = st.sin_theta;
        r.delta_norm = st.delta_norm;
    }
    if (metrics.count("ritz"))
        for (int k = 1; k <= K; ++k) {
            RitzPair rp = ritz_values(f, k);
            r.ritz.push_back(rp.theta);
            r.ritz_bar.push_back(rp.theta_bar);
        }
    if (metrics.count("filters"))
        for (int k = 1; k <= K; ++k)
            r.filters.push_back(filter_factors(f, s, k).f);
    if (metrics.count("classify"))
        r.decay = decay_classify(f.alpha, f.beta);
    if (metrics.count("lsmr")) {
        const int KL = std::min(K, f.steps - (f.q_next.size() ? 0 : 1));
        r.lsmr_err.resize(KL);
        for (int k = 1; k <= KL; ++k)
            r.lsmr_err(k - 1) = lsmr_rank_error(A, f, k);
    }
    if (metrics.count("cgme")) {
        r.cgme_err.resize(K);
        for (int k = 1; k <= K; ++k)
            r.cgme_err(k - 1) = cgme_rank_error(A, f, k).cgme;
    }
    if (metrics.count("projected_picard")) {
        r.projected_picard.resize(K);
        for (int k = 1; k <= K; ++k)
            r.projected_picard(k - 1) = projected_picard(f, inst.problem.b_exact, k);
    }
    if (metrics.count("picard"))
        r.picard = picard_data(inst, s);
    if (metrics.count("bounds"))
        r.bound_checks = inequality_suite(A, s, f, K);
    return r;
}

} // namespace krylovreg
