#pragma once

#include "numerics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace krylovreg {

enum class Reorth { none, full };

// P is m x (steps+1), Q is n x steps, alpha holds alpha_1..alpha_steps and beta holds
// beta_2..beta_{steps+1}. alpha_next/q_next carry the half step alpha_{steps+1}, q_{steps+1}.
struct Bidiagonalization {
    Matrix P;
    Matrix Q;
    Vector alpha;
    Vector beta;
    int steps = 0;
    bool terminated_early = false;
    int termination_step = 0;
    double alpha_next = 0.0;
    Vector q_next;
    double beta1 = 0.0; // ||b||
};

struct ArnoldiFactorization {
    Matrix W; // n x (steps+1), or n x steps after breakdown
    Matrix H; // (steps+1) x steps, or steps x steps after breakdown
    int steps = 0;
    bool terminated_early = false;
    double start_norm = 0.0;
};

namespace detail {

// two passes of modified Gram-Schmidt against the first cols columns of X
inline void reorthogonalize(const Matrix& X, Eigen::Index cols, Vector& v)
{
    for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index j = 0; j < cols; ++j)
            v -= X.col(j).dot(v) * X.col(j);
}

// Unit vector orthogonal to the first cols columns of X, or zero if none exists.
inline Vector complement_vector(const Matrix& X, Eigen::Index cols)
{
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Vector v = Vector::Unit(X.rows(), i);
        reorthogonalize(X, cols, v);
        const double nv = v.norm();
        if (nv > 0.5)
            return v / nv;
    }
    return Vector::Zero(X.rows());
}

} // namespace detail

inline Bidiagonalization lanczos_bidiag(const Matrix& A, const Vector& b, int k, Reorth reorth = Reorth::full)
{
    const Eigen::Index m = A.rows(), n = A.cols();
    if (b.size() != m)
        throw InputError("lanczos_bidiag: right-hand side has wrong length");
    if (k < 1 || k > std::min(m, n))
        throw InputError("lanczos_bidiag: k = " + std::to_string(k) + " out of range");
    const double bn = b.norm();
    if (bn == 0.0)
        throw InputError("lanczos_bidiag: b = 0");

    Matrix P = Matrix::Zero(m, k + 1);
    Matrix Q = Matrix::Zero(n, k + 1);
    Vector alpha(k + 1), beta(k + 1);
    double scale = A.cwiseAbs().maxCoeff();
    auto tol = [&] { return 1e-14 * scale; };
    const bool full = reorth == Reorth::full;

    Bidiagonalization f;
    f.beta1 = bn;
    P.col(0) = b / bn;
    int steps = 0;
    for (int j = 0; j <= k; ++j) {
        Vector r = A.transpose() * P.col(j);
        if (j > 0)
            r -= beta(j - 1) * Q.col(j - 1);
        if (full)
            detail::reorthogonalize(Q, j, r);
        const double a = r.norm();
        alpha(j) = a;
        if (j == k) {
            f.alpha_next = a;
            f.q_next = a > tol() ? Vector(r / a) : Vector::Zero(n);
            break;
        }
        if (a <= tol()) {
            if (j == 0)
                throw NumericalError("lanczos_bidiag: A^T b vanishes");
            f.terminated_early = true;
            f.termination_step = j + 1;
            f.alpha_next = a;
            f.q_next = Vector::Zero(n);
            break;
        }
        scale = std::max(scale, a);
        Q.col(j) = r / a;

        Vector z = A * Q.col(j) - a * P.col(j);
        if (full)
            detail::reorthogonalize(P, j + 1, z);
        const double bb = z.norm();
        beta(j) = bb;
        steps = j + 1;
        if (bb <= tol()) {
            P.col(j + 1) = detail::complement_vector(P, j + 1);
            f.terminated_early = true;
            f.termination_step = j + 1;
            f.alpha_next = 0.0;
            f.q_next = Vector::Zero(n);
            break;
        }
        scale = std::max(scale, bb);
        P.col(j + 1) = z / bb;
    }

    f.steps = steps;
    f.P = P.leftCols(steps + 1);
    f.Q = Q.leftCols(steps);
    f.alpha = alpha.head(steps);
    f.beta = beta.head(steps);
    return f;
}

inline Matrix bidiag_matrix(const Bidiagonalization& f, int k)
{
    if (k < 1 || k > f.steps)
        throw InputError("bidiag_matrix: k = " + std::to_string(k) + " out of range");
    Matrix B = Matrix::Zero(k + 1, k);
    for (int j = 0; j < k; ++j) {
        B(j, j) = f.alpha(j);
        B(j + 1, j) = f.beta(j);
    }
    return B;
}

// First k rows of B_k: the square lower bidiagonal with alpha_1..alpha_k.
inline Matrix bidiag_bar(const Bidiagonalization& f, int k)
{
    return bidiag_matrix(f, k).topRows(k);
}

inline ArnoldiFactorization arnoldi(const Matrix& A, const Vector& b, int k, Reorth reorth = Reorth::full)
{
    const Eigen::Index n = A.rows();
    if (A.cols() != n)
        throw InputError("arnoldi: matrix must be square");
    if (b.size() != n)
        throw InputError("arnoldi: start vector has wrong length");
    if (k < 1 || k > n)
        throw InputError("arnoldi: k out of range");
    const double bn = b.norm();
    if (bn == 0.0)
        throw InputError("arnoldi: start vector is zero");

    Matrix W = Matrix::Zero(n, k + 1);
    Matrix H = Matrix::Zero(k + 1, k);
    double scale = A.cwiseAbs().maxCoeff();
    W.col(0) = b / bn;
    ArnoldiFactorization a;
    a.start_norm = bn;
    int steps = k;
    for (int j = 0; j < k; ++j) {
        Vector w = A * W.col(j);
        for (int i = 0; i <= j; ++i) {
            H(i, j) = W.col(i).dot(w);
            w -= H(i, j) * W.col(i);
        }
        if (reorth == Reorth::full)
            for (int i = 0; i <= j; ++i) {
                const double c = W.col(i).dot(w);
                H(i, j) += c;
                w -= c * W.col(i);
            }
        for (int i = 0; i <= j; ++i)
            scale = std::max(scale, std::abs(H(i, j)));
        const double h = w.norm();
        H(j + 1, j) = h;
        if (h <= 1e-14 * scale) {
            steps = j + 1;
            a.terminated_early = true;
            break;
        }
        W.col(j + 1) = w / h;
    }
    a.steps = steps;
    if (a.terminated_early) {
        a.W = W.leftCols(steps);
        a.H = H.topLeftCorner(steps, steps);
    } else {
        a.W = W;
        a.H = H;
    }
    return a;
}

} // namespace krylovreg
