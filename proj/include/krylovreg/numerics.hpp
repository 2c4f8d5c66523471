#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace krylovreg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SvdTriplet {
    Matrix U;
    Vector sigma;
    Matrix V;
};

inline constexpr double machine_eps = std::numeric_limits<double>::epsilon();

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& A, const char* what)
{
    if (!A.allFinite())
        throw InputError(std::string(what) + ": non-finite entries");
}

inline Matrix orthonormality_defect(const Matrix& X)
{
    return X.transpose() * X - Matrix::Identity(X.cols(), X.cols());
}

} // namespace detail

inline SvdTriplet svd(const Matrix& A)
{
    detail::require_finite(A, "svd");
    if (A.rows() < 1 || A.cols() < 1)
        throw InputError("svd: empty matrix");
    Eigen::BDCSVD<Matrix> dec(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success)
        throw NumericalError("svd: iteration did not converge for " + std::to_string(A.rows()) + "x" +
                             std::to_string(A.cols()) + " matrix");
    return {dec.matrixU(), dec.singularValues(), dec.matrixV()};
}

inline Vector singular_values(const Matrix& A)
{
    detail::require_finite(A, "singular_values");
    if (A.size() == 0)
        return Vector();
    Eigen::BDCSVD<Matrix> dec(A);
    if (dec.info() != Eigen::Success)
        throw NumericalError("singular_values: iteration did not converge");
    return dec.singularValues();
}

inline double spectral_norm(const Matrix& A)
{
    if (A.size() == 0)
        return 0.0;
    return singular_values(A)(0);
}

// rank_tol is relative to sigma_1; a negative value selects the default 1e-14.
inline Vector min_norm_lstsq(const Matrix& A, const Vector& b, double rank_tol = -1.0)
{
    if (A.rows() != b.size())
        throw InputError("min_norm_lstsq: dimension mismatch (" + std::to_string(A.rows()) + " rows, rhs of length " +
                         std::to_string(b.size()) + ")");
    detail::require_finite(b, "min_norm_lstsq");
    if (rank_tol < 0.0)
        rank_tol = 1e-14;
    SvdTriplet s = svd(A);
    Vector x = Vector::Zero(A.cols());
    if (s.sigma.size() == 0 || s.sigma(0) == 0.0)
        return x;
    const double cut = rank_tol * s.sigma(0);
    Vector c = s.U.transpose() * b;
    for (Eigen::Index i = 0; i < s.sigma.size(); ++i) {
        if (s.sigma(i) <= cut)
            break;
        x.noalias() += (c(i) / s.sigma(i)) * s.V.col(i);
    }
    return x;
}

// Sines of the canonical angles, nondecreasing.
inline Vector principal_angle_sines(const Matrix& X, const Matrix& Y)
{
    if (X.rows() != Y.rows() || X.cols() != Y.cols())
        throw InputError("principal_angle_sines: shape mismatch");
    if (detail::orthonormality_defect(X).cwiseAbs().maxCoeff() > 1e-8 ||
        detail::orthonormality_defect(Y).cwiseAbs().maxCoeff() > 1e-8)
        throw InputError("principal_angle_sines: columns are not orthonormal");
    Matrix R = Y - X * (X.transpose() * Y);
    Vector s = singular_values(R);
    std::sort(s.data(), s.data() + s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        s(i) = std::min(s(i), 1.0);
    return s;
}

inline double max_angle_sine(const Matrix& X, const Matrix& Y)
{
    Vector s = principal_angle_sines(X, Y);
    return s.size() ? s(s.size() - 1) : 0.0;
}

inline Matrix thin_qr(const Matrix& V)
{
    detail::require_finite(V, "thin_qr");
    const Eigen::Index m = V.rows(), k = V.cols();
    if (k > m)
        throw InputError("thin_qr: more columns than rows");
    Eigen::HouseholderQR<Matrix> qr(V);
    Matrix R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    double scale = 0.0;
    for (Eigen::Index j = 0; j < k; ++j)
        scale = std::max(scale, V.col(j).norm());
    for (Eigen::Index j = 0; j < k; ++j)
        if (std::abs(R(j, j)) <= 1e-12 * scale)
            throw NumericalError("thin_qr: column " + std::to_string(j) + " is numerically dependent");
    Matrix Q = qr.householderQ() * Matrix::Identity(m, k);
    for (Eigen::Index j = 0; j < k; ++j)
        if (R(j, j) < 0.0)
            Q.col(j) *= -1.0;
    return Q;
}

} // namespace krylovreg
