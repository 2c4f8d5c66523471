#include <krylovreg/krylovreg.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace krylovreg;

namespace {

Matrix random_matrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed)
{
    Rng rng(seed);
    Matrix A(m, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < m; ++i)
            A(i, j) = rng.normal();
    return A;
}

// least squares slope of log(sigma_k) against k over [k1, k2], 1-based
double log_slope(const Vector& sigma, int k1, int k2)
{
    const int cnt = k2 - k1 + 1;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = k1; k <= k2; ++k) {
        const double y = std::log(sigma(k - 1));
        sx += k;
        sy += y;
        sxx += double(k) * k;
        sxy += k * y;
    }
    return (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
}

// first 1-based k with sigma_k below the machine floor
int plateau_index(const Vector& sigma)
{
    for (Eigen::Index i = 0; i < sigma.size(); ++i)
        if (sigma(i) < 256 * machine_eps * sigma(0))
            return static_cast<int>(i) + 1;
    return static_cast<int>(sigma.size()) + 1;
}

} // namespace

TEST(Svd, IdentityHasUnitSpectrum)
{
    const SvdTriplet s = svd(Matrix::Identity(3, 3));
    EXPECT_TRUE(s.sigma.isApprox(Vector::Ones(3), 1e-15));
    EXPECT_TRUE((s.U * s.U.transpose()).isApprox(Matrix::Identity(3, 3), 1e-14));
    EXPECT_TRUE(((s.U.transpose() * s.V).cwiseAbs()).isApprox(Matrix::Identity(3, 3), 1e-14));
}

TEST(Svd, PermutedDiagonal)
{
    Matrix A = Matrix::Zero(3, 3);
    A(1, 0) = 3;
    A(2, 1) = 2;
    A(0, 2) = 1;
    const SvdTriplet s = svd(A);
    EXPECT_NEAR(s.sigma(0), 3, 1e-14);
    EXPECT_NEAR(s.sigma(1), 2, 1e-14);
    EXPECT_NEAR(s.sigma(2), 1, 1e-14);
    EXPECT_LT((s.U * s.sigma.asDiagonal() * s.V.transpose() - A).norm(), 1e-13);
}

TEST(Svd, RejectsNonFinite)
{
    Matrix A = Matrix::Identity(2, 2);
    A(0, 1) = std::nan("");
    EXPECT_THROW(svd(A), InputError);
}

TEST(Svd, ShawDecaysLikeExpMinus4k)
{
    const auto p = generate(ProblemKind::shaw, 256);
    const Vector sigma = singular_values(p.A);
    const int plateau = plateau_index(sigma);
    const double slope = log_slope(sigma, 2, plateau - 2);
    EXPECT_NEAR(slope, -4.0, 1.0);
}

TEST(MinNormLstsq, IdentityReturnsRhs)
{
    const Vector b = Vector::LinSpaced(5, -1, 3);
    EXPECT_TRUE(min_norm_lstsq(Matrix::Identity(5, 5), b).isApprox(b, 1e-15));
}

TEST(MinNormLstsq, ZeroMatrixGivesZero)
{
    const Vector x = min_norm_lstsq(Matrix::Zero(4, 3), Vector::Ones(4));
    EXPECT_EQ(x.size(), 3);
    EXPECT_EQ(x.norm(), 0.0);
}

TEST(MinNormLstsq, AgreesWithNormalEquations)
{
    const Matrix A = random_matrix(10, 6, 11);
    const Vector b = random_matrix(10, 1, 12).col(0);
    const Vector ref = (A.transpose() * A).llt().solve(A.transpose() * b);
    const Vector x = min_norm_lstsq(A, b);
    EXPECT_LT((x - ref).norm() / ref.norm(), 1e-8);
}

TEST(MinNormLstsq, DimensionMismatch)
{
    EXPECT_THROW(min_norm_lstsq(Matrix::Identity(3, 3), Vector::Ones(4)), InputError);
}

TEST(SpectralNorm, Identity)
{
    EXPECT_NEAR(spectral_norm(Matrix::Identity(7, 7)), 1.0, 1e-15);
}

TEST(SpectralNorm, RankOne)
{
    Vector u = Vector::Zero(4), v = Vector::Zero(3);
    u(0) = 2;
    v(1) = 3;
    EXPECT_NEAR(spectral_norm(u * v.transpose()), 6.0, 1e-14);
}

TEST(SpectralNorm, MatchesSvd)
{
    const Matrix A = random_matrix(8, 5, 3);
    EXPECT_NEAR(spectral_norm(A), svd(A).sigma(0), 1e-12);
}

TEST(PrincipalAngles, SameSpace)
{
    const Matrix X = thin_qr(random_matrix(6, 3, 5));
    EXPECT_LT(principal_angle_sines(X, X).maxCoeff(), 1e-7);
}

TEST(PrincipalAngles, OrthogonalLines)
{
    const Matrix X = Matrix::Identity(2, 2).col(0), Y = Matrix::Identity(2, 2).col(1);
    EXPECT_NEAR(principal_angle_sines(X, Y)(0), 1.0, 1e-15);
}

TEST(PrincipalAngles, FortyFiveDegrees)
{
    Matrix X(2, 1), Y(2, 1);
    X << 1, 0;
    Y << 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
    EXPECT_NEAR(principal_angle_sines(X, Y)(0), 1 / std::sqrt(2.0), 1e-15);
}

TEST(PrincipalAngles, RejectsNonOrthonormal)
{
    Matrix X(2, 1);
    X << 2, 0;
    EXPECT_THROW(principal_angle_sines(X, X), InputError);
}

TEST(ThinQr, Identity)
{
    EXPECT_TRUE(thin_qr(Matrix::Identity(4, 4)).isApprox(Matrix::Identity(4, 4), 1e-15));
}

TEST(ThinQr, SingleColumn)
{
    Vector v(3);
    v << 3, 0, 4;
    EXPECT_TRUE(thin_qr(v).col(0).isApprox(v / 5.0, 1e-15));
}

TEST(ThinQr, PreservesSpan)
{
    const Matrix V = random_matrix(20, 5, 9);
    const Matrix Q = thin_qr(V);
    EXPECT_LT((Q.transpose() * Q - Matrix::Identity(5, 5)).norm(), 1e-12);
    const Matrix U = svd(V).U;
    EXPECT_LT((Q * Q.transpose() - U * U.transpose()).norm(), 1e-12);
}

TEST(ThinQr, ReportsDependentColumn)
{
    Matrix V = random_matrix(6, 3, 4);
    V.col(2) = V.col(0) + V.col(1);
    try {
        thin_qr(V);
        FAIL() << "expected an error";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos);
    }
}

TEST(Generate, ShawPlateauNear22)
{
    const Vector sigma = singular_values(generate(ProblemKind::shaw, 256).A);
    EXPECT_NEAR(plateau_index(sigma), 22, 3);
}

TEST(Generate, WingDecayAndPlateau)
{
    const Vector sigma = singular_values(generate(ProblemKind::wing, 256).A);
    const int plateau = plateau_index(sigma);
    EXPECT_NEAR(plateau, 8, 2);
    EXPECT_NEAR(log_slope(sigma, 1, plateau - 1), -9.0, 2.0);
}

TEST(Generate, PhillipsOddComponentsDominate)
{
    const auto p = generate(ProblemKind::phillips, 256);
    const SvdTriplet s = svd(p.A);
    const Vector c = (s.U.transpose() * p.b_exact).cwiseAbs();
    for (int i = 0; i < 10; i += 2)
        EXPECT_LT(c(i + 1), 1e-6 * c(i)) << "pair starting at index " << i + 1;
}

TEST(Generate, AllKindsSquareAndConsistent)
{
    for (auto kind : {ProblemKind::shaw, ProblemKind::wing, ProblemKind::heat, ProblemKind::phillips,
                      ProblemKind::deriv2, ProblemKind::i_laplace}) {
        const auto p = generate(kind, 64);
        EXPECT_EQ(p.m(), 64);
        EXPECT_EQ(p.n(), 64);
        EXPECT_TRUE(p.A.allFinite());
        EXPECT_LT((p.A * p.x_true - p.b_exact).norm(), 1e-12 * p.b_exact.norm()) << to_string(kind);
    }
}

TEST(Generate, RejectsBadSizes)
{
    EXPECT_THROW(generate(ProblemKind::shaw, 4), InputError);
    EXPECT_THROW(generate(ProblemKind::phillips, 30), InputError);
    EXPECT_THROW(parse_problem_kind("baart"), InputError);
}

TEST(GenerateSynthetic, SevereSpectrumExact)
{
    const auto p = generate_synthetic(SyntheticModel::severe(std::exp(1.0)), 100, 100, 7);
    const Vector sigma = singular_values(p.A);
    for (int k = 1; k <= 100; ++k) {
        EXPECT_NEAR(p.svd_cache->sigma(k - 1), std::exp(-double(k)), 1e-13 * std::exp(-double(k)));
        EXPECT_NEAR(sigma(k - 1), std::exp(-double(k)), 1e-14 * sigma(0)) << "k = " << k;
    }
}

TEST(GenerateSynthetic, ModerateTransitionIndex)
{
    EXPECT_EQ(SyntheticModel::power(2.0, 0.5, 1e-4).k0(), 20);
}

TEST(GenerateSynthetic, PicardCoefficients)
{
    const auto model = SyntheticModel::power(2.0, 0.5, 1e-4);
    const auto p = generate_synthetic(model, 60, 50, 3);
    const SvdTriplet s = svd(p.A);
    for (int i = 0; i < 50; ++i)
        EXPECT_NEAR(std::abs(s.U.col(i).dot(p.b_exact)), std::pow(model.sigma(i + 1), 1.5),
                    1e-10 * std::pow(model.sigma(i + 1), 1.5) + 1e-15);
}

TEST(GenerateSynthetic, MultiplicitiesStopBidiagonalization)
{
    auto model = SyntheticModel::severe(2.0);
    model.multiplicities.assign(10, 2);
    const auto p = generate_synthetic(model, 20, 20, 5);
    const auto f = lanczos_bidiag(p.A, p.b_exact, 20);
    EXPECT_TRUE(f.terminated_early);
    EXPECT_LE(f.termination_step, 11);
}

TEST(GenerateSynthetic, InfeasibleModel)
{
    EXPECT_THROW(generate_synthetic(SyntheticModel::severe(2.0, 0.5, 10.0), 20, 20, 1), InputError);
}

TEST(AddNoise, RelativeLevelExact)
{
    const auto inst = add_noise(generate(ProblemKind::shaw, 64), 1e-3, 7);
    EXPECT_NEAR(inst.e.norm() / inst.problem.b_exact.norm(), 1e-3, 1e-15);
    EXPECT_TRUE(inst.b.isApprox(inst.problem.b_exact + inst.e, 1e-15));
}

TEST(AddNoise, SeedDeterminism)
{
    const auto p = generate(ProblemKind::heat, 64);
    EXPECT_EQ(add_noise(p, 1e-2, 42).e, add_noise(p, 1e-2, 42).e);
}

TEST(AddNoise, DifferentSeedsUncorrelated)
{
    const auto p = generate(ProblemKind::shaw, 256);
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const Vector a = add_noise(p, 1e-3, seed).e, b = add_noise(p, 1e-3, seed + 1000).e;
        const Vector ac = a.array() - a.mean(), bc = b.array() - b.mean();
        EXPECT_LT(std::abs(ac.dot(bc)) / (ac.norm() * bc.norm()), 0.2) << "seed " << seed;
    }
}

TEST(AddNoise, RejectsZeroRhs)
{
    auto p = generate(ProblemKind::shaw, 16);
    p.b_exact.setZero();
    EXPECT_THROW(add_noise(p, 1e-3, 1), InputError);
}

TEST(PicardData, NoiseFreeRatiosMonotone)
{
    const auto model = SyntheticModel::severe(std::exp(1.0), 0.5, 0.0);
    const auto inst = noiseless(generate_synthetic(model, 40, 40, 2));
    const auto rep = picard_data(inst, *inst.problem.svd_cache);
    for (int i = 0; i < 10; ++i) {
        EXPECT_NEAR(rep.ratios(i), std::pow(rep.sigma(i), 0.5), 1e-8 * std::pow(rep.sigma(i), 0.5));
        if (i > 0)
            EXPECT_LT(rep.ratios(i), rep.ratios(i - 1));
    }
}

TEST(PicardData, ShawTransitionNear7)
{
    auto inst = add_noise(generate(ProblemKind::shaw, 256), 1e-3, 7);
    EXPECT_NEAR(picard_data(inst, ensure_svd(inst.problem)).transition_index, 7, 1);
}

TEST(PicardData, WingTransitionNear3)
{
    auto inst = add_noise(generate(ProblemKind::wing, 256), 1e-3, 7);
    EXPECT_NEAR(picard_data(inst, ensure_svd(inst.problem)).transition_index, 3, 1);
}
