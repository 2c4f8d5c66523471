#pragma once

#include "trace.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace krylovreg {

struct LCurveResult {
    int corner_index = 0; // 1-based, as in trace records
    Vector curvatures;
    std::vector<std::pair<double, double>> log_points;
};

namespace detail {

// Signed curvature of the circle through three points; positive for the
// clockwise turn an L-curve makes at its corner.
inline double menger_curvature(const std::pair<double, double>& a, const std::pair<double, double>& b,
                               const std::pair<double, double>& c)
{
    const double abx = b.first - a.first, aby = b.second - a.second;
    const double bcx = c.first - b.first, bcy = c.second - b.second;
    const double acx = c.first - a.first, acy = c.second - a.second;
    const double cross = abx * bcy - aby * bcx;
    const double denom = std::hypot(abx, aby) * std::hypot(bcx, bcy) * std::hypot(acx, acy);
    if (denom == 0.0)
        return 0.0;
    return -2.0 * cross / denom;
}

inline bool flat_step(const Vector& r, const Vector& s, Eigen::Index i)
{
    const double dr = std::abs(r(i + 1) - r(i)) / r(i);
    const double ds = std::abs(s(i + 1) - s(i)) / s(i);
    return std::max(dr, ds) < 1e-3;
}

} // namespace detail

inline LCurveResult lcurve_corner(const Vector& residual_norms, const Vector& solution_norms)
{
    const Eigen::Index n = residual_norms.size();
    if (solution_norms.size() != n)
        throw InputError("lcurve_corner: sequences differ in length");
    if (n < 4)
        throw InputError("lcurve_corner: need at least 4 points");
    if ((residual_norms.array() <= 0.0).any() || (solution_norms.array() <= 0.0).any())
        throw InputError("lcurve_corner: norms must be positive");

    LCurveResult out;
    out.curvatures = Vector::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out.log_points.emplace_back(std::log(residual_norms(i)), std::log(solution_norms(i)));

    Eigen::Index lo = 0, hi = n - 1;
    while (lo < hi && detail::flat_step(residual_norms, solution_norms, lo))
        ++lo;
    while (hi > lo && detail::flat_step(residual_norms, solution_norms, hi - 1))
        --hi;
    if (hi - lo < 2)
        throw NumericalError("lcurve_corner: no corner, curve is flat");

    Eigen::Index best = -1;
    for (Eigen::Index i = lo + 1; i < hi; ++i) {
        out.curvatures(i) = detail::menger_curvature(out.log_points[i - 1], out.log_points[i], out.log_points[i + 1]);
        if (best < 0 || out.curvatures(i) > out.curvatures(best))
            best = i;
    }
    out.corner_index = static_cast<int>(best) + 1;
    return out;
}

inline int discrepancy(const Vector& residual_norms, double noise_norm, double tau = 1.01)
{
    if (tau < 1.0)
        throw InputError("discrepancy: tau must be at least 1");
    for (Eigen::Index i = 0; i < residual_norms.size(); ++i)
        if (residual_norms(i) <= tau * noise_norm)
            return static_cast<int>(i) + 1;
    throw NumericalError("discrepancy: residual never reaches tau * noise level");
}

inline int oracle_best(const SolverTrace& trace)
{
    int best = 0;
    double err = 0.0;
    for (const auto& r : trace.records) {
        if (!r.rel_error)
            throw InputError("oracle_best: trace has no relative errors");
        if (best == 0 || *r.rel_error < err) {
            best = r.k;
            err = *r.rel_error;
        }
    }
    if (best == 0)
        throw InputError("oracle_best: empty trace");
    return best;
}

} // namespace krylovreg
