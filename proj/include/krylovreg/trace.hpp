#pragma once

#include "numerics.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace krylovreg {

enum class SolverKind { lsqr, cgls, lsmr, cgme, tsvd, tikhonov, hybrid_lsqr, gmres, rrgmres };

inline const char* to_string(SolverKind s)
{
    switch (s) {
    case SolverKind::lsqr: return "lsqr";
    case SolverKind::cgls: return "cgls";
    case SolverKind::lsmr: return "lsmr";
    case SolverKind::cgme: return "cgme";
    case SolverKind::tsvd: return "tsvd";
    case SolverKind::tikhonov: return "tikhonov";
    case SolverKind::hybrid_lsqr: return "hybrid_lsqr";
    case SolverKind::gmres: return "gmres";
    case SolverKind::rrgmres: return "rrgmres";
    }
    return "unknown";
}

inline SolverKind parse_solver_kind(const std::string& s)
{
    for (auto k : {SolverKind::lsqr, SolverKind::cgls, SolverKind::lsmr, SolverKind::cgme, SolverKind::tsvd,
                   SolverKind::tikhonov, SolverKind::hybrid_lsqr, SolverKind::gmres, SolverKind::rrgmres})
        if (s == to_string(k))
            return k;
    if (s == "hybrid")
        return SolverKind::hybrid_lsqr;
    throw InputError("unknown solver '" + s + "'");
}

struct StepRecord {
    int k = 0;
    double residual_norm = 0.0;
    double normal_residual_norm = 0.0;
    double solution_norm = 0.0;
    std::optional<double> rel_error;
    std::optional<int> inner_truncation;
};

struct SolverTrace {
    SolverKind solver = SolverKind::lsqr;
    std::vector<StepRecord> records;
    std::vector<Vector> iterates;
    std::map<std::string, std::vector<double>> params;

    Vector residual_norms() const
    {
        Vector v(records.size());
        for (std::size_t i = 0; i < records.size(); ++i)
            v(i) = records[i].residual_norm;
        return v;
    }
    Vector solution_norms() const
    {
        Vector v(records.size());
        for (std::size_t i = 0; i < records.size(); ++i)
            v(i) = records[i].solution_norm;
        return v;
    }
    std::optional<double> min_rel_error() const
    {
        std::optional<double> best;
        for (const auto& r : records)
            if (r.rel_error && (!best || *r.rel_error < *best))
                best = r.rel_error;
        return best;
    }
};

} // namespace krylovreg
