#pragma once

#include "spai/precond.hpp"
#include "spai/sparse.hpp"

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace spai {

enum class StopCriterion {
    true_residual,        ///< ||b - Ax|| / ||b|| < rtol, checked on the running residual
    preconditioned_delta  ///< r^T M^{-1} r <= rtol^2 * delta_0
};

struct SolveConfig {
    double rtol = 1e-8;
    std::optional<std::size_t> max_iters;  ///< defaults to 20 n
    std::size_t residual_refresh_period = 50;
    bool track_history = false;
    StopCriterion criterion = StopCriterion::true_residual;
    /// Reproduces the listing where a refresh iteration skips the s, delta, beta and d updates.
    bool refresh_skips_direction_update = false;
    /// Check A's symmetry before solving.
    bool verify_symmetry = false;
};

struct SolveReport {
    std::vector<double> x;
    std::size_t iterations = 0;
    bool converged = false;
    double final_relative_residual = 0.0;  ///< recomputed with a fresh SpMV
    std::vector<double> residual_history;  ///< relative running residual per iteration, if tracked
    std::chrono::nanoseconds t_construct{0};
    std::chrono::nanoseconds t_apply_total{0};
    std::chrono::nanoseconds t_cg_total{0};
};

nlohmann::json to_json(const SolveReport& report, bool include_solution = false);

struct SymmetryDiagnostic {
    bool pattern_symmetric = false;
    bool values_symmetric = false;
    double max_value_asymmetry = 0.0;
    std::string message;

    bool ok() const noexcept { return pattern_symmetric && values_symmetric; }
};

/// Pattern symmetry plus |A_ij - A_ji| < 1e-12 ||A||. Does not certify definiteness.
SymmetryDiagnostic verify_spd_symmetric(const SparseMatrix& a);

/// Preconditioned CG from x0 = 0. Throws NotPositiveDefinite when d^T q <= 0.
SolveReport pcg_solve(const SparseMatrix& a, std::span<const double> b, const Preconditioner& m,
                      const SolveConfig& cfg = {});

} // namespace spai
