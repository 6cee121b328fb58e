#pragma once

#include "spai/dense.hpp"
#include "spai/loss.hpp"
#include "spai/precond.hpp"
#include "spai/sparse.hpp"

#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace spai {

/// M^{-1} densified column by column, then symmetrized to remove rounding asymmetry.
DenseMatrix dense_operator(std::size_t n, const ApplyFn& m_apply);

/// Eigenvalues of A M^{-1}, ascending, via the congruent symmetric R K R^T with A = R^T R.
/// Throws NotPositiveDefinite if A is not SPD or a returned eigenvalue is not positive.
std::vector<double> preconditioned_spectrum(const SparseMatrix& a, const ApplyFn& m_apply);
std::vector<double> preconditioned_spectrum(const SparseMatrix& a, const Preconditioner& m);

double condition_number(std::span<const double> eigenvalues);
/// Arithmetic over geometric mean, the latter taken in log space.
double kaporin_number(std::span<const double> eigenvalues);

struct ErrorBoundReport {
    double kappa = 0.0;
    double kaporin = 0.0;
    double sigma_max_e = 0.0;               ///< ||A M^{-1} / ||A|| - I||_2
    std::optional<double> bound_value;      ///< (1 + sigma) / (1 - sigma), only when sigma < 1
    double first_order = 0.0;               ///< 1 + 2 sigma
    std::optional<bool> bound_holds;        ///< kappa <= bound + 1e-8, only when sigma < 1
};

/// Forms E = A M^{-1} / ||A|| - I densely and checks kappa(A M^{-1}) against (1 + sigma) / (1 - sigma).
ErrorBoundReport error_bound_check(const SparseMatrix& a, const ApplyFn& m_apply);
ErrorBoundReport error_bound_check(const SparseMatrix& a, const SparseMatrix& g, double epsilon);

inline constexpr double error_bound_slack = 1e-8;

nlohmann::json to_json(const ErrorBoundReport& r);

} // namespace spai
