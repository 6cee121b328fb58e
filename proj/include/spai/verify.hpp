#pragma once

#include "spai/gnn.hpp"
#include "spai/random.hpp"
#include "spai/sparse.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spai {

/// Random symmetric pattern with about `per_row` off-diagonal entries per row and
/// diag_i = (1 + margin) * sum_j |A_ij| + 1, so A is SPD by diagonal dominance.
SparseMatrix random_dominant_spd(std::size_t n, std::size_t per_row, double margin, Rng& rng);

/// A G on A's pattern close to the scaled inverse diagonal, for error-bound fuzzing.
SparseMatrix near_jacobi_factor(const SparseMatrix& a, double jitter, Rng& rng);

/// Central-difference gradient check of the SAI loss through the whole network.
struct GradientCheck {
    std::size_t probes = 0;
    double max_relative_error = 0.0;
};
GradientCheck gradient_check(const GnnModel& model, const SparseMatrix& a, const MatrixGraph& graph,
                             std::span<const double> w, std::size_t probes, Rng& rng, double step = 1e-5);

/// Relative error |ad - fd| / (|fd| + 1e-8), and the combined absolute/relative form used
/// when both are near zero.
double gradient_relative_error(double autodiff, double finite_difference);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// The property suite behind `verify`: oracle equivalences, gradient checks, loss scale
/// invariance, Hutchinson accuracy and the error-bound fuzz.
std::vector<CheckResult> run_verify_suite(std::uint64_t seed);

} // namespace spai
