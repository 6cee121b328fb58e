#pragma once

#include "spai/sparse.hpp"

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spai {

enum class PreconditionerKind { none, diag, ic0, fsai, learned };

std::string_view to_string(PreconditionerKind kind);
PreconditionerKind parse_preconditioner_kind(std::string_view name);

struct IdentityPayload {
    std::size_t n = 0;
};

struct JacobiPayload {
    std::vector<double> inverse_diagonal;
};

struct Ic0Payload {
    SparseMatrix lower;        ///< L on lower(pattern(A)), diagonal last in each row
    double shift = 0.0;        ///< sigma of the successful attempt (0 when unshifted)
    int attempts = 1;
};

struct FsaiPayload {
    SparseMatrix lower;        ///< G, lower triangular
    std::size_t fallback_rows = 0;
};

struct LearnedSpaiPayload {
    SparseMatrix factor;       ///< G, same pattern as A, not triangular
    double epsilon = 0.0;
};

/// SPD operator r -> M^{-1} r, immutable after construction.
class Preconditioner {
public:
    using Payload = std::variant<IdentityPayload, JacobiPayload, Ic0Payload, FsaiPayload, LearnedSpaiPayload>;

    Preconditioner(Payload payload, std::chrono::nanoseconds construct_time);

    PreconditionerKind kind() const noexcept;
    std::size_t size() const noexcept;
    std::chrono::nanoseconds construct_time() const noexcept { return construct_time_; }
    const Payload& payload() const noexcept { return payload_; }

    void apply(std::span<const double> r, std::span<double> s) const;
    std::vector<double> apply(std::span<const double> r) const;

private:
    Payload payload_;
    std::chrono::nanoseconds construct_time_;
};

Preconditioner build_identity(std::size_t n);

/// apply(r)_i = r_i / A_ii. Requires every diagonal entry stored and positive.
Preconditioner build_jacobi(const SparseMatrix& a);

/// Zero-fill incomplete Cholesky. On breakdown retries with A + sigma diag(A),
/// sigma in {1e-3, 1e-2, 1e-1, 1, 10}.
Preconditioner build_ic0(const SparseMatrix& a);

/// Factorized sparse approximate inverse on lower(pattern(A)): G A G^T has unit diagonal.
Preconditioner build_fsai(const SparseMatrix& a);

/// M^{-1} = G G^T + epsilon I, applied as two SpMVs and an axpy.
Preconditioner build_learned_spai(SparseMatrix g, double epsilon);

} // namespace spai
