#include "spai/precond.hpp"

#include "spai/dense.hpp"
#include "spai/error.hpp"

#include <array>
#include <cmath>
#include <string>

namespace spai {

namespace {

using clock_type = std::chrono::steady_clock;

std::chrono::nanoseconds since(clock_type::time_point start) {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(clock_type::now() - start);
}

void require_square(const SparseMatrix& a, const char* who) {
    if (!a.pattern().square()) throw DimensionMismatch(std::string(who) + ": matrix is not square");
}

std::vector<double>& scratch(std::size_t n) {
    thread_local std::vector<double> buffer;
    buffer.resize(n);
    return buffer;
}

// Row-oriented IC(0) on the lower pattern; diagonal is the last entry of each row.
// Returns the failing row on breakdown.
std::optional<std::size_t> factor_ic0(const SparseMatrix& lower_a, double shift, std::vector<double>& values) {
    const auto offsets = lower_a.row_offsets();
    const auto cols = lower_a.col_indices();
    const auto a = lower_a.values();
    values.assign(a.begin(), a.end());
    const std::size_t n = lower_a.rows();
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t diag = offsets[i + 1] - 1;
        for (std::size_t k = offsets[i]; k < diag; ++k) {
            const std::size_t j = cols[k];
            // Sparse dot of rows i and j over columns < j.
            double s = values[k];
            std::size_t p = offsets[i];
            std::size_t q = offsets[j];
            const std::size_t q_end = offsets[j + 1] - 1;
            while (p < k && q < q_end) {
                if (cols[p] == cols[q]) {
                    s -= values[p] * values[q];
                    ++p;
                    ++q;
                } else if (cols[p] < cols[q]) {
                    ++p;
                } else {
                    ++q;
                }
            }
            values[k] = s / values[offsets[j + 1] - 1];
        }
        double pivot = values[diag] * (1.0 + shift);
        for (std::size_t k = offsets[i]; k < diag; ++k) pivot -= values[k] * values[k];
        if (!(pivot > 0.0) || !std::isfinite(pivot)) return i;
        values[diag] = std::sqrt(pivot);
    }
    return std::nullopt;
}

void lower_solve(const SparseMatrix& l, std::span<const double> r, std::span<double> y) {
    const auto offsets = l.row_offsets();
    const auto cols = l.col_indices();
    const auto vals = l.values();
    for (std::size_t i = 0; i < l.rows(); ++i) {
        double s = r[i];
        const std::size_t diag = offsets[i + 1] - 1;
        for (std::size_t k = offsets[i]; k < diag; ++k) s -= vals[k] * y[cols[k]];
        y[i] = s / vals[diag];
    }
}

// Solves L^T s = y in place on s (s initialized with y).
void lower_transpose_solve(const SparseMatrix& l, std::span<double> s) {
    const auto offsets = l.row_offsets();
    const auto cols = l.col_indices();
    const auto vals = l.values();
    for (std::size_t i = l.rows(); i-- > 0;) {
        const std::size_t diag = offsets[i + 1] - 1;
        s[i] /= vals[diag];
        const double si = s[i];
        for (std::size_t k = offsets[i]; k < diag; ++k) s[cols[k]] -= vals[k] * si;
    }
}

void check_lower_has_diagonal(const SparseMatrix& lower, const char* who) {
    const auto offsets = lower.row_offsets();
    const auto cols = lower.col_indices();
    for (std::size_t i = 0; i < lower.rows(); ++i) {
        if (offsets[i + 1] == offsets[i] || cols[offsets[i + 1] - 1] != i)
            throw Error(std::string(who) + ": missing diagonal entry in row " + std::to_string(i));
    }
}

} // namespace

std::string_view to_string(PreconditionerKind kind) {
    switch (kind) {
    case PreconditionerKind::none: return "none";
    case PreconditionerKind::diag: return "diag";
    case PreconditionerKind::ic0: return "ic0";
    case PreconditionerKind::fsai: return "fsai";
    case PreconditionerKind::learned: return "learned";
    }
    return "unknown";
}

PreconditionerKind parse_preconditioner_kind(std::string_view name) {
    for (auto kind : {PreconditionerKind::none, PreconditionerKind::diag, PreconditionerKind::ic0,
                      PreconditionerKind::fsai, PreconditionerKind::learned})
        if (to_string(kind) == name) return kind;
    throw Error("unknown preconditioner '" + std::string(name) + "' (expected diag|ic0|fsai|learned|none)");
}

Preconditioner::Preconditioner(Payload payload, std::chrono::nanoseconds construct_time)
    : payload_(std::move(payload)), construct_time_(construct_time) {}

PreconditionerKind Preconditioner::kind() const noexcept {
    constexpr std::array kinds{PreconditionerKind::none, PreconditionerKind::diag, PreconditionerKind::ic0,
                               PreconditionerKind::fsai, PreconditionerKind::learned};
    return kinds[payload_.index()];
}

std::size_t Preconditioner::size() const noexcept {
    struct Visitor {
        std::size_t operator()(const IdentityPayload& p) const { return p.n; }
        std::size_t operator()(const JacobiPayload& p) const { return p.inverse_diagonal.size(); }
        std::size_t operator()(const Ic0Payload& p) const { return p.lower.rows(); }
        std::size_t operator()(const FsaiPayload& p) const { return p.lower.rows(); }
        std::size_t operator()(const LearnedSpaiPayload& p) const { return p.factor.rows(); }
    };
    return std::visit(Visitor{}, payload_);
}

void Preconditioner::apply(std::span<const double> r, std::span<double> s) const {
    const std::size_t n = size();
    if (r.size() != n || s.size() != n)
        throw DimensionMismatch("preconditioner of size " + std::to_string(n) + " applied to length " +
                                std::to_string(r.size()));
    struct Visitor {
        std::span<const double> r;
        std::span<double> s;
        void operator()(const IdentityPayload&) const { std::copy(r.begin(), r.end(), s.begin()); }
        void operator()(const JacobiPayload& p) const {
            for (std::size_t i = 0; i < r.size(); ++i) s[i] = r[i] * p.inverse_diagonal[i];
        }
        void operator()(const Ic0Payload& p) const {
            lower_solve(p.lower, r, s);
            lower_transpose_solve(p.lower, s);
        }
        void operator()(const FsaiPayload& p) const {
            auto& t = scratch(r.size());
            spmv(p.lower, r, t);
            spmv_transpose(p.lower, t, s);
        }
        void operator()(const LearnedSpaiPayload& p) const {
            auto& t = scratch(p.factor.cols());
            spmv_transpose(p.factor, r, t);
            spmv(p.factor, t, s);
            for (std::size_t i = 0; i < r.size(); ++i) s[i] += p.epsilon * r[i];
        }
    };
    std::visit(Visitor{r, s}, payload_);
}

std::vector<double> Preconditioner::apply(std::span<const double> r) const {
    std::vector<double> s(r.size());
    apply(r, s);
    return s;
}

Preconditioner build_identity(std::size_t n) {
    return Preconditioner(IdentityPayload{n}, std::chrono::nanoseconds{0});
}

Preconditioner build_jacobi(const SparseMatrix& a) {
    const auto start = clock_type::now();
    require_square(a, "build_jacobi");
    JacobiPayload payload;
    payload.inverse_diagonal.resize(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto k = a.pattern().find(i, i);
        if (!k) throw Error("build_jacobi: missing diagonal entry in row " + std::to_string(i));
        const double d = a.values()[*k];
        if (!(d > 0.0)) throw NotPositiveDefinite("build_jacobi: nonpositive diagonal", i, d);
        payload.inverse_diagonal[i] = 1.0 / d;
    }
    return Preconditioner(std::move(payload), since(start));
}

Preconditioner build_ic0(const SparseMatrix& a) {
    const auto start = clock_type::now();
    require_square(a, "build_ic0");
    if (!a.pattern().is_symmetric()) throw Error("build_ic0: pattern is not symmetric");
    const SparseMatrix lower_a = lower_triangle(a);
    check_lower_has_diagonal(lower_a, "build_ic0");

    constexpr std::array<double, 6> shifts{0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0};
    std::vector<double> values;
    std::optional<std::size_t> failed_row;
    for (std::size_t attempt = 0; attempt < shifts.size(); ++attempt) {
        failed_row = factor_ic0(lower_a, shifts[attempt], values);
        if (!failed_row) {
            Ic0Payload payload{lower_a.with_values(std::move(values)), shifts[attempt], static_cast<int>(attempt + 1)};
            return Preconditioner(std::move(payload), since(start));
        }
    }
    throw NotPositiveDefinite("build_ic0: breakdown persists after shift sigma = 10", *failed_row, 0.0);
}

Preconditioner build_fsai(const SparseMatrix& a) {
    const auto start = clock_type::now();
    require_square(a, "build_fsai");
    if (!a.pattern().is_symmetric()) throw Error("build_fsai: pattern is not symmetric");
    const SparseMatrix lower_a = lower_triangle(a);
    check_lower_has_diagonal(lower_a, "build_fsai");

    const auto offsets = lower_a.row_offsets();
    const auto cols = lower_a.col_indices();
    std::vector<double> g(lower_a.nnz());
    std::size_t fallbacks = 0;
    for (std::size_t i = 0; i < lower_a.rows(); ++i) {
        const std::size_t begin = offsets[i];
        const std::size_t m = offsets[i + 1] - begin;
        DenseMatrix local(m, m);
        for (std::size_t p = 0; p < m; ++p)
            for (std::size_t q = 0; q < m; ++q) local(p, q) = a.at(cols[begin + p], cols[begin + q]);
        std::vector<double> rhs(m, 0.0);
        rhs[m - 1] = 1.0;
        bool ok = false;
        try {
            auto sol = cholesky_solve(cholesky(local), rhs);
            const double last = sol[m - 1];
            if (last > 0.0 && std::isfinite(last)) {
                const double scale = 1.0 / std::sqrt(last);
                for (std::size_t p = 0; p < m; ++p) g[begin + p] = sol[p] * scale;
                ok = true;
            }
        } catch (const Error&) {
        }
        if (!ok) {
            const double d = a.at(i, i);
            if (!(d > 0.0)) throw NotPositiveDefinite("build_fsai: nonpositive diagonal", i, d);
            for (std::size_t p = 0; p < m; ++p) g[begin + p] = 0.0;
            g[begin + m - 1] = 1.0 / std::sqrt(d);
            ++fallbacks;
        }
    }
    FsaiPayload payload{lower_a.with_values(std::move(g)), fallbacks};
    return Preconditioner(std::move(payload), since(start));
}

Preconditioner build_learned_spai(SparseMatrix g, double epsilon) {
    const auto start = clock_type::now();
    if (!(epsilon > 0.0)) throw Error("build_learned_spai: epsilon must be positive");
    require_square(g, "build_learned_spai");
    LearnedSpaiPayload payload{std::move(g), epsilon};
    return Preconditioner(std::move(payload), since(start));
}

} // namespace spai
