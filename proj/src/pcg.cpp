#include "spai/pcg.hpp"

#include "spai/error.hpp"

#include <cmath>
#include <sstream>

namespace spai {

namespace {

using clock_type = std::chrono::steady_clock;

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void true_residual(const SparseMatrix& a, std::span<const double> b, std::span<const double> x,
                   std::span<double> r) {
    spmv(a, x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
}

} // namespace

nlohmann::json to_json(const SolveReport& report, bool include_solution) {
    nlohmann::json j;
    j["k"] = report.iterations;
    j["converged"] = report.converged;
    j["final_relative_residual"] = report.final_relative_residual;
    j["t_construct_ns"] = report.t_construct.count();
    j["t_apply_total_ns"] = report.t_apply_total.count();
    j["t_cg_total_ns"] = report.t_cg_total.count();
    if (!report.residual_history.empty()) j["residual_history"] = report.residual_history;
    if (include_solution) j["x"] = report.x;
    return j;
}

SymmetryDiagnostic verify_spd_symmetric(const SparseMatrix& a) {
    SymmetryDiagnostic diag;
    if (!a.pattern().square()) {
        diag.message = "matrix is not square";
        return diag;
    }
    diag.pattern_symmetric = a.pattern().is_symmetric();
    if (!diag.pattern_symmetric) {
        diag.message = "pattern is not symmetric";
        return diag;
    }
    const auto mirror = a.pattern().transpose_positions();
    const auto vals = a.values();
    for (std::size_t k = 0; k < vals.size(); ++k)
        diag.max_value_asymmetry = std::max(diag.max_value_asymmetry, std::fabs(vals[k] - vals[mirror[k]]));
    const double tol = 1e-12 * (a.nnz() ? mean_abs_nonzero_norm(a) : 0.0);
    diag.values_symmetric = diag.max_value_asymmetry <= tol;
    if (!diag.values_symmetric) {
        std::ostringstream msg;
        msg << "values are not symmetric: max |A_ij - A_ji| = " << diag.max_value_asymmetry;
        diag.message = msg.str();
    } else {
        diag.message = "symmetric (definiteness not certified)";
    }
    return diag;
}

SolveReport pcg_solve(const SparseMatrix& a, std::span<const double> b, const Preconditioner& m,
                      const SolveConfig& cfg) {
    if (!(cfg.rtol > 0.0)) throw Error("pcg_solve: rtol must be positive");
    if (cfg.residual_refresh_period < 1) throw Error("pcg_solve: residual_refresh_period must be >= 1");
    if (!a.pattern().square()) throw DimensionMismatch("pcg_solve: matrix is not square");
    const std::size_t n = a.rows();
    if (b.size() != n) throw DimensionMismatch("pcg_solve: rhs length does not match matrix");
    if (m.size() != n) throw DimensionMismatch("pcg_solve: preconditioner size does not match matrix");
    if (cfg.verify_symmetry) {
        const auto diag = verify_spd_symmetric(a);
        if (!diag.ok()) throw Error("pcg_solve: " + diag.message);
    }

    SolveReport report;
    report.t_construct = m.construct_time();
    report.x.assign(n, 0.0);
    const double norm_b = norm2(b);
    if (norm_b == 0.0) {
        report.converged = true;
        return report;
    }
    const std::size_t max_iters = cfg.max_iters.value_or(20 * n);

    const auto loop_start = clock_type::now();
    std::chrono::nanoseconds apply_time{0};
    auto timed_apply = [&](std::span<const double> in, std::span<double> out) {
        const auto t0 = clock_type::now();
        m.apply(in, out);
        apply_time += std::chrono::duration_cast<std::chrono::nanoseconds>(clock_type::now() - t0);
    };

    auto& x = report.x;
    std::vector<double> r(b.begin(), b.end());  // x0 = 0
    std::vector<double> d(n), q(n), s(n);
    timed_apply(r, d);
    double delta_new = dot(r, d);
    const double delta_0 = delta_new;

    std::size_t i = 0;
    while (i < max_iters) {
        if (cfg.criterion == StopCriterion::preconditioned_delta && delta_new <= cfg.rtol * cfg.rtol * delta_0) {
            report.converged = true;
            break;
        }
        spmv(a, d, q);
        const double dq = dot(d, q);
        if (!(dq > 0.0)) throw NotPositiveDefinite("pcg_solve: d^T A d <= 0, matrix or preconditioner not SPD", i, dq);
        const double alpha = delta_new / dq;
        for (std::size_t k = 0; k < n; ++k) x[k] += alpha * d[k];

        const bool refresh = i % cfg.residual_refresh_period == 0;
        if (refresh) {
            true_residual(a, b, x, r);
        } else {
            for (std::size_t k = 0; k < n; ++k) r[k] -= alpha * q[k];
        }
        ++i;

        const double rel = norm2(r) / norm_b;
        if (cfg.track_history) report.residual_history.push_back(rel);
        if (cfg.criterion == StopCriterion::true_residual && rel < cfg.rtol) {
            if (!refresh) true_residual(a, b, x, r);
            if (norm2(r) / norm_b <= cfg.rtol) {
                report.converged = true;
                break;
            }
            // The recurrence drifted; continue from the replaced residual.
        }
        if (refresh && cfg.refresh_skips_direction_update) continue;

        timed_apply(r, s);
        const double delta_old = delta_new;
        delta_new = dot(r, s);
        const double beta = delta_new / delta_old;
        for (std::size_t k = 0; k < n; ++k) d[k] = s[k] + beta * d[k];
    }

    const auto total = std::chrono::duration_cast<std::chrono::nanoseconds>(clock_type::now() - loop_start);
    report.iterations = i;
    report.t_apply_total = apply_time;
    report.t_cg_total = total - apply_time;
    true_residual(a, b, x, r);
    report.final_relative_residual = norm2(r) / norm_b;
    return report;
}

} // namespace spai
