#include "spai/spectral.hpp"

#include "spai/error.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace spai {

namespace {

void check_guard(std::size_t n) {
    if (n > dense_size_guard) {
        std::ostringstream msg;
        msg << "spectral evaluation needs n <= " << dense_size_guard << ", got " << n;
        throw Error(msg.str());
    }
}

} // namespace

DenseMatrix dense_operator(std::size_t n, const ApplyFn& m_apply) {
    check_guard(n);
    DenseMatrix k(n, n);
    std::vector<double> e(n, 0.0), col(n);
    for (std::size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        m_apply(e, col);
        k.set_column(j, col);
        e[j] = 0.0;
    }
    return symmetrized(k);
}

std::vector<double> preconditioned_spectrum(const SparseMatrix& a, const ApplyFn& m_apply) {
    const std::size_t n = a.rows();
    check_guard(n);
    const auto l = cholesky(dense_from_sparse(a));  // A = L L^T, so R = L^T
    const auto k = dense_operator(n, m_apply);
    const auto rkrt = symmetrized(matmul(transpose(l), matmul(k, l)));
    auto eig = symmetric_eigen(rkrt, false);
    if (!eig.values.empty() && !(eig.values.front() > 0.0))
        throw NotPositiveDefinite("preconditioned_spectrum: nonpositive eigenvalue, M is not SPD", 0,
                                  eig.values.front());
    return eig.values;
}

std::vector<double> preconditioned_spectrum(const SparseMatrix& a, const Preconditioner& m) {
    return preconditioned_spectrum(a, [&m](std::span<const double> r, std::span<double> s) { m.apply(r, s); });
}

double condition_number(std::span<const double> eigenvalues) {
    if (eigenvalues.empty()) throw Error("condition_number: empty spectrum");
    double lo = eigenvalues[0], hi = eigenvalues[0];
    for (double v : eigenvalues) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(lo > 0.0)) throw Error("condition_number: spectrum must be positive");
    return hi / lo;
}

double kaporin_number(std::span<const double> eigenvalues) {
    if (eigenvalues.empty()) throw Error("kaporin_number: empty spectrum");
    bool constant = true;
    for (double v : eigenvalues) constant = constant && v == eigenvalues[0];
    if (constant && eigenvalues[0] > 0.0) return 1.0;
    long double sum = 0.0L, log_sum = 0.0L;
    for (double v : eigenvalues) {
        if (!(v > 0.0)) throw Error("kaporin_number: spectrum must be positive");
        sum += v;
        log_sum += std::log(static_cast<long double>(v));
    }
    const auto count = static_cast<long double>(eigenvalues.size());
    // log(AM) - log(GM), so neither the product nor its root is ever formed
    const long double log_ratio = std::log(sum / count) - log_sum / count;
    return static_cast<double>(std::max(1.0L, std::exp(log_ratio)));
}

ErrorBoundReport error_bound_check(const SparseMatrix& a, const ApplyFn& m_apply) {
    const std::size_t n = a.rows();
    check_guard(n);
    const auto ad = dense_from_sparse(a);
    const auto k = dense_operator(n, m_apply);
    const double inv_norm = 1.0 / mean_abs_nonzero_norm(a);
    auto e = inv_norm * matmul(ad, k);
    for (std::size_t i = 0; i < n; ++i) e(i, i) -= 1.0;

    ErrorBoundReport r;
    const auto spectrum = preconditioned_spectrum(a, m_apply);
    r.kappa = condition_number(spectrum);
    r.kaporin = kaporin_number(spectrum);
    r.sigma_max_e = spectral_norm(e);
    r.first_order = 1.0 + 2.0 * r.sigma_max_e;
    if (r.sigma_max_e < 1.0) {
        r.bound_value = (1.0 + r.sigma_max_e) / (1.0 - r.sigma_max_e);
        r.bound_holds = r.kappa <= *r.bound_value + error_bound_slack;
    }
    return r;
}

ErrorBoundReport error_bound_check(const SparseMatrix& a, const SparseMatrix& g, double epsilon) {
    const auto m = build_learned_spai(g, epsilon);
    return error_bound_check(a, [&m](std::span<const double> r, std::span<double> s) { m.apply(r, s); });
}

nlohmann::json to_json(const ErrorBoundReport& r) {
    nlohmann::json j;
    j["kappa"] = r.kappa;
    j["kaporin"] = r.kaporin;
    j["sigma_max_E"] = r.sigma_max_e;
    j["bound_value"] = r.bound_value ? nlohmann::json(*r.bound_value) : nlohmann::json(nullptr);
    j["bound_holds"] = r.bound_holds ? nlohmann::json(*r.bound_holds) : nlohmann::json(nullptr);
    j["first_order"] = r.first_order;
    return j;
}

} // namespace spai
