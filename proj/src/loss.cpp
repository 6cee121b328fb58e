#include "spai/loss.hpp"

#include "spai/error.hpp"

#include <cmath>

namespace spai {

std::string_view to_string(LossNorm norm) {
    switch (norm) {
    case LossNorm::mean_abs: return "mean_abs";
    case LossNorm::frobenius: return "frobenius";
    case LossNorm::entrywise_l1: return "entrywise_l1";
    }
    return "unknown";
}

LossNorm parse_loss_norm(std::string_view name) {
    for (auto n : {LossNorm::mean_abs, LossNorm::frobenius, LossNorm::entrywise_l1})
        if (to_string(n) == name) return n;
    throw Error("unknown loss norm '" + std::string(name) + "'");
}

long double loss_norm_value(const SparseMatrix& a, LossNorm norm) {
    if (a.nnz() == 0) throw Error("loss norm of a matrix with no stored entries");
    long double acc = 0.0L;
    for (double v : a.values()) {
        const long double x = std::fabs(static_cast<long double>(v));
        acc += norm == LossNorm::frobenius ? x * x : x;
    }
    switch (norm) {
    case LossNorm::mean_abs: acc /= static_cast<long double>(a.nnz()); break;
    case LossNorm::frobenius: acc = std::sqrt(acc); break;
    case LossNorm::entrywise_l1: break;
    }
    if (acc == 0.0L) throw Error("loss norm is zero");
    return acc;
}

double sai_loss(const SparseMatrix& a, const SparseMatrix& g, double epsilon, std::span<const double> w,
                LossNorm norm) {
    const std::size_t n = a.rows();
    if (!a.pattern().square() || g.rows() != n || g.cols() != n || w.size() != n)
        throw DimensionMismatch("sai_loss: A, G and w sizes disagree");
    const auto t = spmv_transpose(g, w);
    auto u = spmv(g, t);
    for (std::size_t i = 0; i < n; ++i) u[i] += epsilon * w[i];
    const long double inv = 1.0L / loss_norm_value(a, norm);
    const auto offs = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    long double loss = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        long double acc = 0.0L;
        for (std::size_t k = offs[i]; k < offs[i + 1]; ++k) acc += static_cast<long double>(vals[k]) * u[cols[k]];
        const double z = static_cast<double>(acc * inv) - w[i];
        loss += static_cast<long double>(z) * z;
    }
    return static_cast<double>(loss);
}

ad::Var sai_loss_on_tape(ad::Tape& tape, const SparseMatrix& a, std::shared_ptr<const SparsityPattern> g_pattern,
                         ad::Var g_values, double epsilon, std::span<const double> w, LossNorm norm) {
    const std::size_t n = a.rows();
    if (!a.pattern().square() || g_pattern->rows() != n || w.size() != n)
        throw DimensionMismatch("sai_loss: A, G and w sizes disagree");
    const auto wv = tape.constant(w);
    const auto t = tape.spmv(g_pattern, g_values, wv, true);
    const auto u = tape.add(tape.spmv(g_pattern, g_values, t, false), tape.scale(wv, epsilon));
    const auto z = tape.sub(tape.spmv_fixed(a, u, 1.0L / loss_norm_value(a, norm)), wv);
    return tape.sq_norm(z);
}

std::vector<double> hutchinson_samples(const SparseMatrix& a, const ApplyFn& m_apply, std::size_t n_samples, Rng& rng) {
    const std::size_t n = a.rows();
    std::vector<double> w(n), mw(n), amw(n), out;
    out.reserve(n_samples);
    for (std::size_t s = 0; s < n_samples; ++s) {
        rng.fill_normal(w);
        m_apply(w, mw);
        spmv(a, mw, amw);
        long double acc = 0.0L;
        for (std::size_t i = 0; i < n; ++i) {
            const long double z = static_cast<long double>(amw[i]) - w[i];
            acc += z * z;
        }
        out.push_back(static_cast<double>(acc));
    }
    return out;
}

double hutchinson_frobenius_estimate(const SparseMatrix& a, const ApplyFn& m_apply, std::size_t n_samples, Rng& rng) {
    if (n_samples == 0) throw Error("hutchinson: need at least one sample");
    const auto s = hutchinson_samples(a, m_apply, n_samples, rng);
    long double acc = 0.0L;
    for (double v : s) acc += v;
    return static_cast<double>(acc / static_cast<long double>(n_samples));
}

} // namespace spai
