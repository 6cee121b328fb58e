#include "spai/dense.hpp"

#include "spai/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace spai {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw DimensionMismatch("dense data length does not match shape");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> d) {
    DenseMatrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
}

std::vector<double> DenseMatrix::column(std::size_t j) const {
    std::vector<double> c(rows_);
    for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
    return c;
}

void DenseMatrix::set_column(std::size_t j, std::span<const double> values) {
    if (values.size() != rows_) throw DimensionMismatch("set_column: length mismatch");
    for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
    DenseMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("operator+: shape mismatch");
    DenseMatrix c = a;
    for (std::size_t k = 0; k < c.data().size(); ++k) c.data()[k] += b.data()[k];
    return c;
}

DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("operator-: shape mismatch");
    DenseMatrix c = a;
    for (std::size_t k = 0; k < c.data().size(); ++k) c.data()[k] -= b.data()[k];
    return c;
}

DenseMatrix operator*(double s, const DenseMatrix& a) {
    DenseMatrix c = a;
    for (double& v : c.data()) v *= s;
    return c;
}

std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
    if (x.size() != a.cols()) throw DimensionMismatch("matvec: length mismatch");
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

double frobenius_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return std::sqrt(s);
}

double max_asymmetry(const DenseMatrix& a) {
    if (a.rows() != a.cols()) return INFINITY;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) worst = std::max(worst, std::fabs(a(i, j) - a(j, i)));
    return worst;
}

DenseMatrix symmetrized(const DenseMatrix& a) {
    DenseMatrix s = a;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = i + 1; j < a.cols(); ++j) s(i, j) = s(j, i) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

DenseMatrix cholesky(const DenseMatrix& a) {
    if (a.rows() != a.cols()) throw DimensionMismatch("cholesky: matrix is not square");
    const std::size_t n = a.rows();
    const double scale = std::max(1.0, frobenius_norm(a));
    if (max_asymmetry(a) > 1e-12 * scale) throw Error("cholesky: matrix is not symmetric");
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double pivot = a(j, j);
        for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
        if (!(pivot > 0.0)) throw NotPositiveDefinite("cholesky: nonpositive pivot", j, pivot);
        const double ljj = std::sqrt(pivot);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

std::vector<double> solve_lower(const DenseMatrix& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw DimensionMismatch("solve_lower: length mismatch");
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * y[k];
        y[i] = s / l(i, i);
    }
    return y;
}

std::vector<double> solve_lower_transpose(const DenseMatrix& l, std::span<const double> y) {
    const std::size_t n = l.rows();
    if (y.size() != n) throw DimensionMismatch("solve_lower_transpose: length mismatch");
    std::vector<double> x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x[k];
        x[ii] = s / l(ii, ii);
    }
    return x;
}

std::vector<double> cholesky_solve(const DenseMatrix& l, std::span<const double> b) {
    const auto y = solve_lower(l, b);
    return solve_lower_transpose(l, y);
}

DenseMatrix spd_inverse(const DenseMatrix& a) {
    const auto l = cholesky(a);
    const std::size_t n = a.rows();
    DenseMatrix inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        inv.set_column(j, cholesky_solve(l, e));
    }
    return symmetrized(inv);
}

EigenDecomposition symmetric_eigen(const DenseMatrix& input, bool want_vectors) {
    if (input.rows() != input.cols()) throw DimensionMismatch("symmetric_eigen: matrix is not square");
    const std::size_t n = input.rows();
    const double norm = frobenius_norm(input);
    if (max_asymmetry(input) > 1e-10 * std::max(1.0, norm))
        throw Error("symmetric_eigen: matrix is not symmetric");

    DenseMatrix a = symmetrized(input);
    DenseMatrix v = want_vectors ? DenseMatrix::identity(n) : DenseMatrix();
    const double tol = 1e-12 * norm;
    constexpr int max_sweeps = 50;

    auto max_off = [&] {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) m = std::max(m, std::fabs(a(i, j)));
        return m;
    };

    int sweep = 0;
    for (; sweep <= max_sweeps; ++sweep) {
        const double off = max_off();
        if (off <= tol || norm == 0.0) break;
        if (sweep == max_sweeps) throw ConvergenceError("symmetric_eigen: no convergence in 50 sweeps", off);
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                // Rotation angle that annihilates a(p, q).
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                if (want_vectors) {
                    for (std::size_t k = 0; k < n; ++k) {
                        const double vkp = v(k, p);
                        const double vkq = v(k, q);
                        v(k, p) = c * vkp - s * vkq;
                        v(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });

    EigenDecomposition out;
    out.sweeps = sweep;
    out.values.resize(n);
    if (want_vectors) out.vectors = DenseMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        if (want_vectors)
            for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

double spectral_norm(const DenseMatrix& e) {
    if (e.rows() == 0 || e.cols() == 0) return 0.0;
    const auto gram = symmetrized(matmul(transpose(e), e));
    const auto eig = symmetric_eigen(gram, false);
    return std::sqrt(std::max(0.0, eig.values.back()));
}

DenseMatrix dense_from_sparse(const SparseMatrix& a) {
    if (a.rows() > dense_size_guard || a.cols() > dense_size_guard)
        throw Error("dense_from_sparse: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                    " exceeds the dense size guard of " + std::to_string(dense_size_guard));
    DenseMatrix d(a.rows(), a.cols());
    const auto offsets = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) d(i, cols[k]) = vals[k];
    return d;
}

SparseMatrix sparse_from_dense(const DenseMatrix& a, double drop_below) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double v = a(i, j);
            if (v != 0.0 && std::fabs(v) > drop_below) t.push_back({i, j, v});
        }
    return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

} // namespace spai
