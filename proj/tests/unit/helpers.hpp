#pragma once

#include "spai/dense.hpp"
#include "spai/random.hpp"
#include "spai/sparse.hpp"

#include <cmath>
#include <vector>

namespace testing {

inline spai::SparseMatrix random_sparse(std::size_t rows, std::size_t cols, double density, spai::Rng& rng) {
    std::vector<spai::Triplet> t;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            if (rng.uniform() < density) t.push_back({i, j, rng.normal()});
    return spai::SparseMatrix::from_triplets(rows, cols, std::move(t));
}

// Q diag(lambda) Q^T with Q from Gram-Schmidt on a Gaussian matrix.
inline spai::DenseMatrix random_spd_dense(std::size_t n, spai::Rng& rng, double lo = 0.5, double hi = 5.0) {
    spai::DenseMatrix q(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        auto v = rng.normal_vector(n);
        for (std::size_t k = 0; k < j; ++k) {
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d += v[i] * q(i, k);
            for (std::size_t i = 0; i < n; ++i) v[i] -= d * q(i, k);
        }
        double nrm = 0.0;
        for (double x : v) nrm += x * x;
        nrm = std::sqrt(nrm);
        for (std::size_t i = 0; i < n; ++i) q(i, j) = v[i] / nrm;
    }
    spai::DenseMatrix a(n, n);
    std::vector<double> lam(n);
    for (auto& l : lam) l = rng.uniform(lo, hi);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += q(i, k) * lam[k] * q(j, k);
            a(i, j) = s;
        }
    return spai::symmetrized(a);
}

inline std::vector<double> dense_matvec(const spai::DenseMatrix& a, const std::vector<double>& x) {
    std::vector<double> y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) y[i] += a(i, j) * x[j];
    return y;
}

inline double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

} // namespace testing
