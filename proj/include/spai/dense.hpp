#pragma once

#include "spai/sparse.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace spai {

/// Row-major dense matrix. Used as an oracle and evaluator, never on the solver path.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static DenseMatrix identity(std::size_t n);
    static DenseMatrix diagonal(std::span<const double> d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    std::vector<double> column(std::size_t j) const;
    void set_column(std::size_t j, std::span<const double> values);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix operator+(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator-(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix operator*(double s, const DenseMatrix& a);
std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x);
double frobenius_norm(const DenseMatrix& a);
double max_asymmetry(const DenseMatrix& a);
DenseMatrix symmetrized(const DenseMatrix& a);

/// Lower Cholesky factor L with L L^T = A. Throws NotPositiveDefinite with the failing pivot.
DenseMatrix cholesky(const DenseMatrix& a);

/// Solves L y = b (forward substitution).
std::vector<double> solve_lower(const DenseMatrix& l, std::span<const double> b);
/// Solves L^T x = y (backward substitution using the lower factor).
std::vector<double> solve_lower_transpose(const DenseMatrix& l, std::span<const double> y);
std::vector<double> cholesky_solve(const DenseMatrix& l, std::span<const double> b);
/// Inverse of an SPD matrix through its Cholesky factor.
DenseMatrix spd_inverse(const DenseMatrix& a);

struct EigenDecomposition {
    std::vector<double> values;  ///< ascending
    DenseMatrix vectors;         ///< column i pairs with values[i]
    int sweeps = 0;
};

/// Cyclic Jacobi rotations until max off-diagonal < 1e-12 ||A||_F, at most 50 sweeps.
EigenDecomposition symmetric_eigen(const DenseMatrix& a, bool want_vectors = true);

/// Largest singular value, sqrt(lambda_max(E^T E)).
double spectral_norm(const DenseMatrix& e);

inline constexpr std::size_t dense_size_guard = 4000;

DenseMatrix dense_from_sparse(const SparseMatrix& a);
/// Keeps every entry whose magnitude exceeds `drop_below` (0 keeps all nonzeros).
SparseMatrix sparse_from_dense(const DenseMatrix& a, double drop_below = 0.0);

} // namespace spai
