#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace spai {

/// CSR structure without values. Row entries are sorted by column, no duplicates.
class SparsityPattern {
public:
    SparsityPattern() = default;
    SparsityPattern(std::size_t n_rows, std::size_t n_cols,
                    std::vector<std::size_t> row_offsets,
                    std::vector<std::size_t> col_indices);

    std::size_t rows() const noexcept { return n_rows_; }
    std::size_t cols() const noexcept { return n_cols_; }
    std::size_t nnz() const noexcept { return col_indices_.size(); }
    bool square() const noexcept { return n_rows_ == n_cols_; }

    std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
    std::span<const std::size_t> col_indices() const noexcept { return col_indices_; }

    std::size_t row_begin(std::size_t i) const { return row_offsets_[i]; }
    std::size_t row_end(std::size_t i) const { return row_offsets_[i + 1]; }

    /// Position of entry (i, j) in CSR order, if stored.
    std::optional<std::size_t> find(std::size_t i, std::size_t j) const;

    /// Row index of every stored entry, in CSR order.
    std::vector<std::size_t> entry_rows() const;

    /// Checked, not assumed: every stored (i, j) has a stored (j, i).
    bool is_symmetric() const;

    /// For each stored entry k = (i, j), the position of (j, i). Requires a symmetric pattern.
    std::vector<std::size_t> transpose_positions() const;

    bool operator==(const SparsityPattern& other) const = default;

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<std::size_t> col_indices_;
};

struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
};

enum class DuplicatePolicy { reject, sum };

/// CSR matrix: a shared immutable pattern plus one value per stored entry.
/// Explicit zeros are kept and count as pattern members.
class SparseMatrix {
public:
    SparseMatrix() : pattern_(std::make_shared<const SparsityPattern>()) {}
    SparseMatrix(std::shared_ptr<const SparsityPattern> pattern, std::vector<double> values);
    SparseMatrix(std::size_t n_rows, std::size_t n_cols,
                 std::vector<std::size_t> row_offsets,
                 std::vector<std::size_t> col_indices,
                 std::vector<double> values);

    static SparseMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                      std::vector<Triplet> triplets,
                                      DuplicatePolicy duplicates = DuplicatePolicy::reject);
    static SparseMatrix identity(std::size_t n);
    static SparseMatrix diagonal(std::span<const double> diag);

    std::size_t rows() const noexcept { return pattern_->rows(); }
    std::size_t cols() const noexcept { return pattern_->cols(); }
    std::size_t nnz() const noexcept { return values_.size(); }

    const SparsityPattern& pattern() const noexcept { return *pattern_; }
    const std::shared_ptr<const SparsityPattern>& shared_pattern() const noexcept { return pattern_; }

    std::span<const std::size_t> row_offsets() const noexcept { return pattern_->row_offsets(); }
    std::span<const std::size_t> col_indices() const noexcept { return pattern_->col_indices(); }
    std::span<const double> values() const noexcept { return values_; }

    /// Stored value at (i, j), or 0 when (i, j) is not in the pattern.
    double at(std::size_t i, std::size_t j) const;

    /// Same pattern, new values.
    SparseMatrix with_values(std::vector<double> values) const;

    std::vector<double> diagonal_values() const;
    std::vector<Triplet> triplets() const;

private:
    std::shared_ptr<const SparsityPattern> pattern_;
    std::vector<double> values_;
};

/// y = A x, accumulated left to right within each row.
std::vector<double> spmv(const SparseMatrix& a, std::span<const double> x);
void spmv(const SparseMatrix& a, std::span<const double> x, std::span<double> y);

/// y = A^T x.
std::vector<double> spmv_transpose(const SparseMatrix& a, std::span<const double> x);
void spmv_transpose(const SparseMatrix& a, std::span<const double> x, std::span<double> y);

/// Mean of |A_ij| over stored entries (explicit zeros included).
double mean_abs_nonzero_norm(const SparseMatrix& a);
double frobenius_norm(const SparseMatrix& a);
double entrywise_l1_norm(const SparseMatrix& a);

SparseMatrix scaled(const SparseMatrix& a, double alpha);
SparseMatrix transpose(const SparseMatrix& a);
SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b);

/// Entries with column <= row, values kept.
SparseMatrix lower_triangle(const SparseMatrix& a);

bool same_pattern(const SparseMatrix& a, const SparseMatrix& b);

/// Breadth-first hop distance from `source` over the pattern graph (unreachable = SIZE_MAX).
std::vector<std::size_t> hop_distances(const SparsityPattern& pattern, std::size_t source);

} // namespace spai
