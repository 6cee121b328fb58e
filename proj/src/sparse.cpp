#include "spai/sparse.hpp"

#include "spai/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

namespace spai {

SparsityPattern::SparsityPattern(std::size_t n_rows, std::size_t n_cols,
                                 std::vector<std::size_t> row_offsets,
                                 std::vector<std::size_t> col_indices)
    : n_rows_(n_rows), n_cols_(n_cols),
      row_offsets_(std::move(row_offsets)), col_indices_(std::move(col_indices)) {
    if (row_offsets_.size() != n_rows_ + 1)
        throw DimensionMismatch("row_offsets must have n_rows + 1 entries");
    if (row_offsets_.front() != 0 || row_offsets_.back() != col_indices_.size())
        throw Error("row_offsets must start at 0 and end at nnz");
    for (std::size_t i = 0; i < n_rows_; ++i) {
        if (row_offsets_[i] > row_offsets_[i + 1])
            throw Error("row_offsets must be nondecreasing (row " + std::to_string(i) + ")");
        for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            if (col_indices_[k] >= n_cols_)
                throw Error("column index out of range in row " + std::to_string(i));
            if (k > row_offsets_[i] && col_indices_[k] <= col_indices_[k - 1])
                throw Error("column indices must be strictly increasing in row " + std::to_string(i));
        }
    }
}

std::optional<std::size_t> SparsityPattern::find(std::size_t i, std::size_t j) const {
    if (i >= n_rows_) return std::nullopt;
    const auto first = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
    const auto last = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
    const auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return std::nullopt;
    return static_cast<std::size_t>(it - col_indices_.begin());
}

std::vector<std::size_t> SparsityPattern::entry_rows() const {
    std::vector<std::size_t> rows(nnz());
    for (std::size_t i = 0; i < n_rows_; ++i)
        for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) rows[k] = i;
    return rows;
}

bool SparsityPattern::is_symmetric() const {
    if (!square()) return false;
    for (std::size_t i = 0; i < n_rows_; ++i)
        for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
            if (!find(col_indices_[k], i)) return false;
    return true;
}

std::vector<std::size_t> SparsityPattern::transpose_positions() const {
    std::vector<std::size_t> pos(nnz());
    for (std::size_t i = 0; i < n_rows_; ++i) {
        for (std::size_t k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
            const auto t = find(col_indices_[k], i);
            if (!t) throw Error("pattern is not symmetric");
            pos[k] = *t;
        }
    }
    return pos;
}

SparseMatrix::SparseMatrix(std::shared_ptr<const SparsityPattern> pattern, std::vector<double> values)
    : pattern_(std::move(pattern)), values_(std::move(values)) {
    if (!pattern_) throw Error("null sparsity pattern");
    if (values_.size() != pattern_->nnz())
        throw DimensionMismatch("values length " + std::to_string(values_.size()) +
                                " does not match nnz " + std::to_string(pattern_->nnz()));
}

SparseMatrix::SparseMatrix(std::size_t n_rows, std::size_t n_cols,
                           std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices,
                           std::vector<double> values)
    : SparseMatrix(std::make_shared<const SparsityPattern>(n_rows, n_cols, std::move(row_offsets),
                                                           std::move(col_indices)),
                   std::move(values)) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                         std::vector<Triplet> triplets, DuplicatePolicy duplicates) {
    for (const auto& t : triplets) {
        if (t.row >= n_rows || t.col >= n_cols)
            throw Error("triplet (" + std::to_string(t.row) + ", " + std::to_string(t.col) +
                        ") out of range");
    }
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> offsets(n_rows + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    cols.reserve(triplets.size());
    vals.reserve(triplets.size());
    for (std::size_t k = 0; k < triplets.size(); ++k) {
        const auto& t = triplets[k];
        if (!cols.empty() && k > 0 && triplets[k - 1].row == t.row && triplets[k - 1].col == t.col) {
            if (duplicates == DuplicatePolicy::reject)
                throw Error("duplicate entry (" + std::to_string(t.row) + ", " + std::to_string(t.col) + ")");
            vals.back() += t.value;
            continue;
        }
        cols.push_back(t.col);
        vals.push_back(t.value);
        ++offsets[t.row + 1];
    }
    for (std::size_t i = 0; i < n_rows; ++i) offsets[i + 1] += offsets[i];
    return SparseMatrix(n_rows, n_cols, std::move(offsets), std::move(cols), std::move(vals));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
    std::vector<double> ones(n, 1.0);
    return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> diag) {
    const std::size_t n = diag.size();
    std::vector<std::size_t> offsets(n + 1);
    std::vector<std::size_t> cols(n);
    for (std::size_t i = 0; i <= n; ++i) offsets[i] = i;
    for (std::size_t i = 0; i < n; ++i) cols[i] = i;
    return SparseMatrix(n, n, std::move(offsets), std::move(cols),
                        std::vector<double>(diag.begin(), diag.end()));
}

double SparseMatrix::at(std::size_t i, std::size_t j) const {
    const auto k = pattern_->find(i, j);
    return k ? values_[*k] : 0.0;
}

SparseMatrix SparseMatrix::with_values(std::vector<double> values) const {
    return SparseMatrix(pattern_, std::move(values));
}

std::vector<double> SparseMatrix::diagonal_values() const {
    const std::size_t n = std::min(rows(), cols());
    std::vector<double> d(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) d[i] = at(i, i);
    return d;
}

std::vector<Triplet> SparseMatrix::triplets() const {
    std::vector<Triplet> out;
    out.reserve(nnz());
    const auto offsets = row_offsets();
    const auto cols = col_indices();
    for (std::size_t i = 0; i < rows(); ++i)
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) out.push_back({i, cols[k], values_[k]});
    return out;
}

void spmv(const SparseMatrix& a, std::span<const double> x, std::span<double> y) {
    if (x.size() != a.cols() || y.size() != a.rows())
        throw DimensionMismatch("spmv: matrix is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ", x has " + std::to_string(x.size()));
    const auto offsets = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) sum += vals[k] * x[cols[k]];
        y[i] = sum;
    }
}

std::vector<double> spmv(const SparseMatrix& a, std::span<const double> x) {
    std::vector<double> y(a.rows());
    spmv(a, x, y);
    return y;
}

void spmv_transpose(const SparseMatrix& a, std::span<const double> x, std::span<double> y) {
    if (x.size() != a.rows() || y.size() != a.cols())
        throw DimensionMismatch("spmv_transpose: matrix is " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ", x has " + std::to_string(x.size()));
    const auto offsets = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    std::fill(y.begin(), y.end(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double xi = x[i];
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) y[cols[k]] += vals[k] * xi;
    }
}

std::vector<double> spmv_transpose(const SparseMatrix& a, std::span<const double> x) {
    std::vector<double> y(a.cols());
    spmv_transpose(a, x, y);
    return y;
}

double mean_abs_nonzero_norm(const SparseMatrix& a) {
    if (a.nnz() == 0) throw Error("mean_abs_nonzero_norm: matrix has no stored entries");
    long double sum = 0.0L;
    for (double v : a.values()) sum += std::fabs(v);
    return static_cast<double>(sum / static_cast<long double>(a.nnz()));
}

double frobenius_norm(const SparseMatrix& a) {
    long double sum = 0.0L;
    for (double v : a.values()) sum += static_cast<long double>(v) * v;
    return static_cast<double>(std::sqrt(sum));
}

double entrywise_l1_norm(const SparseMatrix& a) {
    long double sum = 0.0L;
    for (double v : a.values()) sum += std::fabs(v);
    return static_cast<double>(sum);
}

SparseMatrix scaled(const SparseMatrix& a, double alpha) {
    std::vector<double> vals(a.values().begin(), a.values().end());
    for (double& v : vals) v *= alpha;
    return a.with_values(std::move(vals));
}

SparseMatrix transpose(const SparseMatrix& a) {
    const auto offsets = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    std::vector<std::size_t> t_offsets(a.cols() + 1, 0);
    for (std::size_t c : cols) ++t_offsets[c + 1];
    for (std::size_t j = 0; j < a.cols(); ++j) t_offsets[j + 1] += t_offsets[j];
    std::vector<std::size_t> cursor(t_offsets.begin(), t_offsets.end() - 1);
    std::vector<std::size_t> t_cols(a.nnz());
    std::vector<double> t_vals(a.nnz());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
            const std::size_t dst = cursor[cols[k]]++;
            t_cols[dst] = i;
            t_vals[dst] = vals[k];
        }
    }
    return SparseMatrix(a.cols(), a.rows(), std::move(t_offsets), std::move(t_cols), std::move(t_vals));
}

SparseMatrix multiply(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.cols() != b.rows()) throw DimensionMismatch("multiply: inner dimensions differ");
    const auto a_off = a.row_offsets();
    const auto a_col = a.col_indices();
    const auto a_val = a.values();
    const auto b_off = b.row_offsets();
    const auto b_col = b.col_indices();
    const auto b_val = b.values();

    std::vector<std::size_t> offsets(a.rows() + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    std::vector<double> accum(b.cols(), 0.0);
    std::vector<std::size_t> marker(b.cols(), static_cast<std::size_t>(-1));
    std::vector<std::size_t> row_cols;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        row_cols.clear();
        for (std::size_t ka = a_off[i]; ka < a_off[i + 1]; ++ka) {
            const std::size_t j = a_col[ka];
            for (std::size_t kb = b_off[j]; kb < b_off[j + 1]; ++kb) {
                const std::size_t c = b_col[kb];
                if (marker[c] != i) {
                    marker[c] = i;
                    accum[c] = 0.0;
                    row_cols.push_back(c);
                }
                accum[c] += a_val[ka] * b_val[kb];
            }
        }
        std::sort(row_cols.begin(), row_cols.end());
        for (std::size_t c : row_cols) {
            cols.push_back(c);
            vals.push_back(accum[c]);
        }
        offsets[i + 1] = cols.size();
    }
    return SparseMatrix(a.rows(), b.cols(), std::move(offsets), std::move(cols), std::move(vals));
}

SparseMatrix lower_triangle(const SparseMatrix& a) {
    const auto offsets = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    std::vector<std::size_t> l_offsets(a.rows() + 1, 0);
    std::vector<std::size_t> l_cols;
    std::vector<double> l_vals;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = offsets[i]; k < offsets[i + 1] && cols[k] <= i; ++k) {
            l_cols.push_back(cols[k]);
            l_vals.push_back(vals[k]);
        }
        l_offsets[i + 1] = l_cols.size();
    }
    return SparseMatrix(a.rows(), a.cols(), std::move(l_offsets), std::move(l_cols), std::move(l_vals));
}

bool same_pattern(const SparseMatrix& a, const SparseMatrix& b) {
    return a.shared_pattern() == b.shared_pattern() || a.pattern() == b.pattern();
}

std::vector<std::size_t> hop_distances(const SparsityPattern& pattern, std::size_t source) {
    constexpr auto unreachable = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(pattern.rows(), unreachable);
    if (source >= pattern.rows()) return dist;
    std::deque<std::size_t> queue{source};
    dist[source] = 0;
    const auto cols = pattern.col_indices();
    while (!queue.empty()) {
        const std::size_t i = queue.front();
        queue.pop_front();
        for (std::size_t k = pattern.row_begin(i); k < pattern.row_end(i); ++k) {
            const std::size_t j = cols[k];
            if (j < dist.size() && dist[j] == unreachable) {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    return dist;
}

} // namespace spai
