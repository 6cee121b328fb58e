#pragma once

#include "spai/sparse.hpp"

#include <Eigen/Core>

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace spai::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = std::shared_ptr<const std::vector<std::size_t>>;

struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the recording order is
/// already topological; backward walks it in reverse.
class Tape {
public:
    Var constant(Mat value);
    Var constant(std::span<const double> column);
    /// Leaf bound to params[offset, offset + rows*cols), row-major. Its gradient lands in the
    /// same slice of the buffer passed to backward().
    Var parameter(std::span<const double> params, std::size_t offset, std::size_t rows, std::size_t cols);

    /// X W^T with X (n x in) and W (out x in).
    Var matmul(Var x, Var w);
    /// Adds a 1 x cols row to every row.
    Var add_bias(Var x, Var b);
    Var relu(Var x);
    Var tanh(Var x);
    Var gather_rows(Var x, Index rows);
    /// out.row(index[k]) += x.row(k), out has n_rows rows.
    Var scatter_add_rows(Var x, Index index, std::size_t n_rows);
    Var concat_cols(std::span<const Var> parts);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var scale(Var a, double s);
    /// y = S x (or S^T x) where S has `pattern` and values taken from the nnz x 1 node `values`.
    Var spmv(std::shared_ptr<const SparsityPattern> pattern, Var values, Var x, bool transpose);
    /// y = (A x) * s, with A fixed; rows accumulated in extended precision.
    Var spmv_fixed(const SparseMatrix& a, Var x, long double s);
    Var dot(Var a, Var b);
    /// Sum of squares, accumulated in extended precision.
    Var sq_norm(Var x);

    const Mat& value(Var v) const { return nodes_.at(v.id).value; }
    double scalar(Var v) const;
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Marks the scalar output that backward() differentiates.
    void finalize(Var loss);
    bool finalized() const noexcept { return finalized_; }

    /// Accumulates seed * d(loss)/d(params) into param_grads. Throws if not finalized.
    void backward(double seed, std::span<double> param_grads);
    /// Gradient of any node after backward(), or an empty matrix if nothing flowed into it.
    const Mat& gradient(Var v) const { return nodes_.at(v.id).grad; }

private:
    enum class Op {
        constant, parameter, matmul, add_bias, relu, tanh, gather, scatter, concat,
        add, sub, scale, spmv, spmv_t, spmv_fixed, dot, sq_norm
    };
    struct Node {
        Op op = Op::constant;
        std::vector<std::size_t> in;
        Mat value;
        Mat grad;
        bool needs_grad = false;
        Index index;
        std::shared_ptr<const SparsityPattern> pattern;
        std::shared_ptr<const SparseMatrix> fixed;
        long double factor = 1.0L;
        std::size_t offset = 0;  // parameter slice
    };

    static Node make_node(Op op, std::vector<std::size_t> in, Mat value);
    Var push(Node node);
    Mat& grad_of(std::size_t id);

    std::vector<Node> nodes_;
    std::size_t loss_ = 0;
    bool finalized_ = false;
};

} // namespace spai::ad
