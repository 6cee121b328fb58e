#include "spai/tape.hpp"

#include "spai/error.hpp"

namespace spai::ad {

Tape::Node Tape::make_node(Op op, std::vector<std::size_t> in, Mat value) {
    Node n;
    n.op = op;
    n.in = std::move(in);
    n.value = std::move(value);
    return n;
}

Var Tape::push(Node node) {
    if (finalized_) throw Error("tape: cannot record after finalize");
    for (auto i : node.in) node.needs_grad = node.needs_grad || nodes_[i].needs_grad;
    nodes_.push_back(std::move(node));
    return Var{nodes_.size() - 1};
}

Mat& Tape::grad_of(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

Var Tape::constant(Mat value) {
    Node n = make_node(Op::constant, {}, std::move(value));
    return push(std::move(n));
}

Var Tape::constant(std::span<const double> column) {
    Mat m(static_cast<Eigen::Index>(column.size()), 1);
    for (std::size_t i = 0; i < column.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = column[i];
    return constant(std::move(m));
}

Var Tape::parameter(std::span<const double> params, std::size_t offset, std::size_t rows, std::size_t cols) {
    if (offset + rows * cols > params.size()) throw DimensionMismatch("tape: parameter slice out of range");
    Node n = make_node(Op::parameter, {}, Eigen::Map<const Mat>(params.data() + offset, static_cast<Eigen::Index>(rows),
                                                    static_cast<Eigen::Index>(cols)));
    n.needs_grad = true;
    n.offset = offset;
    return push(std::move(n));
}

Var Tape::matmul(Var x, Var w) {
    const auto& xv = value(x);
    const auto& wv = value(w);
    if (xv.cols() != wv.cols()) throw DimensionMismatch("tape: matmul inner dimensions differ");
    Mat y = xv * wv.transpose();
    return push(make_node(Op::matmul, {x.id, w.id}, std::move(y)));
}

Var Tape::add_bias(Var x, Var b) {
    const auto& bv = value(b);
    if (bv.rows() != 1 || bv.cols() != value(x).cols()) throw DimensionMismatch("tape: bias shape");
    Mat y = value(x);
    y.rowwise() += bv.row(0);
    return push(make_node(Op::add_bias, {x.id, b.id}, std::move(y)));
}

Var Tape::relu(Var x) {
    Mat y = value(x).cwiseMax(0.0);
    return push(make_node(Op::relu, {x.id}, std::move(y)));
}

Var Tape::tanh(Var x) {
    Mat y = value(x).array().tanh().matrix();
    return push(make_node(Op::tanh, {x.id}, std::move(y)));
}

Var Tape::gather_rows(Var x, Index rows) {
    const auto& xv = value(x);
    Mat y(static_cast<Eigen::Index>(rows->size()), xv.cols());
    for (std::size_t k = 0; k < rows->size(); ++k) {
        const auto r = static_cast<Eigen::Index>((*rows)[k]);
        if (r >= xv.rows()) throw DimensionMismatch("tape: gather index out of range");
        y.row(static_cast<Eigen::Index>(k)) = xv.row(r);
    }
    Node n = make_node(Op::gather, {x.id}, std::move(y));
    n.index = std::move(rows);
    return push(std::move(n));
}

Var Tape::scatter_add_rows(Var x, Index index, std::size_t n_rows) {
    const auto& xv = value(x);
    if (static_cast<std::size_t>(xv.rows()) != index->size()) throw DimensionMismatch("tape: scatter size");
    Mat y = Mat::Zero(static_cast<Eigen::Index>(n_rows), xv.cols());
    for (std::size_t k = 0; k < index->size(); ++k) {
        if ((*index)[k] >= n_rows) throw DimensionMismatch("tape: scatter index out of range");
        y.row(static_cast<Eigen::Index>((*index)[k])) += xv.row(static_cast<Eigen::Index>(k));
    }
    Node n = make_node(Op::scatter, {x.id}, std::move(y));
    n.index = std::move(index);
    return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionMismatch("tape: concat of nothing");
    const auto rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (auto p : parts) {
        if (value(p).rows() != rows) throw DimensionMismatch("tape: concat row counts differ");
        cols += value(p).cols();
    }
    Mat y(rows, cols);
    Node n = make_node(Op::concat, {}, {});
    Eigen::Index c = 0;
    for (auto p : parts) {
        const auto& pv = value(p);
        y.middleCols(c, pv.cols()) = pv;
        c += pv.cols();
        n.in.push_back(p.id);
    }
    n.value = std::move(y);
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
        throw DimensionMismatch("tape: add shapes differ");
    Mat y = value(a) + value(b);
    return push(make_node(Op::add, {a.id, b.id}, std::move(y)));
}

Var Tape::sub(Var a, Var b) {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
        throw DimensionMismatch("tape: sub shapes differ");
    Mat y = value(a) - value(b);
    return push(make_node(Op::sub, {a.id, b.id}, std::move(y)));
}

Var Tape::scale(Var a, double s) {
    Mat y = value(a) * s;
    Node n = make_node(Op::scale, {a.id}, std::move(y));
    n.factor = s;
    return push(std::move(n));
}

Var Tape::spmv(std::shared_ptr<const SparsityPattern> pattern, Var values, Var x, bool transpose) {
    const auto& v = value(values);
    const auto& xv = value(x);
    if (static_cast<std::size_t>(v.size()) != pattern->nnz() || v.cols() != 1)
        throw DimensionMismatch("tape: spmv values must be nnz x 1");
    const std::size_t in_dim = transpose ? pattern->rows() : pattern->cols();
    const std::size_t out_dim = transpose ? pattern->cols() : pattern->rows();
    if (static_cast<std::size_t>(xv.rows()) != in_dim || xv.cols() != 1) throw DimensionMismatch("tape: spmv x");
    Mat y = Mat::Zero(static_cast<Eigen::Index>(out_dim), 1);
    const auto offs = pattern->row_offsets();
    const auto cols = pattern->col_indices();
    for (std::size_t i = 0; i < pattern->rows(); ++i) {
        if (transpose) {
            const double xi = xv(static_cast<Eigen::Index>(i), 0);
            for (std::size_t k = offs[i]; k < offs[i + 1]; ++k)
                y(static_cast<Eigen::Index>(cols[k]), 0) += v(static_cast<Eigen::Index>(k), 0) * xi;
        } else {
            double s = 0.0;
            for (std::size_t k = offs[i]; k < offs[i + 1]; ++k)
                s += v(static_cast<Eigen::Index>(k), 0) * xv(static_cast<Eigen::Index>(cols[k]), 0);
            y(static_cast<Eigen::Index>(i), 0) = s;
        }
    }
    Node n = make_node(transpose ? Op::spmv_t : Op::spmv, {values.id, x.id}, std::move(y));
    n.pattern = std::move(pattern);
    return push(std::move(n));
}

Var Tape::spmv_fixed(const SparseMatrix& a, Var x, long double s) {
    const auto& xv = value(x);
    if (static_cast<std::size_t>(xv.rows()) != a.cols() || xv.cols() != 1) throw DimensionMismatch("tape: spmv_fixed x");
    Mat y(static_cast<Eigen::Index>(a.rows()), 1);
    const auto offs = a.row_offsets();
    const auto cols = a.col_indices();
    const auto vals = a.values();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        long double acc = 0.0L;
        for (std::size_t k = offs[i]; k < offs[i + 1]; ++k)
            acc += static_cast<long double>(vals[k]) * xv(static_cast<Eigen::Index>(cols[k]), 0);
        y(static_cast<Eigen::Index>(i), 0) = static_cast<double>(acc * s);
    }
    Node n = make_node(Op::spmv_fixed, {x.id}, std::move(y));
    n.fixed = std::make_shared<const SparseMatrix>(a);
    n.factor = s;
    return push(std::move(n));
}

Var Tape::dot(Var a, Var b) {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
        throw DimensionMismatch("tape: dot shapes differ");
    Mat y(1, 1);
    y(0, 0) = value(a).cwiseProduct(value(b)).sum();
    return push(make_node(Op::dot, {a.id, b.id}, std::move(y)));
}

Var Tape::sq_norm(Var x) {
    const auto& xv = value(x);
    long double acc = 0.0L;
    for (Eigen::Index k = 0; k < xv.size(); ++k) {
        const long double e = xv.data()[k];
        acc += e * e;
    }
    Mat y(1, 1);
    y(0, 0) = static_cast<double>(acc);
    return push(make_node(Op::sq_norm, {x.id}, std::move(y)));
}

double Tape::scalar(Var v) const {
    const auto& m = value(v);
    if (m.size() != 1) throw DimensionMismatch("tape: node is not a scalar");
    return m(0, 0);
}

void Tape::finalize(Var loss) {
    if (value(loss).size() != 1) throw DimensionMismatch("tape: loss must be a scalar");
    loss_ = loss.id;
    finalized_ = true;
}

void Tape::backward(double seed, std::span<double> param_grads) {
    if (!finalized_) throw Error("tape: backward called before finalize");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    grad_of(loss_)(0, 0) = seed;

    for (std::size_t id = loss_ + 1; id-- > 0;) {
        if (nodes_[id].grad.size() == 0 || !nodes_[id].needs_grad) continue;
        // grad_of may reallocate other nodes' grads but never this node's storage.
        const Mat& g = nodes_[id].grad;
        const Node& n = nodes_[id];
        auto wants = [&](std::size_t slot) { return nodes_[n.in[slot]].needs_grad; };
        switch (n.op) {
        case Op::constant: break;
        case Op::parameter: {
            if (n.offset + static_cast<std::size_t>(g.size()) > param_grads.size())
                throw DimensionMismatch("tape: gradient buffer too small");
            Eigen::Map<Mat>(param_grads.data() + n.offset, g.rows(), g.cols()) += g;
            break;
        }
        case Op::matmul:
            if (wants(0)) grad_of(n.in[0]).noalias() += g * nodes_[n.in[1]].value;
            if (wants(1)) grad_of(n.in[1]).noalias() += g.transpose() * nodes_[n.in[0]].value;
            break;
        case Op::add_bias:
            if (wants(0)) grad_of(n.in[0]) += g;
            if (wants(1)) grad_of(n.in[1]) += g.colwise().sum();
            break;
        case Op::relu:
            if (wants(0)) grad_of(n.in[0]).array() += g.array() * (n.value.array() > 0.0).cast<double>();
            break;
        case Op::tanh:
            if (wants(0)) grad_of(n.in[0]).array() += g.array() * (1.0 - n.value.array().square());
            break;
        case Op::gather:
            if (wants(0)) {
                auto& gx = grad_of(n.in[0]);
                for (std::size_t k = 0; k < n.index->size(); ++k)
                    gx.row(static_cast<Eigen::Index>((*n.index)[k])) += g.row(static_cast<Eigen::Index>(k));
            }
            break;
        case Op::scatter:
            if (wants(0)) {
                auto& gx = grad_of(n.in[0]);
                for (std::size_t k = 0; k < n.index->size(); ++k)
                    gx.row(static_cast<Eigen::Index>(k)) += g.row(static_cast<Eigen::Index>((*n.index)[k]));
            }
            break;
        case Op::concat: {
            Eigen::Index c = 0;
            for (std::size_t s = 0; s < n.in.size(); ++s) {
                const auto w = nodes_[n.in[s]].value.cols();
                if (wants(s)) grad_of(n.in[s]) += g.middleCols(c, w);
                c += w;
            }
            break;
        }
        case Op::add:
            if (wants(0)) grad_of(n.in[0]) += g;
            if (wants(1)) grad_of(n.in[1]) += g;
            break;
        case Op::sub:
            if (wants(0)) grad_of(n.in[0]) += g;
            if (wants(1)) grad_of(n.in[1]) -= g;
            break;
        case Op::scale:
            if (wants(0)) grad_of(n.in[0]) += g * static_cast<double>(n.factor);
            break;
        case Op::spmv:
        case Op::spmv_t: {
            // Both the values and x may carry gradients; G and G^T products share the same values node.
            const bool t = n.op == Op::spmv_t;
            const auto& v = nodes_[n.in[0]].value;
            const auto& x = nodes_[n.in[1]].value;
            const bool gv = wants(0);
            const bool gx_wanted = wants(1);
            Mat* dv = gv ? &grad_of(n.in[0]) : nullptr;
            Mat* dx = gx_wanted ? &grad_of(n.in[1]) : nullptr;
            const auto offs = n.pattern->row_offsets();
            const auto cols = n.pattern->col_indices();
            for (std::size_t i = 0; i < n.pattern->rows(); ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                for (std::size_t k = offs[i]; k < offs[i + 1]; ++k) {
                    const auto kk = static_cast<Eigen::Index>(k);
                    const auto cc = static_cast<Eigen::Index>(cols[k]);
                    // forward: y_i += v_k x_c (plain), y_c += v_k x_i (transposed)
                    const double gy = t ? g(cc, 0) : g(ii, 0);
                    const double xin = t ? x(ii, 0) : x(cc, 0);
                    if (dv) (*dv)(kk, 0) += gy * xin;
                    if (dx) (*dx)(t ? ii : cc, 0) += v(kk, 0) * gy;
                }
            }
            break;
        }
        case Op::spmv_fixed:
            if (wants(0)) {
                auto& gx = grad_of(n.in[0]);
                const auto offs = n.fixed->row_offsets();
                const auto cols = n.fixed->col_indices();
                const auto vals = n.fixed->values();
                const double s = static_cast<double>(n.factor);
                for (std::size_t i = 0; i < n.fixed->rows(); ++i) {
                    const double gi = g(static_cast<Eigen::Index>(i), 0) * s;
                    for (std::size_t k = offs[i]; k < offs[i + 1]; ++k)
                        gx(static_cast<Eigen::Index>(cols[k]), 0) += vals[k] * gi;
                }
            }
            break;
        case Op::dot:
            if (wants(0)) grad_of(n.in[0]) += g(0, 0) * nodes_[n.in[1]].value;
            if (wants(1)) grad_of(n.in[1]) += g(0, 0) * nodes_[n.in[0]].value;
            break;
        case Op::sq_norm:
            if (wants(0)) grad_of(n.in[0]) += (2.0 * g(0, 0)) * nodes_[n.in[0]].value;
            break;
        }
    }
}

} // namespace spai::ad
