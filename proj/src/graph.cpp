#include "spai/graph.hpp"

#include "spai/datasets.hpp"
#include "spai/error.hpp"
#include "spai/io_util.hpp"

#include <fstream>

namespace spai {

namespace {

constexpr char graph_magic[5] = "SPGR";
constexpr std::uint32_t graph_version = 1;

} // namespace

MatrixGraph build_graph(const SparseMatrix& a, std::vector<double> node_features, std::size_t d_node) {
    if (!a.pattern().square()) throw DimensionMismatch("build_graph: matrix is not square");
    if (!a.pattern().is_symmetric()) throw Error("build_graph: pattern is not symmetric");
    const std::size_t n = a.rows();
    if (node_features.size() != n * d_node) throw DimensionMismatch("build_graph: node feature size mismatch");
    MatrixGraph g;
    g.n_nodes = n;
    g.d_node = d_node;
    g.d_edge = 1;
    g.node_features = std::move(node_features);
    g.norm_a = mean_abs_nonzero_norm(a);
    g.pattern = a.shared_pattern();
    g.edge_src = a.pattern().entry_rows();
    g.edge_dst.assign(a.col_indices().begin(), a.col_indices().end());
    g.edge_features.reserve(a.nnz());
    for (double v : a.values()) g.edge_features.push_back(v / g.norm_a);
    return g;
}

MatrixGraph build_graph(const SparseMatrix& a, const ProblemMeta& meta) {
    const std::size_t n = a.rows();
    if (meta.n != n) throw DimensionMismatch("build_graph: meta size does not match matrix");
    std::vector<double> nodes;
    std::size_t d_node = 0;
    if (meta.family == Family::synthetic) {
        d_node = 2;
        const double norm = mean_abs_nonzero_norm(a);
        nodes.resize(2 * n);
        const auto diag = a.diagonal_values();
        const auto offs = a.row_offsets();
        const auto vals = a.values();
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t k = offs[i]; k < offs[i + 1]; ++k) sum += vals[k];
            nodes[2 * i] = sum / static_cast<double>(n) / norm;
            nodes[2 * i + 1] = diag[i] / norm;
        }
    } else {
        if (meta.nx * meta.ny != n || meta.coefficient.size() != n)
            throw DimensionMismatch("build_graph: grid metadata does not match matrix");
        d_node = 3;
        nodes.resize(3 * n);
        const double hx = 1.0 / static_cast<double>(meta.nx + 1);
        const double hy = 1.0 / static_cast<double>(meta.ny + 1);
        for (std::size_t i = 0; i < n; ++i) {
            nodes[3 * i] = static_cast<double>(i % meta.nx + 1) * hx;
            nodes[3 * i + 1] = static_cast<double>(i / meta.nx + 1) * hy;
            nodes[3 * i + 2] = meta.coefficient[i];
        }
    }
    return build_graph(a, std::move(nodes), d_node);
}

void write_graph(const MatrixGraph& g, const std::filesystem::path& path) {
    write_atomically(
        path,
        [&](std::ostream& out) {
            binary::write_magic(out, graph_magic);
            binary::write_u32(out, graph_version);
            binary::write_u64(out, g.n_nodes);
            binary::write_u64(out, g.n_edges());
            binary::write_u32(out, static_cast<std::uint32_t>(g.d_node));
            binary::write_u32(out, static_cast<std::uint32_t>(g.d_edge));
            binary::write_f64(out, g.norm_a);
            binary::write_f64s(out, g.node_features);
            binary::write_f64s(out, g.edge_features);
            for (std::size_t k = 0; k < g.n_edges(); ++k) {
                binary::write_u64(out, g.edge_src[k]);
                binary::write_u64(out, g.edge_dst[k]);
            }
        },
        true);
}

MatrixGraph read_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    binary::expect_magic(in, graph_magic);
    if (const auto v = binary::read_u32(in); v != graph_version)
        throw ParseError("unsupported graph.bin version " + std::to_string(v), 0);
    MatrixGraph g;
    g.n_nodes = binary::read_u64(in);
    const auto n_edges = binary::read_u64(in);
    g.d_node = binary::read_u32(in);
    g.d_edge = binary::read_u32(in);
    g.norm_a = binary::read_f64(in);
    g.node_features = binary::read_f64s(in, g.n_nodes * g.d_node);
    g.edge_features = binary::read_f64s(in, n_edges * g.d_edge);
    g.edge_src.resize(n_edges);
    g.edge_dst.resize(n_edges);
    std::vector<std::size_t> offsets(g.n_nodes + 1, 0);
    for (std::size_t k = 0; k < n_edges; ++k) {
        g.edge_src[k] = binary::read_u64(in);
        g.edge_dst[k] = binary::read_u64(in);
        if (g.edge_src[k] >= g.n_nodes || g.edge_dst[k] >= g.n_nodes) throw ParseError("graph.bin edge out of range", 0);
        ++offsets[g.edge_src[k] + 1];
    }
    for (std::size_t i = 0; i < g.n_nodes; ++i) offsets[i + 1] += offsets[i];
    // The pattern constructor rejects edges that are not in CSR order.
    g.pattern = std::make_shared<const SparsityPattern>(g.n_nodes, g.n_nodes, std::move(offsets), g.edge_dst);
    return g;
}

} // namespace spai
