#pragma once

#include "spai/sparse.hpp"

#include <cstddef>
#include <filesystem>
#include <memory>
#include <vector>

namespace spai {

struct ProblemMeta;

/// GNN input graph. Edge k is stored entry k of A in CSR order, diagonal included.
struct MatrixGraph {
    std::size_t n_nodes = 0;
    std::size_t d_node = 0;
    std::size_t d_edge = 1;
    std::vector<double> node_features;  ///< n_nodes x d_node, row-major
    std::vector<double> edge_features;  ///< n_edges x d_edge, row-major
    std::vector<std::size_t> edge_src;  ///< i of (i, j)
    std::vector<std::size_t> edge_dst;  ///< j of (i, j)
    double norm_a = 1.0;
    std::shared_ptr<const SparsityPattern> pattern;

    std::size_t n_edges() const noexcept { return edge_src.size(); }
};

/// Synthetic family: [row mean / norm, diag / norm]. PDE families: [x, y, a(x, y)].
MatrixGraph build_graph(const SparseMatrix& a, const ProblemMeta& meta);

/// Node features supplied by the caller (d_node = node_features.size() / n).
MatrixGraph build_graph(const SparseMatrix& a, std::vector<double> node_features, std::size_t d_node);

void write_graph(const MatrixGraph& g, const std::filesystem::path& path);
MatrixGraph read_graph(const std::filesystem::path& path);

} // namespace spai
