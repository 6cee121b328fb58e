#pragma once

#include "spai/graph.hpp"
#include "spai/sparse.hpp"
#include "spai/tape.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace spai {

enum class Activation { relu, tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct GnnConfig {
    std::size_t n_layers = 4;
    std::size_t hidden_dim = 24;
    std::size_t mlp_hidden_layers = 1;
    Activation activation = Activation::relu;
    double epsilon = 1e-4;
    std::uint64_t seed = 0;
    std::size_t node_dim = 3;
    std::size_t edge_dim = 1;
    /// f_m consumes h^(t-1) instead of the raw edge feature.
    bool message_uses_hidden_edge = false;

    void validate() const;
};

nlohmann::json to_json(const GnnConfig& cfg);
GnnConfig gnn_config_from_json(const nlohmann::json& j, GnnConfig base = {});

/// One affine layer; W is out x in, both stored row-major in the model's flat buffer.
struct Linear {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

struct Mlp {
    std::vector<Linear> layers;
};

/// Weights live in one flat vector, in declaration order:
/// E_n, E_e, then (f_m, f_v, f_e) for each layer, then D.
struct GnnModel {
    GnnConfig config;
    Mlp node_encoder;
    Mlp edge_encoder;
    std::vector<Mlp> message;
    std::vector<Mlp> node_update;
    std::vector<Mlp> edge_update;
    Mlp decoder;
    std::vector<double> params;

    std::size_t parameter_count() const noexcept { return params.size(); }
};

/// Builds the layout and draws Xavier-uniform weights with zero biases from cfg.seed.
GnnModel init_model(const GnnConfig& cfg);

struct ForwardTrace {
    ad::Var edge_values;  ///< nnz x 1, the entries of G in A's CSR order
    ad::Var x0, h0;
    ad::Var x_final, h_final;
};

/// Records the network on `tape`; parameter leaves point into model.params.
ForwardTrace forward_on_tape(ad::Tape& tape, const GnnModel& model, const MatrixGraph& graph);

struct ForwardResult {
    SparseMatrix g;
    std::unique_ptr<ad::Tape> tape;
    ForwardTrace trace;
};

ForwardResult forward(const GnnModel& model, const MatrixGraph& graph);

/// Positional scatter of edge values onto the pattern.
SparseMatrix assemble_G(std::span<const double> edge_values, std::shared_ptr<const SparsityPattern> pattern);

void write_checkpoint(const GnnModel& model, const std::filesystem::path& path);
GnnModel read_checkpoint(const std::filesystem::path& path);

} // namespace spai
