#include "spai/gnn.hpp"

#include "spai/error.hpp"
#include "spai/io_util.hpp"
#include "spai/random.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace spai {

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation parse_activation(std::string_view name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    throw Error("unknown activation '" + std::string(name) + "'");
}

void GnnConfig::validate() const {
    if (hidden_dim < 1) throw Error("gnn: hidden_dim must be >= 1");
    if (node_dim < 1 || edge_dim < 1) throw Error("gnn: feature dimensions must be >= 1");
    if (!(epsilon > 0.0)) throw Error("gnn: epsilon must be positive");
}

nlohmann::json to_json(const GnnConfig& cfg) {
    return {{"n_layers", cfg.n_layers},
            {"hidden_dim", cfg.hidden_dim},
            {"mlp_hidden_layers", cfg.mlp_hidden_layers},
            {"activation", to_string(cfg.activation)},
            {"epsilon", cfg.epsilon},
            {"seed", cfg.seed},
            {"node_dim", cfg.node_dim},
            {"edge_dim", cfg.edge_dim},
            {"message_uses_hidden_edge", cfg.message_uses_hidden_edge}};
}

GnnConfig gnn_config_from_json(const nlohmann::json& j, GnnConfig c) {
    c.n_layers = j.value("n_layers", c.n_layers);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.mlp_hidden_layers = j.value("mlp_hidden_layers", c.mlp_hidden_layers);
    if (j.contains("activation")) c.activation = parse_activation(j.at("activation").get<std::string>());
    c.epsilon = j.value("epsilon", c.epsilon);
    c.seed = j.value("seed", c.seed);
    c.node_dim = j.value("node_dim", c.node_dim);
    c.edge_dim = j.value("edge_dim", c.edge_dim);
    c.message_uses_hidden_edge = j.value("message_uses_hidden_edge", c.message_uses_hidden_edge);
    return c;
}

namespace {

Mlp make_mlp(std::size_t in, std::size_t hidden, std::size_t out, std::size_t hidden_layers, std::size_t& cursor) {
    Mlp m;
    std::size_t prev = in;
    for (std::size_t l = 0; l <= hidden_layers; ++l) {
        const std::size_t next = l == hidden_layers ? out : hidden;
        Linear lin{prev, next, cursor, cursor + prev * next};
        cursor = lin.bias_offset + next;
        m.layers.push_back(lin);
        prev = next;
    }
    return m;
}

GnnModel layout(const GnnConfig& cfg) {
    cfg.validate();
    GnnModel m;
    m.config = cfg;
    const std::size_t d = cfg.hidden_dim;
    const std::size_t k = cfg.mlp_hidden_layers;
    std::size_t cursor = 0;
    m.node_encoder = make_mlp(cfg.node_dim, d, d, k, cursor);
    m.edge_encoder = make_mlp(cfg.edge_dim, d, d, k, cursor);
    const std::size_t msg_in = 2 * d + (cfg.message_uses_hidden_edge ? d : cfg.edge_dim);
    for (std::size_t t = 0; t < cfg.n_layers; ++t) {
        m.message.push_back(make_mlp(msg_in, d, d, k, cursor));
        m.node_update.push_back(make_mlp(d, d, d, k, cursor));
        m.edge_update.push_back(make_mlp(3 * d, d, d, k, cursor));
    }
    m.decoder = make_mlp(d, d, 1, k, cursor);
    m.params.assign(cursor, 0.0);
    return m;
}

template <typename F>
void for_each_mlp(const GnnModel& m, F&& f) {
    f(m.node_encoder);
    f(m.edge_encoder);
    for (std::size_t t = 0; t < m.message.size(); ++t) {
        f(m.message[t]);
        f(m.node_update[t]);
        f(m.edge_update[t]);
    }
    f(m.decoder);
}

ad::Var apply_mlp(ad::Tape& tape, const GnnModel& model, const Mlp& mlp, ad::Var x) {
    for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        const auto& lin = mlp.layers[l];
        const auto w = tape.parameter(model.params, lin.weight_offset, lin.out, lin.in);
        const auto b = tape.parameter(model.params, lin.bias_offset, 1, lin.out);
        x = tape.add_bias(tape.matmul(x, w), b);
        if (l + 1 < mlp.layers.size())
            x = model.config.activation == Activation::relu ? tape.relu(x) : tape.tanh(x);
    }
    return x;
}

ad::Mat as_matrix(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    return Eigen::Map<const ad::Mat>(flat.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

constexpr char checkpoint_magic[5] = "SPGN";
constexpr std::uint32_t checkpoint_version = 1;

} // namespace

GnnModel init_model(const GnnConfig& cfg) {
    auto m = layout(cfg);
    Rng rng(cfg.seed);
    for_each_mlp(m, [&](const Mlp& mlp) {
        for (const auto& lin : mlp.layers) {
            const double bound = std::sqrt(6.0 / static_cast<double>(lin.in + lin.out));
            for (std::size_t k = 0; k < lin.in * lin.out; ++k)
                m.params[lin.weight_offset + k] = rng.uniform(-bound, bound);
        }
    });
    return m;
}

ForwardTrace forward_on_tape(ad::Tape& tape, const GnnModel& model, const MatrixGraph& graph) {
    const auto& cfg = model.config;
    if (graph.d_node != cfg.node_dim) throw DimensionMismatch("gnn: node feature dimension does not match model");
    if (graph.d_edge != cfg.edge_dim) throw DimensionMismatch("gnn: edge feature dimension does not match model");
    const std::size_t n = graph.n_nodes;
    const std::size_t m = graph.n_edges();
    auto src = std::make_shared<const std::vector<std::size_t>>(graph.edge_src);
    auto dst = std::make_shared<const std::vector<std::size_t>>(graph.edge_dst);

    const auto v = tape.constant(as_matrix(graph.node_features, n, graph.d_node));
    const auto e = tape.constant(as_matrix(graph.edge_features, m, graph.d_edge));
    ForwardTrace tr;
    auto x = apply_mlp(tape, model, model.node_encoder, v);
    auto h = apply_mlp(tape, model, model.edge_encoder, e);
    tr.x0 = x;
    tr.h0 = h;
    for (std::size_t t = 0; t < cfg.n_layers; ++t) {
        const ad::Var msg_in[] = {tape.gather_rows(x, src), tape.gather_rows(x, dst),
                                  cfg.message_uses_hidden_edge ? h : e};
        const auto msg = apply_mlp(tape, model, model.message[t], tape.concat_cols(msg_in));
        const auto agg = tape.scatter_add_rows(msg, src, n);
        x = tape.add(x, apply_mlp(tape, model, model.node_update[t], agg));
        const ad::Var edge_in[] = {tape.gather_rows(x, src), tape.gather_rows(x, dst), h};
        h = tape.add(h, apply_mlp(tape, model, model.edge_update[t], tape.concat_cols(edge_in)));
    }
    tr.x_final = x;
    tr.h_final = h;
    tr.edge_values = apply_mlp(tape, model, model.decoder, h);
    return tr;
}

ForwardResult forward(const GnnModel& model, const MatrixGraph& graph) {
    ForwardResult r;
    r.tape = std::make_unique<ad::Tape>();
    r.trace = forward_on_tape(*r.tape, model, graph);
    const auto& vals = r.tape->value(r.trace.edge_values);
    r.g = assemble_G(std::span<const double>(vals.data(), static_cast<std::size_t>(vals.size())), graph.pattern);
    return r;
}

SparseMatrix assemble_G(std::span<const double> edge_values, std::shared_ptr<const SparsityPattern> pattern) {
    if (!pattern) throw Error("assemble_G: graph has no pattern");
    if (edge_values.size() != pattern->nnz()) throw DimensionMismatch("assemble_G: one value per stored entry required");
    return SparseMatrix(std::move(pattern), std::vector<double>(edge_values.begin(), edge_values.end()));
}

void write_checkpoint(const GnnModel& model, const std::filesystem::path& path) {
    const std::string header = to_json(model.config).dump();
    write_atomically(
        path,
        [&](std::ostream& out) {
            binary::write_magic(out, checkpoint_magic);
            binary::write_u32(out, checkpoint_version);
            binary::write_u64(out, header.size());
            out.write(header.data(), static_cast<std::streamsize>(header.size()));
            binary::write_u64(out, model.params.size());
            binary::write_f64s(out, model.params);
        },
        true);
}

GnnModel read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    binary::expect_magic(in, checkpoint_magic);
    if (const auto v = binary::read_u32(in); v != checkpoint_version)
        throw ParseError("unsupported checkpoint version " + std::to_string(v));
    const auto header_len = binary::read_u64(in);
    if (header_len > (1u << 20)) throw ParseError("checkpoint header too large");
    std::string header(header_len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ParseError("truncated checkpoint header");
    auto m = layout(gnn_config_from_json(nlohmann::json::parse(header)));
    const auto count = binary::read_u64(in);
    if (count != m.params.size()) {
        std::ostringstream msg;
        msg << "checkpoint holds " << count << " parameters, config implies " << m.params.size();
        throw ParseError(msg.str());
    }
    m.params = binary::read_f64s(in, count);
    return m;
}

} // namespace spai
