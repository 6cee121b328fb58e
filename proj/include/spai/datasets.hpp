#pragma once

#include "spai/sparse.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace spai {

enum class Family { poisson2d, heat2d, synthetic };

std::string_view to_string(Family family);
Family parse_family(std::string_view name);

/// Everything needed to regenerate an instance: (family, seed, size) plus the knobs.
struct ProblemMeta {
    Family family = Family::poisson2d;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t nx = 0;
    std::size_t ny = 0;
    double coeff_min = 1.0;
    double coeff_max = 1.0;
    std::vector<double> coefficient;  ///< per grid node, row-major in (y, x); PDE families only
    double time_step = 0.0;           ///< heat2d backward-Euler step
    double density = 0.0;             ///< synthetic: requested pattern density of P
    double epsilon_reg = 0.0;         ///< synthetic: A = P P^T + epsilon I
    double resulting_density = 0.0;   ///< nnz(A) / n^2
    std::uint64_t rhs_seed = 0;
};

nlohmann::json to_json(const ProblemMeta& meta);
ProblemMeta meta_from_json(const nlohmann::json& j);

struct Problem {
    SparseMatrix matrix;
    ProblemMeta meta;
};

struct PoissonOptions {
    double coeff_min = 0.1;
    double coeff_max = 10.0;
};

struct HeatOptions {
    double coeff_min = 1e-4;
    double coeff_max = 5e-4;
    double time_step = 1e-5;
};

/// -div(a grad u) on the unit square, 5-point finite differences, Dirichlet boundary
/// eliminated. a is log-uniform per node; face coefficients are harmonic means.
Problem gen_poisson2d(std::size_t nx, std::size_t ny, std::uint64_t coeff_seed, const PoissonOptions& opts = {});

/// One backward-Euler step of a(x) u_t - Laplace(u) = 0: A = diag(a / dt) + L / h^2.
Problem gen_heat2d(std::size_t nx, std::size_t ny, std::uint64_t seed, const HeatOptions& opts = {});

/// A = P P^T + epsilon I with P uniform-pattern, standard-normal values, at the requested density.
Problem gen_synthetic(std::size_t n, double density, std::uint64_t seed, double epsilon = 1e-4);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Seeded shuffle, then the first round(train_fraction * count) go to train (4:1 by default).
Split make_split(std::size_t count, std::uint64_t seed, double train_fraction = 0.8);

/// Standard-normal right-hand side normalized to unit 2-norm.
std::vector<double> gen_rhs(const ProblemMeta& meta, std::uint64_t seed);

struct DatasetSpec {
    Family family = Family::heat2d;
    std::size_t count = 50;
    std::uint64_t seed = 0;
    std::size_t nx = 16;
    std::size_t ny = 16;
    PoissonOptions poisson;
    HeatOptions heat;
    std::size_t synthetic_n = 400;
    double synthetic_density = 0.01;
    double synthetic_epsilon = 1e-4;
};

/// Instance seeds are derived from the dataset seed and the instance index.
std::uint64_t instance_seed(const DatasetSpec& spec, std::size_t index);
Problem generate_instance(const DatasetSpec& spec, std::size_t index);
std::vector<Problem> generate_dataset(const DatasetSpec& spec);

/// `<root>/<family>/<seed>/` holding matrix.mtx, meta.json, graph.bin and rhs.vec.
std::filesystem::path instance_dir(const std::filesystem::path& root, const ProblemMeta& meta);
std::filesystem::path write_instance(const std::filesystem::path& root, const Problem& problem);
Problem read_instance(const std::filesystem::path& dir);
std::vector<double> read_instance_rhs(const std::filesystem::path& dir);

} // namespace spai
