#include "spai/datasets.hpp"

#include "spai/error.hpp"
#include "spai/graph.hpp"
#include "spai/io_util.hpp"
#include "spai/matrix_market.hpp"
#include "spai/random.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

namespace spai {

std::string_view to_string(Family family) {
    switch (family) {
    case Family::poisson2d: return "poisson2d";
    case Family::heat2d: return "heat2d";
    case Family::synthetic: return "synthetic";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    for (auto f : {Family::poisson2d, Family::heat2d, Family::synthetic})
        if (to_string(f) == name) return f;
    throw Error("unknown dataset family '" + std::string(name) + "'");
}

nlohmann::json to_json(const ProblemMeta& meta) {
    nlohmann::json j;
    j["family"] = to_string(meta.family);
    j["seed"] = meta.seed;
    j["n"] = meta.n;
    j["resulting_density"] = meta.resulting_density;
    j["rhs_seed"] = meta.rhs_seed;
    if (meta.family == Family::synthetic) {
        j["density"] = meta.density;
        j["epsilon_reg"] = meta.epsilon_reg;
    } else {
        j["nx"] = meta.nx;
        j["ny"] = meta.ny;
        j["coeff_min"] = meta.coeff_min;
        j["coeff_max"] = meta.coeff_max;
        j["coefficient"] = meta.coefficient;
        if (meta.family == Family::heat2d) j["time_step"] = meta.time_step;
    }
    return j;
}

ProblemMeta meta_from_json(const nlohmann::json& j) {
    ProblemMeta m;
    m.family = parse_family(j.at("family").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.n = j.at("n").get<std::size_t>();
    m.resulting_density = j.value("resulting_density", 0.0);
    m.rhs_seed = j.value("rhs_seed", std::uint64_t{0});
    if (m.family == Family::synthetic) {
        m.density = j.at("density").get<double>();
        m.epsilon_reg = j.at("epsilon_reg").get<double>();
    } else {
        m.nx = j.at("nx").get<std::size_t>();
        m.ny = j.at("ny").get<std::size_t>();
        m.coeff_min = j.at("coeff_min").get<double>();
        m.coeff_max = j.at("coeff_max").get<double>();
        m.coefficient = j.at("coefficient").get<std::vector<double>>();
        m.time_step = j.value("time_step", 0.0);
    }
    return m;
}

namespace {

std::vector<double> sample_coefficients(std::size_t n, std::uint64_t seed, double lo, double hi) {
    if (!(lo > 0.0) || hi < lo) throw Error("coefficient range must satisfy 0 < min <= max");
    Rng rng(seed);
    std::vector<double> a(n);
    for (double& v : a) v = lo == hi ? lo : rng.log_uniform(lo, hi);
    return a;
}

double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

// Variable-coefficient 5-point operator with Dirichlet faces folded into the diagonal,
// plus an optional per-node mass term.
SparseMatrix grid_operator(std::size_t nx, std::size_t ny, const std::vector<double>& conductivity,
                           const std::vector<double>& mass) {
    const double hx = 1.0 / static_cast<double>(nx + 1);
    const double hy = 1.0 / static_cast<double>(ny + 1);
    const double wx = 1.0 / (hx * hx);
    const double wy = 1.0 / (hy * hy);
    const std::size_t n = nx * ny;
    std::vector<std::size_t> offsets(n + 1, 0);
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    cols.reserve(5 * n);
    vals.reserve(5 * n);
    auto id = [nx](std::size_t x, std::size_t y) { return y * nx + x; };
    for (std::size_t y = 0; y < ny; ++y) {
        for (std::size_t x = 0; x < nx; ++x) {
            const std::size_t i = id(x, y);
            const double ai = conductivity[i];
            auto face = [&](bool inside, std::size_t j, double w) -> double {
                return inside ? w * harmonic(ai, conductivity[j]) : w * ai;
            };
            const double south = face(y > 0, y > 0 ? id(x, y - 1) : 0, wy);
            const double west = face(x > 0, x > 0 ? id(x - 1, y) : 0, wx);
            const double east = face(x + 1 < nx, x + 1 < nx ? id(x + 1, y) : 0, wx);
            const double north = face(y + 1 < ny, y + 1 < ny ? id(x, y + 1) : 0, wy);
            const double diag = south + west + east + north + (mass.empty() ? 0.0 : mass[i]);
            // Columns ascending: south, west, self, east, north.
            if (y > 0) { cols.push_back(id(x, y - 1)); vals.push_back(-south); }
            if (x > 0) { cols.push_back(id(x - 1, y)); vals.push_back(-west); }
            cols.push_back(i);
            vals.push_back(diag);
            if (x + 1 < nx) { cols.push_back(id(x + 1, y)); vals.push_back(-east); }
            if (y + 1 < ny) { cols.push_back(id(x, y + 1)); vals.push_back(-north); }
            offsets[i + 1] = cols.size();
        }
    }
    return SparseMatrix(n, n, std::move(offsets), std::move(cols), std::move(vals));
}

} // namespace

Problem gen_poisson2d(std::size_t nx, std::size_t ny, std::uint64_t coeff_seed, const PoissonOptions& opts) {
    if (nx == 0 || ny == 0) throw Error("gen_poisson2d: grid must be nonempty");
    ProblemMeta meta;
    meta.family = Family::poisson2d;
    meta.seed = coeff_seed;
    meta.nx = nx;
    meta.ny = ny;
    meta.n = nx * ny;
    meta.coeff_min = opts.coeff_min;
    meta.coeff_max = opts.coeff_max;
    meta.coefficient = sample_coefficients(meta.n, coeff_seed, opts.coeff_min, opts.coeff_max);
    meta.rhs_seed = derive_seed(coeff_seed, 1);
    auto a = grid_operator(nx, ny, meta.coefficient, {});
    meta.resulting_density = static_cast<double>(a.nnz()) / static_cast<double>(meta.n * meta.n);
    return {std::move(a), std::move(meta)};
}

Problem gen_heat2d(std::size_t nx, std::size_t ny, std::uint64_t seed, const HeatOptions& opts) {
    if (nx == 0 || ny == 0) throw Error("gen_heat2d: grid must be nonempty");
    if (!(opts.time_step > 0.0)) throw Error("gen_heat2d: time_step must be positive");
    ProblemMeta meta;
    meta.family = Family::heat2d;
    meta.seed = seed;
    meta.nx = nx;
    meta.ny = ny;
    meta.n = nx * ny;
    meta.coeff_min = opts.coeff_min;
    meta.coeff_max = opts.coeff_max;
    meta.time_step = opts.time_step;
    meta.coefficient = sample_coefficients(meta.n, seed, opts.coeff_min, opts.coeff_max);
    meta.rhs_seed = derive_seed(seed, 1);
    std::vector<double> mass(meta.n);
    for (std::size_t i = 0; i < meta.n; ++i) mass[i] = meta.coefficient[i] / opts.time_step;
    const std::vector<double> unit(meta.n, 1.0);
    auto a = grid_operator(nx, ny, unit, mass);
    meta.resulting_density = static_cast<double>(a.nnz()) / static_cast<double>(meta.n * meta.n);
    return {std::move(a), std::move(meta)};
}

Problem gen_synthetic(std::size_t n, double density, std::uint64_t seed, double epsilon) {
    if (n == 0) throw Error("gen_synthetic: n must be positive");
    if (density < 0.0 || density > 1.0) throw Error("gen_synthetic: density must lie in [0, 1]");
    if (!(epsilon > 0.0)) throw Error("gen_synthetic: epsilon must be positive");
    Rng rng(seed);
    const double total = static_cast<double>(n) * static_cast<double>(n);
    const auto target = static_cast<std::size_t>(std::llround(density * total));
    std::unordered_set<std::uint64_t> taken;
    std::vector<Triplet> p_entries;
    p_entries.reserve(target);
    while (p_entries.size() < target) {
        const auto i = static_cast<std::size_t>(rng.below(n));
        const auto j = static_cast<std::size_t>(rng.below(n));
        if (!taken.insert(static_cast<std::uint64_t>(i) * n + j).second) continue;
        p_entries.push_back({i, j, rng.normal()});
    }
    const auto p = SparseMatrix::from_triplets(n, n, std::move(p_entries));
    const auto ppt = multiply(p, transpose(p));
    auto triplets = ppt.triplets();
    for (std::size_t i = 0; i < n; ++i) triplets.push_back({i, i, epsilon});
    auto a = SparseMatrix::from_triplets(n, n, std::move(triplets), DuplicatePolicy::sum);

    ProblemMeta meta;
    meta.family = Family::synthetic;
    meta.seed = seed;
    meta.n = n;
    meta.density = density;
    meta.epsilon_reg = epsilon;
    meta.rhs_seed = derive_seed(seed, 1);
    meta.resulting_density = static_cast<double>(a.nnz()) / total;
    return {std::move(a), std::move(meta)};
}

Split make_split(std::size_t count, std::uint64_t seed, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw Error("make_split: fraction must lie in (0, 1)");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count)));
    Split split;
    split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return split;
}

std::vector<double> gen_rhs(const ProblemMeta& meta, std::uint64_t seed) {
    Rng rng(seed);
    auto b = rng.normal_vector(meta.n);
    long double sum = 0.0L;
    for (double v : b) sum += static_cast<long double>(v) * v;
    const double norm = static_cast<double>(std::sqrt(sum));
    for (double& v : b) v /= norm;
    return b;
}

std::uint64_t instance_seed(const DatasetSpec& spec, std::size_t index) { return derive_seed(spec.seed, index); }

Problem generate_instance(const DatasetSpec& spec, std::size_t index) {
    const auto seed = instance_seed(spec, index);
    switch (spec.family) {
    case Family::poisson2d: return gen_poisson2d(spec.nx, spec.ny, seed, spec.poisson);
    case Family::heat2d: return gen_heat2d(spec.nx, spec.ny, seed, spec.heat);
    case Family::synthetic: return gen_synthetic(spec.synthetic_n, spec.synthetic_density, seed, spec.synthetic_epsilon);
    }
    throw Error("unknown family");
}

std::vector<Problem> generate_dataset(const DatasetSpec& spec) {
    std::vector<Problem> out;
    out.reserve(spec.count);
    for (std::size_t i = 0; i < spec.count; ++i) out.push_back(generate_instance(spec, i));
    return out;
}

std::filesystem::path instance_dir(const std::filesystem::path& root, const ProblemMeta& meta) {
    return root / std::string(to_string(meta.family)) / std::to_string(meta.seed);
}

std::filesystem::path write_instance(const std::filesystem::path& root, const Problem& problem) {
    const auto dir = instance_dir(root, problem.meta);
    std::filesystem::create_directories(dir);
    write_matrix_market(problem.matrix, dir / "matrix.mtx");
    write_atomically(dir / "meta.json", [&](std::ostream& out) { out << to_json(problem.meta).dump(2) << '\n'; });
    write_graph(build_graph(problem.matrix, problem.meta), dir / "graph.bin");
    write_vector_file(dir / "rhs.vec", gen_rhs(problem.meta, problem.meta.rhs_seed));
    return dir;
}

Problem read_instance(const std::filesystem::path& dir) {
    std::ifstream meta_in(dir / "meta.json");
    if (!meta_in) throw Error("cannot open " + (dir / "meta.json").string());
    const auto meta = meta_from_json(nlohmann::json::parse(meta_in));
    auto a = read_matrix_market(dir / "matrix.mtx");
    if (a.rows() != meta.n) throw DimensionMismatch("meta.json size does not match matrix.mtx");
    return {std::move(a), meta};
}

std::vector<double> read_instance_rhs(const std::filesystem::path& dir) { return read_vector_file(dir / "rhs.vec"); }

} // namespace spai
