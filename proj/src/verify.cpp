#include "spai/verify.hpp"

#include "spai/datasets.hpp"
#include "spai/dense.hpp"
#include "spai/error.hpp"
#include "spai/loss.hpp"
#include "spai/pcg.hpp"
#include "spai/precond.hpp"
#include "spai/spectral.hpp"
#include "spai/train.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace spai {

SparseMatrix random_dominant_spd(std::size_t n, std::size_t per_row, double margin, Rng& rng) {
    std::set<std::pair<std::size_t, std::size_t>> seen;
    std::vector<Triplet> t;
    std::vector<double> rowsum(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < per_row && n > 1; ++r) {
            const auto j = static_cast<std::size_t>(rng.below(n));
            if (j == i || !seen.insert({std::min(i, j), std::max(i, j)}).second) continue;
            const double v = rng.normal();
            t.push_back({i, j, v});
            t.push_back({j, i, v});
            rowsum[i] += std::fabs(v);
            rowsum[j] += std::fabs(v);
        }
    }
    for (std::size_t i = 0; i < n; ++i) t.push_back({i, i, (1.0 + margin) * rowsum[i] + 1.0});
    return SparseMatrix::from_triplets(n, n, std::move(t));
}

SparseMatrix near_jacobi_factor(const SparseMatrix& a, double jitter, Rng& rng) {
    const double norm = mean_abs_nonzero_norm(a);
    std::vector<double> vals(a.nnz());
    const auto offs = a.row_offsets();
    const auto cols = a.col_indices();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = offs[i]; k < offs[i + 1]; ++k) {
            if (cols[k] == i)
                vals[k] = std::sqrt(norm / a.values()[k]) * (1.0 + jitter * rng.uniform(-1.0, 1.0));
            else
                vals[k] = 0.1 * jitter * std::sqrt(norm / a.at(i, i)) * rng.uniform(-1.0, 1.0);
        }
    }
    return a.with_values(std::move(vals));
}

double gradient_relative_error(double autodiff, double finite_difference) {
    return std::fabs(autodiff - finite_difference) / (std::fabs(finite_difference) + 1e-8);
}

GradientCheck gradient_check(const GnnModel& model, const SparseMatrix& a, const MatrixGraph& graph,
                             std::span<const double> w, std::size_t probes, Rng& rng, double step) {
    TrainSample sample{a, graph, {}};
    const auto base = loss_and_gradient(model, sample, w);
    GnnModel probe = model;
    GradientCheck out;
    auto loss_at = [&](std::size_t k, double value) {
        probe.params[k] = value;
        ad::Tape tape;
        const auto tr = forward_on_tape(tape, probe, graph);
        const auto l = sai_loss_on_tape(tape, a, graph.pattern, tr.edge_values, probe.config.epsilon, w);
        return tape.scalar(l);
    };
    for (std::size_t p = 0; p < probes; ++p) {
        const auto k = static_cast<std::size_t>(rng.below(model.params.size()));
        const double theta = model.params[k];
        const double fd = (loss_at(k, theta + step) - loss_at(k, theta - step)) / (2.0 * step);
        probe.params[k] = theta;
        out.max_relative_error = std::max(out.max_relative_error, gradient_relative_error(base.grad[k], fd));
        ++out.probes;
    }
    return out;
}

namespace {

CheckResult check(std::string name, bool ok, const std::string& detail) { return {std::move(name), ok, detail}; }

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

CheckResult pcg_oracle(std::uint64_t seed) {
    Rng rng(seed);
    double worst_res = 0.0, worst_sol = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 10 + static_cast<std::size_t>(rng.below(50));
        const auto a = gen_synthetic(n, 0.05, rng.next_u64(), 1e-1).matrix;
        const auto b = rng.normal_vector(n);
        const auto x_ref = cholesky_solve(cholesky(dense_from_sparse(a)), b);
        double ref_norm = 0.0;
        for (double v : x_ref) ref_norm += v * v;
        ref_norm = std::sqrt(ref_norm);
        for (auto m : {build_identity(n), build_jacobi(a), build_ic0(a), build_fsai(a)}) {
            SolveConfig sc;
            sc.rtol = 1e-10;
            const auto rep = pcg_solve(a, b, m, sc);
            double diff = 0.0;
            for (std::size_t i = 0; i < n; ++i) diff += (rep.x[i] - x_ref[i]) * (rep.x[i] - x_ref[i]);
            worst_res = std::max(worst_res, rep.converged ? rep.final_relative_residual : 1.0);
            worst_sol = std::max(worst_sol, std::sqrt(diff) / ref_norm);
        }
    }
    return check("pcg_matches_cholesky", worst_res <= 1e-8 && worst_sol <= 1e-6,
                 "max residual " + fmt(worst_res) + ", max solution error " + fmt(worst_sol));
}

CheckResult gradients(std::uint64_t seed) {
    Rng rng(seed);
    const auto prob = gen_poisson2d(5, 5, seed);
    const auto graph = build_graph(prob.matrix, prob.meta);
    GnnConfig cfg;
    cfg.seed = seed;
    const auto model = init_model(cfg);
    const auto w = rng.normal_vector(prob.matrix.rows());
    const auto gc = gradient_check(model, prob.matrix, graph, w, 20, rng);
    return check("gradient_finite_difference", gc.max_relative_error < 1e-5,
                 std::to_string(gc.probes) + " probes, max relative error " + fmt(gc.max_relative_error));
}

CheckResult scale_invariance(std::uint64_t seed) {
    Rng rng(seed);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = random_dominant_spd(12, 3, 0.2, rng);
        const auto g = a.with_values(rng.normal_vector(a.nnz()));
        const auto w = rng.normal_vector(a.rows());
        const double base = sai_loss(a, g, 1e-4, w);
        for (double alpha : {1e-3, 1e3}) {
            const double l = sai_loss(scaled(a, alpha), g, 1e-4, w);
            worst = std::max(worst, std::fabs(l - base) / base);
        }
    }
    return check("loss_scale_invariance", worst <= 4.0 * std::numeric_limits<double>::epsilon(),
                 "max relative deviation " + fmt(worst));
}

CheckResult hutchinson(std::uint64_t seed) {
    Rng rng(seed);
    const auto a = random_dominant_spd(10, 3, 0.5, rng);
    const auto d = dense_from_sparse(a);
    double exact = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) exact += std::pow(d(i, j) - (i == j ? 1.0 : 0.0), 2);
    const double est = hutchinson_frobenius_estimate(
        a, [](std::span<const double> r, std::span<double> s) { std::copy(r.begin(), r.end(), s.begin()); }, 100000, rng);
    const double rel = std::fabs(est - exact) / exact;
    return check("hutchinson_unbiased", rel < 0.05, "relative error " + fmt(rel) + " at 1e5 samples");
}

CheckResult error_bound(std::uint64_t seed) {
    Rng rng(seed);
    std::size_t accepted = 0, violations = 0, attempts = 0;
    while (accepted < 100 && attempts < 1000) {
        ++attempts;
        const std::size_t n = 5 + static_cast<std::size_t>(rng.below(26));
        const auto a = random_dominant_spd(n, 2, 1.0 + rng.uniform(), rng);
        const auto g = near_jacobi_factor(a, 0.1, rng);
        const auto rep = error_bound_check(a, g, rng.log_uniform(1e-6, 1e-3));
        if (!rep.bound_holds) continue;
        ++accepted;
        if (!*rep.bound_holds) ++violations;
    }
    return check("error_bound_fuzz", accepted == 100 && violations == 0,
                 std::to_string(accepted) + " admissible triples, " + std::to_string(violations) + " violations");
}

CheckResult spectrum_oracle(std::uint64_t seed) {
    Rng rng(seed);
    const auto a = random_dominant_spd(20, 4, 0.1, rng);
    const auto spec = preconditioned_spectrum(a, build_jacobi(a));
    auto d = dense_from_sparse(a);
    std::vector<double> s(20);
    for (std::size_t i = 0; i < 20; ++i) s[i] = 1.0 / std::sqrt(d(i, i));
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j) d(i, j) *= s[i] * s[j];
    const auto ref = symmetric_eigen(d, false).values;
    double worst = 0.0;
    for (std::size_t i = 0; i < 20; ++i) worst = std::max(worst, std::fabs(spec[i] - ref[i]));
    return check("spectrum_similarity_oracle", worst < 1e-8, "max eigenvalue difference " + fmt(worst));
}

CheckResult preconditioner_symmetry(std::uint64_t seed) {
    Rng rng(seed);
    const auto a = random_dominant_spd(60, 3, 0.3, rng);
    const auto g = a.with_values(rng.normal_vector(a.nnz()));
    double worst = 0.0;
    bool positive = true;
    for (const auto& m : {build_identity(60), build_jacobi(a), build_ic0(a), build_fsai(a), build_learned_spai(g, 1e-4)}) {
        for (int k = 0; k < 20; ++k) {
            const auto u = rng.normal_vector(60);
            const auto v = rng.normal_vector(60);
            const auto mu = m.apply(u);
            const auto mv = m.apply(v);
            double uv = 0.0, vu = 0.0, uu = 0.0, scale = 0.0;
            for (std::size_t i = 0; i < 60; ++i) {
                uv += u[i] * mv[i];
                vu += v[i] * mu[i];
                uu += u[i] * mu[i];
                scale += std::fabs(u[i] * mv[i]);
            }
            worst = std::max(worst, std::fabs(uv - vu) / scale);
            positive = positive && uu > 0.0;
        }
    }
    return check("preconditioner_spd", worst < 1e-10 && positive, "max relative asymmetry " + fmt(worst));
}

} // namespace

std::vector<CheckResult> run_verify_suite(std::uint64_t seed) {
    std::vector<CheckResult> out;
    auto guarded = [&](auto fn, const char* name, std::uint64_t stream) {
        try {
            out.push_back(fn(derive_seed(seed, stream)));
        } catch (const std::exception& e) {
            out.push_back(check(name, false, std::string("threw: ") + e.what()));
        }
    };
    guarded(pcg_oracle, "pcg_matches_cholesky", 1);
    guarded(gradients, "gradient_finite_difference", 2);
    guarded(scale_invariance, "loss_scale_invariance", 3);
    guarded(hutchinson, "hutchinson_unbiased", 4);
    guarded(error_bound, "error_bound_fuzz", 5);
    guarded(spectrum_oracle, "spectrum_similarity_oracle", 6);
    guarded(preconditioner_symmetry, "preconditioner_spd", 7);
    return out;
}

} // namespace spai
