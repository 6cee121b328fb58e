#include "helpers.hpp"
#include "spai/adamw.hpp"
#include "spai/datasets.hpp"
#include "spai/error.hpp"
#include "spai/gnn.hpp"
#include "spai/loss.hpp"
#include "spai/tape.hpp"
#include "spai/train.hpp"
#include "spai/verify.hpp"

#include <doctest.h>

using namespace spai;
using ad::Mat;
using ad::Tape;

namespace {

Mat random_mat(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Mat m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.normal();
    return m;
}

// Loss built from every primitive; params = [W (4x3) | b (1x4) | vals (nnz)].
struct Composite {
    std::shared_ptr<const SparsityPattern> pattern;
    SparseMatrix a;
    Mat x;
    std::vector<double> w;
    ad::Index rows, cols;
    std::size_t n_params = 0;

    double run(const std::vector<double>& p, std::vector<double>* grad) const {
        Tape t;
        const auto W = t.parameter(p, 0, 4, 3);
        const auto b = t.parameter(p, 12, 1, 4);
        const auto vals = t.parameter(p, 16, pattern->nnz(), 1);
        const auto xv = t.constant(x);
        auto h = t.tanh(t.add_bias(t.matmul(xv, W), b));  // 6 x 4
        h = t.relu(h);
        const auto g = t.gather_rows(h, rows);           // nnz x 4
        const ad::Var parts[] = {g, t.scale(g, 0.5)};
        const auto c = t.concat_cols(parts);             // nnz x 8
        const auto s = t.scatter_add_rows(c, cols, 6);    // 6 x 8
        const Mat sel = Mat::Ones(8, 1);
        const auto col = t.matmul(s, t.constant(Mat(sel.transpose())));  // 6 x 1
        const auto wv = t.constant(w);
        const auto gt = t.spmv(pattern, vals, wv, true);
        const auto u = t.add(t.spmv(pattern, vals, gt, false), t.scale(col, 0.1));
        const auto z = t.sub(t.spmv_fixed(a, u, 0.5L), wv);
        const auto loss = t.add(t.sq_norm(z), t.dot(u, col));
        t.finalize(loss);
        if (grad) {
            grad->assign(p.size(), 0.0);
            t.backward(1.0, *grad);
        }
        return t.scalar(loss);
    }
};

} // namespace

TEST_SUITE("autodiff") {

TEST_CASE("linear regression gradient") {
    Rng rng(1);
    const Mat x = random_mat(7, 3, rng);
    const Mat y = random_mat(7, 1, rng);
    std::vector<double> theta = rng.normal_vector(3);
    Tape t;
    const auto th = t.parameter(theta, 0, 1, 3);
    const auto r = t.sub(t.matmul(t.constant(x), th), t.constant(y));
    const auto loss = t.sq_norm(r);
    t.finalize(loss);
    std::vector<double> g(3, 0.0);
    t.backward(1.0, g);
    const Eigen::Map<const Eigen::RowVectorXd> tv(theta.data(), 3);
    const Eigen::VectorXd analytic = 2.0 * x.transpose() * (x * tv.transpose() - y);
    for (int k = 0; k < 3; ++k) CHECK(std::fabs(g[k] - analytic(k)) < 1e-12 * std::max(1.0, std::fabs(analytic(k))));
}

TEST_CASE("every primitive agrees with central differences") {
    Rng rng(2);
    Composite c;
    c.a = gen_poisson2d(3, 2, 1).matrix;
    c.pattern = c.a.shared_pattern();
    c.x = random_mat(6, 3, rng);
    c.w = rng.normal_vector(6);
    c.rows = std::make_shared<const std::vector<std::size_t>>(c.a.pattern().entry_rows());
    c.cols = std::make_shared<const std::vector<std::size_t>>(c.a.col_indices().begin(), c.a.col_indices().end());
    auto p = rng.normal_vector(16 + c.a.nnz());
    std::vector<double> grad;
    c.run(p, &grad);
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double h = 1e-6;
        auto pp = p, pm = p;
        pp[k] += h;
        pm[k] -= h;
        const double fd = (c.run(pp, nullptr) - c.run(pm, nullptr)) / (2 * h);
        CHECK(std::fabs(grad[k] - fd) <= 1e-6 * (std::fabs(fd) + 1.0));
    }
}

TEST_CASE("G and G^T paths both reach the values") {
    Rng rng(3);
    const auto a = gen_heat2d(3, 3, 4).matrix;
    const auto w = rng.normal_vector(9);
    auto vals = rng.normal_vector(a.nnz());
    auto loss = [&](const std::vector<double>& v, std::vector<double>* g) {
        Tape t;
        const auto gv = t.parameter(v, 0, v.size(), 1);
        const auto l = sai_loss_on_tape(t, a, a.shared_pattern(), gv, 1e-4, w);
        t.finalize(l);
        if (g) {
            g->assign(v.size(), 0.0);
            t.backward(1.0, *g);
        }
        return t.scalar(l);
    };
    std::vector<double> grad;
    const double l0 = loss(vals, &grad);
    CHECK(l0 == sai_loss(a, a.with_values(vals), 1e-4, w));
    for (std::size_t k = 0; k < vals.size(); ++k) {
        auto vp = vals, vm = vals;
        vp[k] += 1e-6;
        vm[k] -= 1e-6;
        const double fd = (loss(vp, nullptr) - loss(vm, nullptr)) / 2e-6;
        CHECK(gradient_relative_error(grad[k], fd) < 1e-6);
    }
}

TEST_CASE("backward needs finalize") {
    Tape t;
    std::vector<double> p{1.0};
    const auto x = t.parameter(p, 0, 1, 1);
    t.sq_norm(x);
    std::vector<double> g(1);
    CHECK_THROWS_AS(t.backward(1.0, g), Error);
}

TEST_CASE("full pipeline gradient on a 3x3 matrix") {
    Rng rng(4);
    const auto p = gen_poisson2d(3, 1, 8);
    REQUIRE(p.matrix.rows() == 3);
    const auto graph = build_graph(p.matrix, p.meta);
    GnnConfig cfg;
    cfg.seed = 5;
    const auto model = init_model(cfg);
    const auto w = rng.normal_vector(3);
    const auto gc = gradient_check(model, p.matrix, graph, w, 12, rng);
    CHECK(gc.probes == 12);
    CHECK(gc.max_relative_error < 1e-5);
}

TEST_CASE("zero-loss point has zero gradient") {
    // A = 3 I: norm 3, so G = sqrt(1 - eps) I makes A M^{-1} / ||A|| = I.
    const auto a = scaled(SparseMatrix::identity(4), 3.0);
    const auto meta = [] {
        ProblemMeta m;
        m.family = Family::synthetic;
        m.n = 4;
        return m;
    }();
    const auto graph = build_graph(a, meta);
    GnnConfig cfg;
    cfg.n_layers = 0;
    cfg.node_dim = 2;
    auto model = init_model(cfg);
    const auto& last = model.decoder.layers.back();
    for (std::size_t k = 0; k < last.in; ++k) model.params[last.weight_offset + k] = 0.0;
    model.params[last.bias_offset] = std::sqrt(1.0 - cfg.epsilon);
    Rng rng(6);
    const auto w = rng.normal_vector(4);
    const auto lg = loss_and_gradient(model, TrainSample{a, graph, {}}, w);
    CHECK(lg.loss < 1e-28);
    double worst = 0.0;
    for (double g : lg.grad) worst = std::max(worst, std::fabs(g));
    CHECK(worst < 1e-12);
}

}

TEST_SUITE("loss") {

TEST_CASE("identity preconditioning is exact") {
    const auto a = SparseMatrix::identity(5);
    const auto g = a.with_values(std::vector<double>(5, 0.0));
    Rng rng(1);
    CHECK(sai_loss(a, g, 1.0, rng.normal_vector(5)) == 0.0);
}

TEST_CASE("scale invariance") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = random_dominant_spd(15, 3, 0.3, rng);
        const auto g = a.with_values(rng.normal_vector(a.nnz()));
        const auto w = rng.normal_vector(15);
        for (auto norm : {LossNorm::mean_abs, LossNorm::frobenius, LossNorm::entrywise_l1}) {
            const double base = sai_loss(a, g, 1e-4, w, norm);
            for (double alpha : {1e-3, 1.0, 1e3}) {
                const double l = sai_loss(scaled(a, alpha), g, 1e-4, w, norm);
                CHECK(std::fabs(l - base) <= 4.0 * std::numeric_limits<double>::epsilon() * base);
            }
        }
    }
}

TEST_CASE("4x4 dense oracle") {
    Rng rng(3);
    const auto a = random_dominant_spd(4, 2, 0.5, rng);
    const auto g = a.with_values(rng.normal_vector(a.nnz()));
    const auto w = rng.normal_vector(4);
    const double eps = 1e-2;
    const auto da = dense_from_sparse(a), dg = dense_from_sparse(g);
    auto minv = matmul(dg, transpose(dg));
    for (std::size_t i = 0; i < 4; ++i) minv(i, i) += eps;
    double nrm = 0.0;
    for (double v : a.values()) nrm += std::fabs(v);
    nrm /= static_cast<double>(a.nnz());
    auto e = (1.0 / nrm) * matmul(da, minv);
    for (std::size_t i = 0; i < 4; ++i) e(i, i) -= 1.0;
    const auto z = testing::dense_matvec(e, w);
    double ref = 0.0;
    for (double v : z) ref += v * v;
    CHECK(std::fabs(sai_loss(a, g, eps, w) - ref) < 1e-12);
}

TEST_CASE("norm variants") {
    const auto t = SparseMatrix::from_triplets(2, 2, {{0, 0, 2}, {0, 1, -1}, {1, 0, -1}, {1, 1, 2}});
    CHECK(static_cast<double>(loss_norm_value(t, LossNorm::mean_abs)) == 1.5);
    CHECK(static_cast<double>(loss_norm_value(t, LossNorm::entrywise_l1)) == 6.0);
    CHECK(static_cast<double>(loss_norm_value(t, LossNorm::frobenius)) == doctest::Approx(std::sqrt(10.0)));
    CHECK(parse_loss_norm("frobenius") == LossNorm::frobenius);
    CHECK_THROWS_AS(parse_loss_norm("spectral"), Error);
}

TEST_CASE("hutchinson with the exact inverse") {
    Rng rng(4);
    const auto a = random_dominant_spd(5, 2, 0.5, rng);
    const auto inv = spd_inverse(dense_from_sparse(a));
    const auto samples = hutchinson_samples(
        a, [&](std::span<const double> r, std::span<double> s) {
            const auto y = matvec(inv, r);
            std::copy(y.begin(), y.end(), s.begin());
        },
        100, rng);
    for (double s : samples) CHECK(s < 1e-24);
}

TEST_CASE("hutchinson matches the Frobenius norm") {
    Rng rng(5);
    const auto a = random_dominant_spd(10, 3, 0.5, rng);
    const auto d = dense_from_sparse(a);
    double exact = 0.0;
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) exact += std::pow(d(i, j) - (i == j), 2);
    const ApplyFn identity = [](std::span<const double> r, std::span<double> s) { std::copy(r.begin(), r.end(), s.begin()); };
    const double est = hutchinson_frobenius_estimate(a, identity, 100000, rng);
    CHECK(std::fabs(est - exact) / exact < 0.05);

    // variance of the estimator falls like 1 / n_samples
    std::vector<double> log_n, log_var;
    for (std::size_t n : {100u, 1000u, 10000u}) {
        double m = 0.0, m2 = 0.0;
        const int reps = 60;
        for (int r = 0; r < reps; ++r) {
            const double e = hutchinson_frobenius_estimate(a, identity, n, rng);
            m += e;
            m2 += e * e;
        }
        m /= reps;
        log_n.push_back(std::log(static_cast<double>(n)));
        log_var.push_back(std::log(m2 / reps - m * m));
    }
    const double slope = (log_var[2] - log_var[0]) / (log_n[2] - log_n[0]);
    MESSAGE("variance slope " << slope);
    CHECK(slope < -0.7);
    CHECK(slope > -1.3);
}

}

TEST_SUITE("adamw") {

TEST_CASE("zero gradient without decay leaves params") {
    std::vector<double> p{1.0, -2.0, 3.0};
    const auto before = p;
    AdamWState s;
    AdamWConfig cfg;
    cfg.weight_decay = 0.0;
    for (int i = 0; i < 5; ++i) adamw_step(p, std::vector<double>(3, 0.0), s, cfg);
    CHECK(p == before);
}

TEST_CASE("one step by hand") {
    std::vector<double> p{1.0};
    AdamWState s;
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.01;
    adamw_step(p, std::vector<double>{0.5}, s, cfg);
    // m_hat = g, v_hat = g^2 after one bias-corrected step
    const double m_hat = (0.1 * 0.5) / (1 - 0.9);
    const double v_hat = (0.001 * 0.25) / (1 - 0.999);
    const double expect = 1.0 - 0.1 * (m_hat / (std::sqrt(v_hat) + 1e-8) + 0.01 * 1.0);
    CHECK(std::fabs(p[0] - expect) < 1e-15);
    CHECK(std::fabs(p[0] - 0.899000002) < 1e-9);
}

TEST_CASE("without decay it is Adam") {
    // f(x, y) = 3 x^2 + 0.5 (y - 2)^2
    std::vector<double> p{1.5, -1.0};
    double x = 1.5, y = -1.0, mx = 0, my = 0, vx = 0, vy = 0;
    AdamWState s;
    AdamWConfig cfg;
    cfg.lr = 0.05;
    cfg.weight_decay = 0.0;
    for (int t = 1; t <= 100; ++t) {
        adamw_step(p, std::vector<double>{6 * p[0], p[1] - 2}, s, cfg);
        const double gx = 6 * x, gy = y - 2;
        mx = 0.9 * mx + 0.1 * gx;
        my = 0.9 * my + 0.1 * gy;
        vx = 0.999 * vx + 0.001 * gx * gx;
        vy = 0.999 * vy + 0.001 * gy * gy;
        const double c1 = 1 - std::pow(0.9, t), c2 = 1 - std::pow(0.999, t);
        x -= 0.05 * (mx / c1) / (std::sqrt(vx / c2) + 1e-8);
        y -= 0.05 * (my / c1) / (std::sqrt(vy / c2) + 1e-8);
    }
    CHECK(std::fabs(p[0] - x) < 1e-10);
    CHECK(std::fabs(p[1] - y) < 1e-10);
}

TEST_CASE("length mismatch") {
    std::vector<double> p{1.0};
    AdamWState s;
    CHECK_THROWS_AS(adamw_step(p, std::vector<double>{1.0, 2.0}, s, {}), DimensionMismatch);
}

}
