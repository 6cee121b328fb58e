#include "helpers.hpp"
#include "spai/datasets.hpp"
#include "spai/error.hpp"
#include "spai/precond.hpp"
#include "spai/spectral.hpp"
#include "spai/verify.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace spai;

namespace {

ApplyFn dense_apply(const DenseMatrix& m) {
    return [m](std::span<const double> r, std::span<double> s) {
        const auto y = matvec(m, r);
        std::copy(y.begin(), y.end(), s.begin());
    };
}

} // namespace

TEST_SUITE("spectral") {

TEST_CASE("exact inverse gives a unit spectrum") {
    Rng rng(1);
    const auto a = random_dominant_spd(12, 3, 0.4, rng);
    const auto ev = preconditioned_spectrum(a, dense_apply(spd_inverse(dense_from_sparse(a))));
    for (double l : ev) CHECK(std::fabs(l - 1.0) < 1e-10);
    CHECK(condition_number(ev) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("Jacobi on a diagonal matrix") {
    const std::vector<double> d{1.0, 4.0};
    const auto a = SparseMatrix::diagonal(d);
    const auto ev = preconditioned_spectrum(a, build_jacobi(a));
    REQUIRE(ev.size() == 2);
    CHECK(ev[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(ev[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(preconditioned_spectrum(a, build_identity(2)) == std::vector<double>{1.0, 4.0});
}

TEST_CASE("similarity transform matches the symmetric square-root oracle") {
    Rng rng(2);
    const auto a = random_dominant_spd(20, 4, 0.3, rng);
    const auto minv = testing::random_spd_dense(20, rng, 0.2, 3.0);
    // S = M^{-1/2} from the eigendecomposition, spectrum of S A S
    const auto ed = symmetric_eigen(minv);
    DenseMatrix s(20, 20);
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t j = 0; j < 20; ++j) {
            double v = 0.0;
            for (std::size_t k = 0; k < 20; ++k) v += ed.vectors(i, k) * std::sqrt(ed.values[k]) * ed.vectors(j, k);
            s(i, j) = v;
        }
    auto oracle = symmetric_eigen(symmetrized(matmul(matmul(s, dense_from_sparse(a)), s)), false).values;
    std::sort(oracle.begin(), oracle.end());
    auto ev = preconditioned_spectrum(a, dense_apply(minv));
    std::sort(ev.begin(), ev.end());
    REQUIRE(ev.size() == oracle.size());
    for (std::size_t k = 0; k < ev.size(); ++k) CHECK(std::fabs(ev[k] - oracle[k]) < 1e-10 * oracle.back());
}

TEST_CASE("indefinite operator is rejected") {
    const auto a = SparseMatrix::identity(3);
    const ApplyFn neg = [](std::span<const double> r, std::span<double> s) {
        for (std::size_t i = 0; i < r.size(); ++i) s[i] = -r[i];
    };
    CHECK_THROWS_AS(preconditioned_spectrum(a, neg), NotPositiveDefinite);
}

TEST_CASE("condition and Kaporin numbers") {
    const std::vector<double> two{1.0, 4.0};
    CHECK(condition_number(two) == 4.0);
    CHECK(kaporin_number(two) == doctest::Approx(1.25).epsilon(1e-14));
    const std::vector<double> flat(7, 3.3);
    CHECK(kaporin_number(flat) == 1.0);
    CHECK(condition_number(flat) == 1.0);

    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> ev(2 + rng.below(40));
        for (auto& l : ev) l = std::exp(rng.uniform(-6.0, 6.0));
        const double k = kaporin_number(ev), c = condition_number(ev);
        CHECK(k >= 1.0);
        CHECK(k <= c * (1.0 + 1e-12));
    }
}

TEST_CASE("error bound on diag(1, 2)") {
    const std::vector<double> d{1.0, 2.0};
    const auto a = SparseMatrix::diagonal(d);
    // ||A|| = 1.5 (mean of stored magnitudes), M^{-1} = I / 1.5
    const ApplyFn m = [](std::span<const double> r, std::span<double> s) {
        for (std::size_t i = 0; i < r.size(); ++i) s[i] = r[i] / 1.5;
    };
    const auto rep = error_bound_check(a, m);
    CHECK(rep.kappa == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(rep.sigma_max_e == doctest::Approx(1.0 - 1.0 / 2.25).epsilon(1e-14));
    REQUIRE(rep.bound_value.has_value());
    CHECK(*rep.bound_value == doctest::Approx(3.5).epsilon(1e-13));
    CHECK(rep.first_order == doctest::Approx(1.0 + 2.0 * (1.0 - 1.0 / 2.25)).epsilon(1e-14));
    CHECK(rep.bound_holds == true);
    const auto j = to_json(rep);
    CHECK(j.contains("sigma_max_E"));
    CHECK(j["bound_holds"] == true);
}

TEST_CASE("bound is vacuous when sigma reaches one") {
    const auto a = SparseMatrix::identity(3);
    const ApplyFn m = [](std::span<const double> r, std::span<double> s) {
        for (std::size_t i = 0; i < r.size(); ++i) s[i] = 3.0 * r[i];
    };
    const auto rep = error_bound_check(a, m);
    CHECK(rep.sigma_max_e == doctest::Approx(2.0));
    CHECK_FALSE(rep.bound_value.has_value());
    CHECK_FALSE(rep.bound_holds.has_value());
    CHECK(to_json(rep)["bound_holds"].is_null());
}

TEST_CASE("report is invariant to scaling A") {
    Rng rng(4);
    const auto a = random_dominant_spd(10, 3, 0.4, rng);
    const auto g = near_jacobi_factor(a, 0.2, rng);
    const auto base = error_bound_check(a, g, 1e-4);
    for (double alpha : {1e-3, 1e3}) {
        const auto r = error_bound_check(scaled(a, alpha), g, 1e-4);
        CHECK(r.kappa == doctest::Approx(base.kappa).epsilon(1e-10));
        CHECK(r.sigma_max_e == doctest::Approx(base.sigma_max_e).epsilon(1e-10));
        CHECK(r.kaporin == doctest::Approx(base.kaporin).epsilon(1e-10));
    }
}

TEST_CASE("bound holds on admissible triples") {
    Rng rng(5);
    int admissible = 0;
    for (int trial = 0; trial < 200 && admissible < 50; ++trial) {
        const auto a = random_dominant_spd(2 + rng.below(29), 3, 0.3, rng);
        const auto g = near_jacobi_factor(a, 0.3, rng);
        const auto r = error_bound_check(a, g, 1e-4);
        if (!r.bound_holds) continue;
        ++admissible;
        CHECK(*r.bound_holds);
    }
    CHECK(admissible == 50);
}

}
