#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adprec/linalg.hpp"
#include "test_support.hpp"

using namespace adprec;
using linalg::SymMatrix;

namespace {

SymMatrix diag2(double a, double b) {
    return SymMatrix::diagonal((Vector(2) << a, b).finished());
}

} // namespace

TEST_CASE("SymMatrix symmetrizes exactly") {
    auto rng = oracle::rng_for(1);
    const Matrix raw = oracle::gaussian(5, 5, rng);
    const SymMatrix s(raw);
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = 0; j < 5; ++j) {
            CHECK(s(i, j) == s(j, i));
        }
    }
    SymMatrix g = SymMatrix::identity(3, 2.0);
    g.add_gram(oracle::gaussian(3, 2, rng));
    CHECK(g.matrix() == g.matrix().transpose());
}

TEST_CASE("psd_power examples") {
    const SymMatrix half = linalg::psd_power(diag2(4.0, 9.0), 0.5);
    CHECK(half(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(half(1, 1) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(std::abs(half(0, 1)) < 1e-14);

    const SymMatrix id = linalg::psd_power(SymMatrix::identity(3), -0.25);
    CHECK((id.matrix() - Matrix::Identity(3, 3)).norm() < 1e-14);

    auto rng = oracle::rng_for(2);
    const Matrix m = oracle::spd(4, rng);
    const Matrix r = linalg::psd_power(SymMatrix(m), -0.5).matrix();
    CHECK((r * r * m - Matrix::Identity(4, 4)).norm() < 1e-9);
}

TEST_CASE("psd_power agrees with Denman-Beavers on random SPD") {
    auto rng = oracle::rng_for(3);
    for (int t = 0; t < 50; ++t) {
        const int d = oracle::randint(rng, 1, 7);
        const Matrix m = oracle::spd(d, rng);
        const SymMatrix s(m);
        CHECK(oracle::rel_err(linalg::psd_power(s, 0.5).matrix(), oracle::sqrtm(m)) < 1e-10);
        CHECK(oracle::rel_err(linalg::psd_power(s, -0.5).matrix(), oracle::inv_sqrtm(m)) < 1e-10);
        CHECK(oracle::rel_err(linalg::psd_power(s, -0.25).matrix(), oracle::inv_quarter(m)) < 1e-10);
        CHECK(oracle::rel_err(linalg::psd_power(s, -1.0).matrix(), Matrix(m.inverse())) < 1e-10);
    }
}

TEST_CASE("psd_power composition: (M^{-1/4})^2 = M^{-1/2}") {
    auto rng = oracle::rng_for(4);
    for (int t = 0; t < 100; ++t) {
        const SymMatrix m = linalg::random_psd(oracle::randint(rng, 1, 8), 1e3, rng);
        const Matrix q = linalg::psd_power(m, -0.25).matrix();
        CHECK(oracle::rel_err(q * q, linalg::psd_power(m, -0.5).matrix()) < 1e-9);
    }
}

TEST_CASE("psd_power errors and clamping") {
    const SymMatrix singular = diag2(1.0, 0.0);
    CHECK_THROWS_AS((void)linalg::psd_power(singular, -0.5), NonPositiveDefinite);
    CHECK_NOTHROW((void)linalg::psd_power(singular, 0.5));
    CHECK_THROWS_AS((void)linalg::psd_power(diag2(1.0, -1.0), 0.5), NonPositiveDefinite);

    // A state just below its floor through rounding is clamped, not rejected.
    const SymMatrix dipped = diag2(1.0 - 1e-12, 3.0);
    const SymMatrix p = linalg::psd_power(dipped, -0.5, 1.0);
    CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK_THROWS_AS((void)linalg::psd_power(diag2(0.0, 1.0), -1.0, 0.0), NonPositiveDefinite);
}

TEST_CASE("trace_log_psd examples and determinant oracle") {
    CHECK(linalg::trace_log_psd(SymMatrix::identity(2)) == 0.0);
    CHECK(linalg::trace_log_psd(diag2(std::exp(1.0), std::exp(2.0))) == doctest::Approx(3.0).epsilon(1e-14));
    auto rng = oracle::rng_for(5);
    for (int t = 0; t < 50; ++t) {
        const Matrix m = oracle::spd(oracle::randint(rng, 1, 8), rng);
        CHECK(oracle::rel_err(linalg::trace_log_psd(SymMatrix(m)), oracle::logdet(m)) < 1e-9);
    }
    CHECK_THROWS_AS((void)linalg::trace_log_psd(diag2(1.0, 0.0)), NonPositiveDefinite);
}

TEST_CASE("trace_log_psd is monotone under PSD increments") {
    auto rng = oracle::rng_for(6);
    for (int t = 0; t < 100; ++t) {
        const int d = oracle::randint(rng, 1, 6);
        const Matrix a = oracle::spd(d, rng);
        const Matrix g = oracle::gaussian(d, oracle::randint(rng, 1, d), rng);
        CHECK(linalg::trace_log_psd(SymMatrix(a + g * g.transpose())) >= linalg::trace_log_psd(SymMatrix(a)));
    }
}

TEST_CASE("trace_power and min_eigenvalue") {
    CHECK(linalg::trace_power(diag2(4.0, 9.0), 0.5) == doctest::Approx(5.0));
    CHECK(linalg::min_eigenvalue(diag2(4.0, 9.0)) == doctest::Approx(4.0));
    auto rng = oracle::rng_for(7);
    const Matrix m = oracle::spd(5, rng);
    CHECK(oracle::rel_err(linalg::trace_power(SymMatrix(m), 0.5), oracle::sqrtm(m).trace()) < 1e-10);
}

TEST_CASE("svd reconstructs and sorts") {
    auto rng = oracle::rng_for(8);
    for (int t = 0; t < 50; ++t) {
        const Matrix g = oracle::gaussian(oracle::randint(rng, 1, 6), oracle::randint(rng, 1, 6), rng);
        const auto s = linalg::svd(g);
        CHECK(oracle::rel_err(s.U * s.sigma.asDiagonal() * s.V.transpose(), g) < 1e-10);
        for (Eigen::Index i = 1; i < s.sigma.size(); ++i) {
            CHECK(s.sigma(i) <= s.sigma(i - 1));
        }
        CHECK(s.sigma.minCoeff() >= 0.0);
    }
}

TEST_CASE("msign examples") {
    const Matrix d = (Matrix(2, 2) << 3.0, 0.0, 0.0, -2.0).finished();
    const Matrix s = linalg::msign(d);
    CHECK((s - (Matrix(2, 2) << 1.0, 0.0, 0.0, -1.0).finished()).norm() < 1e-14);
    CHECK(linalg::msign(Matrix::Zero(3, 2)).norm() == 0.0);

    auto rng = oracle::rng_for(9);
    const Matrix g = oracle::gaussian(3, 2, rng);
    const Matrix p = linalg::msign(g);
    CHECK((p.transpose() * p - Matrix::Identity(2, 2)).norm() < 1e-10);
    CHECK(oracle::rel_err(g.cwiseProduct(p).sum(), linalg::nuclear_norm(g)) < 1e-10);
}

TEST_CASE("msign matches Newton-Schulz polar factor; spectral norm 1; duality pairing") {
    auto rng = oracle::rng_for(10);
    for (int t = 0; t < 60; ++t) {
        const Matrix g = oracle::gaussian(oracle::randint(rng, 1, 5), oracle::randint(rng, 1, 5), rng);
        const Matrix p = linalg::msign(g);
        CHECK(oracle::rel_err(p, oracle::polar(g)) < 1e-9);
        CHECK(oracle::top_singular(p) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(oracle::rel_err(g.cwiseProduct(p).sum(), linalg::nuclear_norm(g)) < 1e-9);
    }
}

TEST_CASE("msign drops directions below the rank threshold") {
    auto rng = oracle::rng_for(11);
    const Vector u = oracle::gaussian(4, 1, rng).normalized();
    const Vector v = oracle::gaussian(3, 1, rng).normalized();
    const Matrix g = 5.0 * u * v.transpose();
    const Matrix p = linalg::msign(g);
    CHECK((p - u * v.transpose()).norm() < 1e-12);
}

TEST_CASE("nuclear and spectral norms") {
    const Matrix d = (Matrix(2, 2) << 3.0, 0.0, 0.0, -2.0).finished();
    CHECK(linalg::nuclear_norm(d) == doctest::Approx(5.0));
    CHECK(linalg::spectral_norm(d) == doctest::Approx(3.0));

    auto rng = oracle::rng_for(12);
    const Vector u = oracle::gaussian(4, 1, rng).normalized();
    const Vector v = oracle::gaussian(2, 1, rng).normalized();
    CHECK(linalg::nuclear_norm(u * v.transpose()) == doctest::Approx(1.0));
    CHECK(linalg::spectral_norm(u * v.transpose()) == doctest::Approx(1.0));

    for (int t = 0; t < 60; ++t) {
        const Matrix g = oracle::gaussian(oracle::randint(rng, 1, 6), oracle::randint(rng, 1, 6), rng);
        const double nuc = linalg::nuclear_norm(g);
        const double spec = linalg::spectral_norm(g);
        CHECK(nuc >= g.norm() * (1 - 1e-12));
        CHECK(g.norm() >= spec * (1 - 1e-12));
        CHECK(oracle::rel_err(spec, oracle::top_singular(g)) < 1e-8);
        CHECK(oracle::rel_err(nuc, oracle::nuclear(g)) < 1e-9);
    }
}

TEST_CASE("kron_precondition examples") {
    auto rng = oracle::rng_for(13);
    const Matrix g = oracle::gaussian(3, 2, rng);
    CHECK((linalg::kron_precondition(SymMatrix::identity(3), SymMatrix::identity(2), g) - g).norm() < 1e-14);

    Matrix e11 = Matrix::Zero(2, 2);
    e11(0, 0) = 1.0;
    const Matrix z = linalg::kron_precondition(diag2(2.0, 1.0), diag2(2.0, 1.0), e11);
    CHECK(z(0, 0) == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-14));
    CHECK(z.cwiseAbs().sum() == doctest::Approx(std::pow(2.0, -0.5)).epsilon(1e-14));
}

TEST_CASE("kron_precondition equals the explicit Kronecker operator") {
    auto rng = oracle::rng_for(14);
    for (int t = 0; t < 100; ++t) {
        const Eigen::Index n = oracle::randint(rng, 1, 4);
        const Eigen::Index m = oracle::randint(rng, 1, 4);
        const Matrix l = oracle::spd(n, rng);
        const Matrix r = oracle::spd(m, rng);
        const Matrix g = oracle::gaussian(n, m, rng);
        const Vector expected = oracle::kron(oracle::inv_quarter(r), oracle::inv_quarter(l)) * oracle::vec(g);
        const Matrix got = linalg::kron_precondition(SymMatrix(l), SymMatrix(r), g);
        CHECK((oracle::vec(got) - expected).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("kron_apply with positive power") {
    auto rng = oracle::rng_for(15);
    const Matrix l = oracle::spd(3, rng);
    const Matrix r = oracle::spd(2, rng);
    const Matrix g = oracle::gaussian(3, 2, rng);
    const Matrix got = linalg::kron_apply(SymMatrix(l), SymMatrix(r), g, 0.5);
    CHECK(oracle::rel_err(got, Matrix(oracle::sqrtm(l) * g * oracle::sqrtm(r))) < 1e-10);
}

TEST_CASE("random_psd contract") {
    const SymMatrix one = linalg::random_psd(1, 10.0, 3);
    CHECK(one.dim() == 1);
    CHECK(one(0, 0) >= 0.0);

    const SymMatrix flat = linalg::random_psd(4, 1.0, 7);
    CHECK((flat.matrix() - flat(0, 0) * Matrix::Identity(4, 4)).norm() < 1e-12);

    const SymMatrix a = linalg::random_psd(5, 100.0, 99);
    const SymMatrix b = linalg::random_psd(5, 100.0, 99);
    CHECK(a.matrix() == b.matrix());

    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const SymMatrix m = linalg::random_psd(6, 1e3, seed);
        const auto e = linalg::eigh(m);
        CHECK(e.values.minCoeff() >= 1e-3 * (1 - 1e-9));
        CHECK(e.values.maxCoeff() <= 1.0 + 1e-9);
    }
}

TEST_CASE("random_orthogonal is orthogonal") {
    auto rng = oracle::rng_for(16);
    for (int d = 1; d <= 6; ++d) {
        const Matrix q = linalg::random_orthogonal(d, rng);
        CHECK((q.transpose() * q - Matrix::Identity(d, d)).norm() < 1e-12);
    }
}
