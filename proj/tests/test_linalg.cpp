#include <doctest.h>

#include <cmath>

#include "lorasub/linalg.hpp"
#include "oracles.hpp"

using namespace lorasub;

namespace {

double ortho_error(const Matrix& q) {
    return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("svd: identity") {
    const Matrix eye = Matrix::Identity(3, 3);
    const SvdResult dec = svd(eye, 3);
    for (Index i = 0; i < 3; ++i) CHECK(dec.sigma(i) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((dec.u * dec.sigma.asDiagonal() * dec.v.transpose() - eye).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("svd: diagonal") {
    Matrix m = Matrix::Zero(3, 3);
    m.diagonal() << 3.0, 2.0, 1.0;
    const SvdResult dec = svd(m, 3);
    CHECK(dec.sigma(0) == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(dec.sigma(1) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(dec.sigma(2) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("svd: matches Gram-matrix eigenvalue oracle") {
    const Matrix m = oracles::random_matrix(501, 5, 4);
    const SvdResult dec = svd(m, 4);
    const Vector expected = oracles::gram_singular_values(m);
    for (Index i = 0; i < 4; ++i) {
        CHECK(std::abs(dec.sigma(i) - expected(i)) <= 1e-9 * expected(0));
    }
}

TEST_CASE("svd: orthonormality, reconstruction, determinism") {
    const Matrix m = oracles::random_matrix(77, 9, 6);
    const SvdResult dec = svd(m, 6);
    CHECK(ortho_error(dec.u) <= 1e-10);
    CHECK(ortho_error(dec.v) <= 1e-10);
    CHECK((dec.u * dec.sigma.asDiagonal() * dec.v.transpose() - m).norm() <= 1e-8 * m.norm());

    const SvdResult again = svd(m, 6);
    CHECK((dec.u - again.u).cwiseAbs().maxCoeff() == 0.0);
    CHECK((dec.sigma - again.sigma).cwiseAbs().maxCoeff() == 0.0);
    CHECK((dec.v - again.v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("svd: truncation residual identity") {
    // || m - U_p S_p V_p^T ||_F^2 == sum_{i>p} sigma_i^2 for every p.
    const Matrix m = oracles::random_matrix(91, 8, 7);
    const SvdResult full = svd(m, 7);
    for (Index p = 1; p <= 7; ++p) {
        const SvdResult dec = svd(m, p);
        const double residual_sq =
            (m - dec.u * dec.sigma.asDiagonal() * dec.v.transpose()).squaredNorm();
        double tail = 0.0;
        for (Index i = p; i < 7; ++i) tail += full.sigma(i) * full.sigma(i);
        CHECK(residual_sq == doctest::Approx(tail).epsilon(1e-8).scale(m.squaredNorm()));
    }
}

TEST_CASE("svd: input validation") {
    Matrix bad = Matrix::Ones(2, 2);
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(svd(bad, 1), InvalidInputError);
    const Matrix ok = Matrix::Ones(3, 2);
    CHECK_THROWS_AS(svd(ok, 0), DimensionError);
    CHECK_THROWS_AS(svd(ok, 3), DimensionError);
}

TEST_CASE("thin_qr: orthonormal input is a fixed point up to signs") {
    const Matrix m = oracles::random_matrix(31, 7, 3);
    const auto [q0, r0] = thin_qr(m);
    const auto [q, r] = thin_qr(q0);
    CHECK((q - q0).cwiseAbs().maxCoeff() < 1e-12);  // diag(r) >= 0 pins the signs
    for (Index i = 0; i < r.rows(); ++i) {
        CHECK(r(i, i) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("thin_qr: single column") {
    Matrix v(3, 1);
    v << 3.0, 0.0, 4.0;
    const auto [q, r] = thin_qr(v);
    CHECK(r(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK((q - v / 5.0).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("thin_qr: reconstruction on random input") {
    const Matrix m = oracles::random_matrix(88, 8, 3);
    const auto [q, r] = thin_qr(m);
    CHECK(ortho_error(q) <= 1e-10);
    CHECK((q * r - m).norm() <= 1e-12 * m.norm());
    for (Index i = 1; i < r.rows(); ++i) {
        for (Index j = 0; j < i; ++j) CHECK(r(i, j) == 0.0);
    }
}

TEST_CASE("thin_qr: wide input rejected") {
    CHECK_THROWS_AS(thin_qr(Matrix::Ones(2, 3)), DimensionError);
}

TEST_CASE("gen_eig_smallest: identity pencil") {
    const Matrix g =
        oracles::random_matrix(5, 4, 4) * oracles::random_matrix(5, 4, 4).transpose() +
        4.0 * Matrix::Identity(4, 4);
    const GenEigResult result = gen_eig_smallest(g, g, 4);
    for (Index i = 0; i < 4; ++i) {
        CHECK(result.lambdas(i) == doctest::Approx(1.0).epsilon(1e-10));
    }
}

TEST_CASE("gen_eig_smallest: zero lhs") {
    const GenEigResult result =
        gen_eig_smallest(Matrix::Zero(3, 3), Matrix::Identity(3, 3), 2);
    CHECK(result.lambdas.cwiseAbs().maxCoeff() < 1e-14);
    CHECK(result.delta == 1e-10);
}

TEST_CASE("gen_eig_smallest: matches dense-inversion oracle") {
    const Matrix base_p = oracles::random_matrix(61, 6, 6);
    const Matrix base_q = oracles::random_matrix(62, 6, 6);
    const Matrix p = base_p * base_p.transpose();
    const Matrix q = base_q * base_q.transpose() + 0.5 * Matrix::Identity(6, 6);
    const GenEigResult result = gen_eig_smallest(p, q, 6);
    const Vector expected = oracles::dense_inversion_gen_eig(p, q);
    for (Index i = 0; i < 6; ++i) {
        CHECK(std::abs(result.lambdas(i) - expected(i)) <= 1e-8 * std::max(1.0, expected(5)));
    }
    // Residual check: p x = lambda q x.
    for (Index i = 0; i < 6; ++i) {
        const Vector x = result.vectors.col(i);
        CHECK((p * x - result.lambdas(i) * (q * x)).norm() <= 1e-8 * x.norm() * q.norm());
    }
    // Eigenvalues of PSD pencils stay non-negative.
    CHECK(result.lambdas(0) > -1e-10);
}

TEST_CASE("gen_eig_smallest: rejections") {
    Matrix p = Matrix::Identity(3, 3);
    Matrix asym = p;
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(gen_eig_smallest(asym, p, 1), InvalidInputError);
    CHECK_THROWS_AS(gen_eig_smallest(p, asym, 1), InvalidInputError);
    CHECK_THROWS_AS(gen_eig_smallest(p, Matrix::Zero(3, 3), 1), SingularError);
    CHECK_THROWS_AS(gen_eig_smallest(p, Matrix::Identity(4, 4), 1), DimensionError);
    CHECK_THROWS_AS(gen_eig_smallest(p, p, 4), DimensionError);
}

TEST_CASE("frob_dist_factored: identical operands") {
    const FactoredMatrix f{oracles::random_matrix(3, 10, 4), oracles::random_matrix(4, 8, 4)};
    CHECK(frob_dist_factored(f, f) == doctest::Approx(0.0).epsilon(0).scale(1e-9));
}

TEST_CASE("frob_dist_factored: distance to zero is the norm") {
    const FactoredMatrix f{oracles::random_matrix(5, 10, 3), oracles::random_matrix(6, 8, 3)};
    const FactoredMatrix zero = FactoredMatrix::zero(10, 8);
    CHECK(frob_dist_factored(zero, f) ==
          doctest::Approx(f.dense().norm()).epsilon(1e-12));
    CHECK(frob_norm_factored(f) == doctest::Approx(f.dense().norm()).epsilon(1e-12));
}

TEST_CASE("frob_dist_factored: matches dense materialization") {
    const FactoredMatrix f1{oracles::random_matrix(11, 32, 5), oracles::random_matrix(12, 24, 5)};
    const FactoredMatrix f2{oracles::random_matrix(13, 32, 5), oracles::random_matrix(14, 24, 5)};
    const double expected = oracles::dense_frob_dist(f1, f2);
    CHECK(std::abs(frob_dist_factored(f1, f2) - expected) <= 1e-10 * expected);
    CHECK(frob_dist_factored(f1, f2) == doctest::Approx(frob_dist_factored(f2, f1)));
}

TEST_CASE("frob_dist_factored: triangle inequality on random triples") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const FactoredMatrix a{oracles::random_matrix(seed * 3 + 1, 12, 3),
                               oracles::random_matrix(seed * 3 + 2, 9, 3)};
        const FactoredMatrix b{oracles::random_matrix(seed * 3 + 101, 12, 4),
                               oracles::random_matrix(seed * 3 + 102, 9, 4)};
        const FactoredMatrix c{oracles::random_matrix(seed * 3 + 201, 12, 2),
                               oracles::random_matrix(seed * 3 + 202, 9, 2)};
        CHECK(frob_dist_factored(a, c) <=
              frob_dist_factored(a, b) + frob_dist_factored(b, c) + 1e-9);
    }
}

TEST_CASE("frob_dist_factored: shape mismatch") {
    const FactoredMatrix f1{Matrix::Ones(4, 2), Matrix::Ones(3, 2)};
    const FactoredMatrix f2{Matrix::Ones(5, 2), Matrix::Ones(3, 2)};
    CHECK_THROWS_AS(frob_dist_factored(f1, f2), DimensionError);
}

TEST_CASE("svd_factored: agrees with dense svd, including wide factors") {
    // factor_cols > rows exercises the compression-skip path.
    for (auto [n, m, q] : {std::tuple<Index, Index, Index>{20, 15, 6},
                           std::tuple<Index, Index, Index>{10, 30, 16}}) {
        const FactoredMatrix f{oracles::random_matrix(900 + q, n, q),
                               oracles::random_matrix(901 + q, m, q)};
        const Index p = std::min({n, m, q});
        const SvdResult lhs = svd_factored(f, p);
        const SvdResult rhs = svd(f.dense(), p);
        CHECK((lhs.sigma - rhs.sigma).cwiseAbs().maxCoeff() <= 1e-9 * rhs.sigma(0));
        CHECK(ortho_error(lhs.u) <= 1e-10);
        CHECK(ortho_error(lhs.v) <= 1e-10);
        const Matrix reconstructed = lhs.u * lhs.sigma.asDiagonal() * lhs.v.transpose();
        CHECK((reconstructed - f.dense()).norm() <= 1e-8 * f.dense().norm());
    }
}

TEST_CASE("orthonormalize_with_drop: drops dependent columns") {
    Matrix m(4, 3);
    m.col(0) << 1, 0, 0, 0;
    m.col(1) << 1, 0, 0, 0;  // duplicate
    m.col(2) << 0, 2, 0, 0;
    const auto [q, kept] = orthonormalize_with_drop(m);
    REQUIRE(q.cols() == 2);
    CHECK(kept == std::vector<Index>{0, 2});
    CHECK(ortho_error(q) < 1e-14);
}
