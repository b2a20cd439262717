#include <doctest.h>

#include <cmath>

#include "lorasub/basis.hpp"
#include "lorasub/orthogonality.hpp"
#include "oracles.hpp"

using namespace lorasub;

namespace {

SharedSubspace canonical_subspace(std::uint64_t seed, Index n, Index m, Index d,
                                  const char* key) {
    const CanonicalPair canon =
        canonicalize(oracles::random_matrix(seed, n, d), oracles::random_matrix(seed + 1, m, d));
    SharedSubspace s;
    s.a = canon.a;
    s.b = canon.b;
    s.sigma = canon.sigma;
    s.layer = LayerKey::parse(key);
    return s;
}

SharedSubspace unit_subspace(Index n, Index m, Index first_col, Index d, const char* key) {
    SharedSubspace s;
    s.a = Matrix::Zero(n, d);
    s.b = Matrix::Zero(m, d);
    for (Index j = 0; j < d; ++j) {
        s.a(first_col + j, j) = 1.0;
        s.b(first_col + j, j) = 1.0;
    }
    s.sigma = Vector::Ones(d);
    s.layer = LayerKey::parse(key);
    return s;
}

}  // namespace

TEST_CASE("assemble_basis: disjoint spans concatenate") {
    const SharedSubspace s1 = unit_subspace(8, 7, 0, 2, "tex-g-atten-qkv-1");
    const SharedSubspace s2 = unit_subspace(8, 7, 2, 2, "geo-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s1, s2});
    CHECK(basis.dim() == 4);
    CHECK_FALSE(basis.truncated);
    CHECK((basis.a_bar.transpose() * basis.a_bar - Matrix::Identity(4, 4))
              .cwiseAbs()
              .maxCoeff() <= 1e-8);
    REQUIRE(basis.blocks.size() == 2);
    CHECK(basis.blocks[0].attribute == Attribute::texture());
    CHECK(basis.blocks[0].col_start == 0);
    CHECK(basis.blocks[0].col_count == 2);
    CHECK(basis.blocks[1].col_start == 2);
    CHECK(basis.blocks[1].col_count == 2);
}

TEST_CASE("assemble_basis: duplicate subspace collapses to its rank") {
    const SharedSubspace s = canonical_subspace(11, 10, 9, 3, "tex-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s, s});
    CHECK(basis.dim() == 3);
    CHECK(basis.blocks[0].col_count == 3);
    CHECK(basis.blocks[1].col_count == 0);
}

TEST_CASE("assemble_basis: source spans are contained") {
    std::vector<SharedSubspace> sources;
    sources.push_back(canonical_subspace(21, 12, 10, 3, "tex-g-atten-qkv-1"));
    sources.push_back(canonical_subspace(23, 12, 10, 2, "geo-g-atten-qkv-1"));
    sources.push_back(canonical_subspace(25, 12, 10, 4, "cam-g-atten-qkv-1"));
    const SubspaceBasis basis = assemble_basis(sources);
    for (const auto& s : sources) {
        const Matrix residual_a =
            s.a - basis.a_bar * (basis.a_bar.transpose() * s.a);
        const Matrix residual_b =
            s.b - basis.b_bar * (basis.b_bar.transpose() * s.b);
        CHECK(residual_a.norm() <= 1e-8 * s.a.norm());
        CHECK(residual_b.norm() <= 1e-8 * s.b.norm());
    }
    // Projector is order-invariant.
    const SubspaceBasis flipped = assemble_basis({sources[2], sources[0], sources[1]});
    const Matrix p1 = basis.a_bar * basis.a_bar.transpose();
    const Matrix p2 = flipped.a_bar * flipped.a_bar.transpose();
    CHECK((p1 - p2).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("assemble_basis: rejections") {
    CHECK_THROWS_AS(assemble_basis({}), InvalidInputError);
    SharedSubspace zero;
    zero.a = Matrix::Zero(6, 2);
    zero.b = Matrix::Zero(5, 2);
    zero.sigma = Vector::Zero(2);
    zero.layer = LayerKey::parse("tex-g-atten-qkv-1");
    CHECK_THROWS_AS(assemble_basis({zero}), InvalidInputError);
    auto s1 = canonical_subspace(31, 8, 7, 2, "tex-g-atten-qkv-1");
    auto s2 = canonical_subspace(33, 9, 7, 2, "geo-g-atten-qkv-1");
    CHECK_THROWS_AS(assemble_basis({s1, s2}), DimensionError);
}

TEST_CASE("apply_delta: zero core and identity basis") {
    const SharedSubspace s = canonical_subspace(41, 9, 8, 3, "tex-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s});
    SubspaceDelta delta{basis, Matrix::Zero(basis.dim(), basis.dim())};
    CHECK(apply_delta(delta, oracles::random_matrix(43, 8, 5)).cwiseAbs().maxCoeff() == 0.0);

    SubspaceBasis eye;
    eye.a_bar = Matrix::Identity(4, 4);
    eye.b_bar = Matrix::Identity(4, 4);
    const Matrix m = oracles::random_matrix(44, 4, 4);
    const Matrix x = oracles::random_matrix(45, 4, 6);
    CHECK((apply_delta({eye, m}, x) - m * x).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("apply_delta: matches dense materialization and is linear") {
    const SharedSubspace s1 = canonical_subspace(51, 10, 9, 2, "tex-g-atten-qkv-1");
    const SharedSubspace s2 = canonical_subspace(53, 10, 9, 2, "geo-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s1, s2});
    const Index dim = basis.dim();
    const Matrix m = oracles::random_matrix(55, dim, dim);
    const Matrix x = oracles::random_matrix(56, 9, 7);
    const Matrix dense = basis.a_bar * m * basis.b_bar.transpose();
    CHECK((apply_delta({basis, m}, x) - dense * x).norm() <= 1e-10 * (dense * x).norm());

    // Superposition in both arguments.
    const Matrix m2 = oracles::random_matrix(57, dim, dim);
    const Matrix x2 = oracles::random_matrix(58, 9, 7);
    const Matrix lhs = apply_delta({basis, m + 2.0 * m2}, x + 0.5 * x2);
    const Matrix rhs = apply_delta({basis, m}, x) + 0.5 * apply_delta({basis, m}, x2) +
                       2.0 * apply_delta({basis, m2}, x) + apply_delta({basis, m2}, x2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK_THROWS_AS(apply_delta({basis, m}, oracles::random_matrix(59, 8, 3)), DimensionError);
}

TEST_CASE("grad_m: identity basis passes the upstream through") {
    SubspaceBasis eye;
    eye.a_bar = Matrix::Identity(5, 5);
    eye.b_bar = Matrix::Identity(5, 5);
    const Matrix g = oracles::random_matrix(61, 5, 5);
    CHECK((grad_m(eye, g) - g).cwiseAbs().maxCoeff() == 0.0);
    CHECK(grad_m(eye, Matrix::Zero(5, 5)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grad_m: factored and dense upstream agree") {
    const SharedSubspace s = canonical_subspace(71, 12, 10, 3, "tex-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s});
    const FactoredMatrix g{oracles::random_matrix(73, 12, 2), oracles::random_matrix(74, 10, 2)};
    CHECK((grad_m(basis, g) - grad_m(basis, g.dense())).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("grad_m: matches central finite differences") {
    const SharedSubspace s1 = canonical_subspace(81, 11, 9, 2, "tex-g-atten-qkv-1");
    const SharedSubspace s2 = canonical_subspace(83, 11, 9, 2, "geo-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s1, s2});
    const Index dim = basis.dim();
    const Matrix x = oracles::random_matrix(85, 9, 8);
    const Matrix y = oracles::random_matrix(86, 11, 8);
    const Matrix m = oracles::random_matrix(87, dim, dim);

    auto loss = [&](const Matrix& core) {
        return 0.5 * (apply_delta({basis, core}, x) - y).squaredNorm();
    };
    const Matrix upstream = (apply_delta({basis, m}, x) - y) * x.transpose();
    const Matrix grad = grad_m(basis, upstream);
    const double h = 1e-6;
    for (Index i = 0; i < dim; ++i) {
        for (Index j = 0; j < dim; ++j) {
            Matrix probe = m;
            probe(i, j) = m(i, j) + h;
            const double up = loss(probe);
            probe(i, j) = m(i, j) - h;
            const double down = loss(probe);
            const double fd = (up - down) / (2.0 * h);
            CHECK(std::abs(grad(i, j) - fd) <= 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }

    // Directional-derivative consistency on random unit directions.
    std::mt19937_64 engine(88);
    for (int trial = 0; trial < 5; ++trial) {
        Matrix dir = oracles::random_matrix(engine(), dim, dim);
        dir /= dir.norm();
        const double lhs = (loss(m + h * dir) - loss(m - h * dir)) / (2.0 * h);
        const double rhs = grad.cwiseProduct(dir).sum();
        CHECK(std::abs(lhs - rhs) <= 1e-5 * std::max(1.0, std::abs(rhs)));
    }
}

TEST_CASE("fit_m: recovers a planted core") {
    const SharedSubspace s1 = canonical_subspace(91, 14, 12, 3, "tex-g-atten-qkv-1");
    const SharedSubspace s2 = canonical_subspace(93, 14, 12, 3, "geo-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s1, s2});
    const Index dim = basis.dim();
    const Matrix target = oracles::random_matrix(95, dim, dim);
    const Matrix x = oracles::random_matrix(96, 12, 40);  // full-column-rank b_bar^T x
    const Matrix y = apply_delta({basis, target}, x);

    // lr below 2/L with L = sigma_max(b_bar^T x)^2 / N keeps descent stable.
    Eigen::BDCSVD<Matrix> dec(basis.b_bar.transpose() * x);
    const double lipschitz =
        dec.singularValues()(0) * dec.singularValues()(0) / static_cast<double>(x.cols());
    const FitResult fit = fit_m(basis, x, y, 1.0 / lipschitz, 2000);
    CHECK(fit.loss_trace.back() <= 1e-8 * fit.loss_trace.front());
    CHECK((fit.m - target).norm() <= 1e-3 * target.norm());
    // Deterministic rerun.
    const FitResult again = fit_m(basis, x, y, 1.0 / lipschitz, 2000);
    CHECK((fit.m - again.m).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fit_m: orthogonal targets stall at the initial loss") {
    const SharedSubspace s = unit_subspace(10, 9, 0, 3, "tex-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s});
    const Matrix x = oracles::random_matrix(97, 9, 12);
    Matrix y = Matrix::Zero(10, 12);
    y.bottomRows(6) = oracles::random_matrix(98, 6, 12);  // orthogonal to span(a_bar)
    const FitResult fit = fit_m(basis, x, y, 0.5, 50);
    for (double loss : fit.loss_trace) {
        CHECK(loss == fit.loss_trace.front());
    }
}

TEST_CASE("fit_m: zero targets stay at zero") {
    const SharedSubspace s = canonical_subspace(99, 8, 7, 2, "tex-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s});
    const Matrix x = oracles::random_matrix(100, 7, 9);
    const FitResult fit = fit_m(basis, x, Matrix::Zero(8, 9), 0.5, 20);
    CHECK(fit.m.cwiseAbs().maxCoeff() == 0.0);
    for (double loss : fit.loss_trace) CHECK(loss == 0.0);
}

TEST_CASE("fit_m: divergence is reported with the step") {
    const SharedSubspace s = canonical_subspace(101, 8, 7, 2, "tex-g-atten-qkv-1");
    const SubspaceBasis basis = assemble_basis({s});
    const Matrix x = oracles::random_matrix(102, 7, 9);
    const Matrix y = oracles::random_matrix(103, 8, 9);
    CHECK_THROWS_AS(fit_m(basis, x, y, 1e9, 200), DivergenceError);
}

TEST_CASE("parameter count identity") {
    // Four d'=16 attributes with disjoint spans: D^2 core vs per-adapter
    // factors, asserted as arithmetic, not performance.
    const Index d_prime = 16, attributes = 4, n = 1024, m = 4096, r = 16;
    const Index core_params = (attributes * d_prime) * (attributes * d_prime);
    CHECK(core_params == 64 * 64);
    CHECK(n * r + m * r == 81920);  // vanilla LoRA parameter count at the same sizes
}
