#include "lorasub/synth.hpp"

#include <cmath>

#include "lorasub/orthogonality.hpp"
#include "lorasub/rng.hpp"

namespace lorasub {

namespace {

// Substream path tags.
enum : std::uint64_t {
    kSharedLeft = 1,
    kSharedRight = 2,
    kNoiseLeft = 3,
    kNoiseRight = 4,
    kOutlierLeft = 5,
    kOutlierRight = 6,
};

Matrix orthonormal_frame(std::uint64_t seed, Index rows, Index cols) {
    GaussianStream stream(seed);
    auto [q, r] = thin_qr(stream.matrix(rows, cols));
    return q;
}

struct PlantedFrame {
    Matrix a_shared;  // n x s, orthonormal
    Matrix b_shared;  // m x s, orthonormal
};

PlantedEnsemble assemble_planted(const PlantedSpec& spec, const PlantedFrame& frame,
                                 std::uint64_t noise_salt) {
    const Vector sigma = spec.resolved_sigma();
    const Vector root = sigma.cwiseSqrt();
    const Matrix truth_a = frame.a_shared * root.asDiagonal();
    const Matrix truth_b = frame.b_shared * root.asDiagonal();
    const double shared_norm = sigma.norm();  // ||S*||_F with orthonormal frames

    PlantedEnsemble out;
    out.truth.a = truth_a;
    out.truth.b = truth_b;
    out.truth.sigma = sigma;
    out.truth.layer = spec.layer;
    out.truth.config.target_dim = spec.s;

    const Index inliers = spec.k - spec.outliers;
    for (Index i = 0; i < spec.k; ++i) {
        LoraAdapter adapter;
        if (i < inliers) {
            const Index noise_cols = spec.r - spec.s;
            adapter.a = Matrix(spec.n, spec.r);
            adapter.b = Matrix(spec.m, spec.r);
            adapter.a.leftCols(spec.s) = truth_a;
            adapter.b.leftCols(spec.s) = truth_b;
            if (noise_cols > 0) {
                GaussianStream left(substream_seed(
                    spec.seed, {kNoiseLeft, noise_salt, static_cast<std::uint64_t>(i)}));
                GaussianStream right(substream_seed(
                    spec.seed, {kNoiseRight, noise_salt, static_cast<std::uint64_t>(i)}));
                Matrix na = left.matrix(spec.n, noise_cols);
                Matrix nb = right.matrix(spec.m, noise_cols);
                const double noise_norm = frob_norm_factored({na, nb});
                adapter.a.rightCols(noise_cols) = na * (spec.noise_gamma / noise_norm);
                adapter.b.rightCols(noise_cols) = nb;
            }
        } else {
            GaussianStream left(substream_seed(
                spec.seed, {kOutlierLeft, noise_salt, static_cast<std::uint64_t>(i)}));
            GaussianStream right(substream_seed(
                spec.seed, {kOutlierRight, noise_salt, static_cast<std::uint64_t>(i)}));
            adapter.a = left.matrix(spec.n, spec.r);
            adapter.b = right.matrix(spec.m, spec.r);
            const double norm = frob_norm_factored({adapter.a, adapter.b});
            adapter.a *= spec.outlier_scale * shared_norm / norm;
        }
        out.ensemble.add_adapter(spec.layer, std::move(adapter));
    }
    return out;
}

}  // namespace

void PlantedSpec::validate() const {
    if (n < 1 || m < 1 || k < 1 || r < 1 || s < 1) {
        throw InvalidInputError("planted spec: dims, k, r, s must be >= 1");
    }
    if (s > r || r > std::min(n, m)) {
        throw InvalidInputError("planted spec: need s <= r <= min(n, m)");
    }
    if (outliers < 0 || outliers > k) {
        throw InvalidInputError("planted spec: outliers must lie in [0, k]");
    }
    if (noise_gamma < 0.0 || !(outlier_scale > 0.0)) {
        throw InvalidInputError("planted spec: gamma must be >= 0 and outlier_scale > 0");
    }
    if (shared_sigma.size() != 0) {
        if (shared_sigma.size() != s) {
            throw InvalidInputError("planted spec: shared_sigma must have length s");
        }
        for (Index i = 0; i < s; ++i) {
            if (!(shared_sigma(i) > 0.0)) {
                throw InvalidInputError("planted spec: shared_sigma must be positive");
            }
            if (i > 0 && shared_sigma(i) > shared_sigma(i - 1)) {
                throw InvalidInputError("planted spec: shared_sigma must be descending");
            }
        }
    }
}

Vector PlantedSpec::resolved_sigma() const {
    if (shared_sigma.size() != 0) return shared_sigma;
    if (s == 1) return Vector::Ones(1);
    return Vector::LinSpaced(s, 1.0, 0.5);
}

PlantedEnsemble generate_planted(const PlantedSpec& spec) {
    spec.validate();
    PlantedFrame frame{
        orthonormal_frame(substream_seed(spec.seed, {kSharedLeft}), spec.n, spec.s),
        orthonormal_frame(substream_seed(spec.seed, {kSharedRight}), spec.m, spec.s)};
    return assemble_planted(spec, frame, 0);
}

std::pair<PlantedEnsemble, PlantedEnsemble> generate_planted_pair(const PlantedSpec& base,
                                                                  Index shared_dims,
                                                                  const Attribute& attr_a,
                                                                  const Attribute& attr_b) {
    base.validate();
    if (shared_dims < 0 || shared_dims > base.s) {
        throw InvalidInputError("generate_planted_pair: shared_dims must lie in [0, s]");
    }
    const Index total = 2 * base.s - shared_dims;
    if (total > std::min(base.n, base.m)) {
        throw InvalidInputError("generate_planted_pair: joint frame exceeds min(n, m)");
    }
    const Matrix a_all =
        orthonormal_frame(substream_seed(base.seed, {kSharedLeft}), base.n, total);
    const Matrix b_all =
        orthonormal_frame(substream_seed(base.seed, {kSharedRight}), base.m, total);

    // First ensemble takes columns [0, s); the second takes [s - c, 2s - c),
    // so exactly c directions coincide.
    PlantedSpec spec_a = base;
    spec_a.layer.attribute = attr_a;
    PlantedSpec spec_b = base;
    spec_b.layer.attribute = attr_b;

    PlantedFrame frame_a{a_all.leftCols(base.s), b_all.leftCols(base.s)};
    PlantedFrame frame_b{a_all.middleCols(base.s - shared_dims, base.s),
                         b_all.middleCols(base.s - shared_dims, base.s)};
    return {assemble_planted(spec_a, frame_a, 1), assemble_planted(spec_b, frame_b, 2)};
}

double recovery_error(const SharedSubspace& extracted, const SharedSubspace& truth) {
    return subspace_overlap(extracted, truth).min_lambda;
}

}  // namespace lorasub
