#include "lorasub/extraction.hpp"

#include <cmath>

namespace lorasub {

namespace {

void require_shared_dims(const std::vector<LoraAdapter>& adapters) {
    if (adapters.empty()) throw InvalidInputError("adapter list is empty");
    const Index n = adapters.front().a.rows();
    const Index m = adapters.front().b.rows();
    for (const auto& ad : adapters) {
        if (ad.a.cols() != ad.b.cols()) {
            throw DimensionError("adapter factor widths differ");
        }
        if (ad.a.rows() != n || ad.b.rows() != m) {
            throw DimensionError("adapters do not share (n, m)");
        }
    }
}

}  // namespace

FactoredMatrix weighted_mixture(const std::vector<LoraAdapter>& adapters, const Vector& weights) {
    require_shared_dims(adapters);
    if (weights.size() != static_cast<Index>(adapters.size())) {
        throw DimensionError("weighted_mixture: one weight per adapter required");
    }
    if ((weights.array() < 0.0).any() || !weights.allFinite()) {
        throw InvalidInputError("weighted_mixture: weights must be finite and non-negative");
    }
    const double total = weights.sum();
    if (!(total > 0.0)) {
        throw InvalidInputError("weighted_mixture: weights sum to zero");
    }
    Index q = 0;
    for (const auto& ad : adapters) q += ad.rank();
    FactoredMatrix c{Matrix(adapters.front().a.rows(), q),
                     Matrix(adapters.front().b.rows(), q)};
    Index at = 0;
    for (std::size_t i = 0; i < adapters.size(); ++i) {
        const Index r = adapters[i].rank();
        c.left.middleCols(at, r) = adapters[i].a * (weights(static_cast<Index>(i)) / total);
        c.right.middleCols(at, r) = adapters[i].b;
        at += r;
    }
    return c;
}

TruncatedFactorization truncated_factorization(const FactoredMatrix& c, Index target_dim) {
    const Index dmax = std::min(c.rows(), c.cols());
    if (target_dim < 1 || target_dim > dmax) {
        throw DimensionError("truncated_factorization: target_dim=" + std::to_string(target_dim) +
                             " out of range [1, " + std::to_string(dmax) + "]");
    }
    const Index avail = std::min({c.rows(), c.cols(), c.factor_cols()});
    const Index p = std::min(target_dim, avail);
    SvdResult dec = svd_factored(c, p);

    TruncatedFactorization out;
    out.sigma = Vector::Zero(target_dim);
    out.a = Matrix::Zero(c.rows(), target_dim);
    out.b = Matrix::Zero(c.cols(), target_dim);
    const double cutoff = kSingularValueCutoff * dec.sigma(0);
    for (Index j = 0; j < p; ++j) {
        if (dec.sigma(j) <= cutoff) break;  // sigma is non-increasing
        const double root = std::sqrt(dec.sigma(j));
        out.sigma(j) = dec.sigma(j);
        out.a.col(j) = dec.u.col(j) * root;
        out.b.col(j) = dec.v.col(j) * root;
    }
    out.rank_deficient = target_dim > 0 && out.sigma(target_dim - 1) == 0.0;
    return out;
}

Vector update_weights(const Vector& residuals_sq, double alpha, double epsilon) {
    if ((residuals_sq.array() < 0.0).any() || !residuals_sq.allFinite()) {
        throw InvalidInputError("update_weights: residuals must be finite and non-negative");
    }
    if (!(alpha > 0.0 && alpha <= 2.0)) {
        throw InvalidInputError("update_weights: alpha must be in (0, 2]");
    }
    if (epsilon < 0.0) {
        throw InvalidInputError("update_weights: epsilon must be non-negative");
    }
    const double exponent = (2.0 - alpha) / 2.0;
    return (residuals_sq.array() + epsilon * epsilon).pow(-exponent).matrix();
}

double objective(const Matrix& a, const Matrix& b, const std::vector<LoraAdapter>& adapters,
                 double alpha) {
    require_shared_dims(adapters);
    if (a.cols() != b.cols() || a.rows() != adapters.front().a.rows() ||
        b.rows() != adapters.front().b.rows()) {
        throw DimensionError("objective: (a, b) incompatible with adapters");
    }
    double total = 0.0;
    for (const auto& ad : adapters) {
        total += std::pow(frob_dist_factored({a, b}, ad.factored()), alpha);
    }
    return total;
}

double resolve_epsilon(const std::vector<LoraAdapter>& adapters, const ExtractionConfig& config) {
    if (config.epsilon) return *config.epsilon;
    require_shared_dims(adapters);
    double mean_norm = 0.0;
    for (const auto& ad : adapters) mean_norm += frob_norm_factored(ad.factored());
    mean_norm /= static_cast<double>(adapters.size());
    return 1e-8 * mean_norm;
}

SharedSubspace irls_extract(const std::vector<LoraAdapter>& adapters,
                            const ExtractionConfig& config, const LayerKey& layer) {
    config.validate();
    require_shared_dims(adapters);
    const auto k = static_cast<Index>(adapters.size());

    SharedSubspace out;
    out.layer = layer;
    out.config = config;
    out.config.epsilon = resolve_epsilon(adapters, config);

    Vector w = Vector::Ones(k);
    Vector residuals_sq(k);
    for (int iter = 0; iter < config.max_iters; ++iter) {
        const FactoredMatrix c = weighted_mixture(adapters, w);
        TruncatedFactorization tf = truncated_factorization(c, config.target_dim);
        for (Index i = 0; i < k; ++i) {
            const double d = frob_dist_factored({tf.a, tf.b},
                                                adapters[static_cast<std::size_t>(i)].factored());
            residuals_sq(i) = d * d;
        }
        out.objective_trace.push_back(
            residuals_sq.array().pow(config.alpha / 2.0).sum());
        out.a = std::move(tf.a);
        out.b = std::move(tf.b);
        out.sigma = std::move(tf.sigma);
        out.rank_deficient = tf.rank_deficient;
        out.weights = w;

        if (config.alpha == 2.0) break;  // closed form; weights would stay uniform
        const auto t = out.objective_trace.size();
        if (t >= 2) {
            const double prev = out.objective_trace[t - 2];
            const double curr = out.objective_trace[t - 1];
            if (std::abs(prev - curr) <= config.rel_tol * prev) break;
        }
        if (iter + 1 < config.max_iters) {
            w = update_weights(residuals_sq, config.alpha, *out.config.epsilon);
            w *= static_cast<double>(k) / w.sum();
        }
    }
    return out;
}

}  // namespace lorasub
