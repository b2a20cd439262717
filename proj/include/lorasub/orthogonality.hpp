#pragma once

#include <vector>

#include "lorasub/model.hpp"

namespace lorasub {

struct CanonicalPair {
    Matrix a;  // U sqrt(Sigma)
    Matrix b;  // V sqrt(Sigma)
    Vector sigma;
};

// Gauge-fix a factor pair: a_c b_c^T == a b^T with a_c = U sqrt(S),
// b_c = V sqrt(S) from the SVD of a b^T (computed factored). Rank-deficient
// products yield zero trailing columns.
CanonicalPair canonicalize(const Matrix& a, const Matrix& b);

// Overlap of one subspace pair: the ascending generalized eigenvalues of the
// subspace-angle pencil. min_lambda = 0 means a shared direction, 1 means
// orthogonal.
struct OverlapReport {
    LayerKey layer_a;
    LayerKey layer_b;
    Vector lambdas;      // ascending, clipped to [0, 1]
    Vector lambdas_raw;  // pre-clip values, for diagnostics
    double min_lambda = 0.0;
    bool disentangled = false;  // min_lambda >= threshold
    double threshold = 0.5;
    double delta = 0.0;  // regularization coefficient applied by the eigensolver
};

// d(S, S') for canonical subspaces (non-canonical inputs are canonicalized
// first). threshold only sets the disentangled verdict, never the math.
OverlapReport subspace_overlap(const SharedSubspace& s1, const SharedSubspace& s2,
                               double threshold = 0.5);

// One report per unordered attribute pair per layer site, ordered by site
// then lexicographic attribute pair. Same-attribute pairs are never emitted.
std::vector<OverlapReport> pairwise_overlap(const std::vector<SharedSubspace>& subspaces,
                                            double threshold = 0.5);

}  // namespace lorasub
