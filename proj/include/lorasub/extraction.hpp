#pragma once

#include <vector>

#include "lorasub/model.hpp"

namespace lorasub {

// C = sum_i w_i A_i B_i^T / sum_i w_i in factored form: left holds the
// columns of each A_i scaled by w_i / sum(w), right the unscaled B_i columns,
// concatenated in adapter order.
FactoredMatrix weighted_mixture(const std::vector<LoraAdapter>& adapters, const Vector& weights);

struct TruncatedFactorization {
    Matrix a;  // U_d' sqrt(Sigma_d')
    Matrix b;  // V_d' sqrt(Sigma_d')
    Vector sigma;
    bool rank_deficient = false;  // some requested columns fell below the zero cutoff
};

// Best rank-d' factorization of C from its SVD, computed on the factored
// form (QR compression + small-core SVD, never materializing C). Trailing
// singular values below the zero cutoff produce zero columns.
TruncatedFactorization truncated_factorization(const FactoredMatrix& c, Index target_dim);

// w_i = 1 / (epsilon^2 + residual_sq_i)^((2 - alpha) / 2). For alpha = 2 the
// exponent collapses and every weight is 1.
Vector update_weights(const Vector& residuals_sq, double alpha, double epsilon);

// sum_i || a b^T - A_i B_i^T ||_F^alpha, evaluated in factored form.
double objective(const Matrix& a, const Matrix& b, const std::vector<LoraAdapter>& adapters,
                 double alpha);

// epsilon actually used by irls_extract when the config leaves it unset:
// 1e-8 * mean_i || A_i B_i^T ||_F.
double resolve_epsilon(const std::vector<LoraAdapter>& adapters, const ExtractionConfig& config);

// Robust shared-subspace extraction: starting from w_i = 1, alternate the
// closed-form weighted-SVD step with the weight update until the objective
// stalls (relative change < rel_tol) or max_iters is hit. alpha = 2 performs
// exactly one SVD step. Weights are renormalized to sum k each iteration (a
// pure rescaling; C is scale-free in w).
SharedSubspace irls_extract(const std::vector<LoraAdapter>& adapters,
                            const ExtractionConfig& config, const LayerKey& layer);

}  // namespace lorasub
