#pragma once

#include <vector>

#include "lorasub/model.hpp"

namespace lorasub {

// Column-concatenate the subspace factors and orthonormalize each side with
// a rank-revealing drop (threshold drop_tol * ||concat||_F). Sides may lose
// different column counts; both are then truncated to the common minimum and
// the result is flagged `truncated`.
SubspaceBasis assemble_basis(const std::vector<SharedSubspace>& subspaces,
                             double drop_tol = 1e-10);

// The update dW = a_bar * M * b_bar^T with only M trainable.
struct SubspaceDelta {
    SubspaceBasis basis;
    Matrix m;  // D x D
};

// (a_bar M b_bar^T) x as a_bar (M (b_bar^T x)); never forms n x m.
Matrix apply_delta(const SubspaceDelta& delta, const Matrix& x);

// dL/dM = a_bar^T G b_bar for upstream G = dL/d(dW).
Matrix grad_m(const SubspaceBasis& basis, const Matrix& upstream);
Matrix grad_m(const SubspaceBasis& basis, const FactoredMatrix& upstream);

struct FitResult {
    Matrix m;
    std::vector<double> loss_trace;  // loss before each step plus the final value
};

// Fixed-step gradient descent on 0.5 * ||a_bar M b_bar^T X - Y||_F^2 / N
// from M = 0. Throws DivergenceError when the loss passes 1e12.
FitResult fit_m(const SubspaceBasis& basis, const Matrix& x, const Matrix& y, double lr,
                int steps);

}  // namespace lorasub
