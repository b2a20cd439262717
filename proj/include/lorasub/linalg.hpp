#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "lorasub/error.hpp"

namespace lorasub {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Singular values below kSingularValueCutoff * sigma_max count as zero for
// rank decisions everywhere in the library.
inline constexpr double kSingularValueCutoff = 1e-14;

// Top-p singular triplets. u: n x p, v: m x p, both with orthonormal columns;
// sigma non-negative, non-increasing.
struct SvdResult {
    Matrix u;
    Vector sigma;
    Matrix v;
};

// left * right^T without materializing the n x m product.
struct FactoredMatrix {
    Matrix left;   // n x q
    Matrix right;  // m x q

    Index rows() const { return left.rows(); }
    Index cols() const { return right.rows(); }
    Index factor_cols() const { return left.cols(); }

    Matrix dense() const { return left * right.transpose(); }

    static FactoredMatrix zero(Index rows, Index cols) {
        return {Matrix::Zero(rows, 1), Matrix::Zero(cols, 1)};
    }
};

struct GenEigResult {
    Vector lambdas;  // ascending
    Matrix vectors;  // one column per lambda
    double delta;    // regularization coefficient applied to q (see gen_eig_smallest)
};

// Top-p singular triplets of m, deterministic for identical input. Columns are
// sign-normalized (first nonzero component of each left vector positive);
// exactly tied singular values are ordered by lexicographic comparison of the
// left vectors.
SvdResult svd(const Matrix& m, Index p);

// Thin QR of m (rows >= cols): q with orthonormal columns, r upper-triangular
// with non-negative diagonal.
std::pair<Matrix, Matrix> thin_qr(const Matrix& m);

// k smallest eigenpairs of p x = lambda q x for symmetric PSD p and symmetric
// q made positive-definite by adding delta * tr(q)/dim * I with delta = 1e-10.
GenEigResult gen_eig_smallest(const Matrix& p, const Matrix& q, Index count);

// || L1 R1^T - L2 R2^T ||_F via Gram trace identities; never forms n x m.
double frob_dist_factored(const FactoredMatrix& f1, const FactoredMatrix& f2);

// || L R^T ||_F via the same identities.
double frob_norm_factored(const FactoredMatrix& f);

// SVD of left * right^T through QR compression of each factor plus a dense
// SVD of the small core. p <= min(rows, cols, factor_cols).
SvdResult svd_factored(const FactoredMatrix& f, Index p);

// Left-to-right modified Gram-Schmidt with a rank-revealing drop: a column is
// discarded when its residual norm falls below drop_tol * ||m||_F. Returns
// the orthonormal basis and the surviving source-column indices (ascending).
std::pair<Matrix, std::vector<Index>> orthonormalize_with_drop(const Matrix& m,
                                                               double drop_tol = 1e-10);

}  // namespace lorasub
