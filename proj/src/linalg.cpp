#include "lorasub/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lorasub {

namespace {

void require_finite(const Matrix& m, const char* op) {
    if (!m.allFinite()) {
        throw InvalidInputError(std::string(op) + ": non-finite entries");
    }
}

// Flip column signs so the first nonzero component of each left vector is
// positive; the matching right column flips with it.
void normalize_signs(Matrix& u, Matrix& v) {
    for (Index j = 0; j < u.cols(); ++j) {
        for (Index i = 0; i < u.rows(); ++i) {
            const double x = u(i, j);
            if (x != 0.0) {
                if (x < 0.0) {
                    u.col(j) = -u.col(j);
                    v.col(j) = -v.col(j);
                }
                break;
            }
        }
    }
}

bool lex_less_desc(const Matrix& u, Index a, Index b) {
    for (Index i = 0; i < u.rows(); ++i) {
        if (u(i, a) != u(i, b)) return u(i, a) > u(i, b);
    }
    return false;
}

// Order exactly tied singular values by lexicographic comparison of the left
// vectors so identical inputs always produce identical outputs.
void break_ties(Matrix& u, Vector& sigma, Matrix& v) {
    Index start = 0;
    while (start < sigma.size()) {
        Index end = start + 1;
        while (end < sigma.size() && sigma(end) == sigma(start)) ++end;
        if (end - start > 1) {
            std::vector<Index> order(static_cast<std::size_t>(end - start));
            std::iota(order.begin(), order.end(), start);
            std::stable_sort(order.begin(), order.end(),
                             [&](Index a, Index b) { return lex_less_desc(u, a, b); });
            Matrix us = u.middleCols(start, end - start);
            Matrix vs = v.middleCols(start, end - start);
            for (Index k = 0; k < end - start; ++k) {
                u.col(start + k) = us.col(order[static_cast<std::size_t>(k)] - start);
                v.col(start + k) = vs.col(order[static_cast<std::size_t>(k)] - start);
            }
        }
        start = end;
    }
}

}  // namespace

SvdResult svd(const Matrix& m, Index p) {
    require_finite(m, "svd");
    const Index kmax = std::min(m.rows(), m.cols());
    if (p < 1 || p > kmax) {
        throw DimensionError("svd: p=" + std::to_string(p) + " out of range [1, " +
                             std::to_string(kmax) + "]");
    }
    Eigen::BDCSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Matrix u = dec.matrixU();
    Matrix v = dec.matrixV();
    Vector sigma = dec.singularValues();
    normalize_signs(u, v);
    break_ties(u, sigma, v);
    return {u.leftCols(p), sigma.head(p), v.leftCols(p)};
}

std::pair<Matrix, Matrix> thin_qr(const Matrix& m) {
    require_finite(m, "thin_qr");
    if (m.rows() < m.cols()) {
        throw DimensionError("thin_qr: rows < cols (" + std::to_string(m.rows()) + " x " +
                             std::to_string(m.cols()) + ")");
    }
    Eigen::HouseholderQR<Matrix> qr(m);
    Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
    Matrix r = Matrix(qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>());
    for (Index j = 0; j < r.rows(); ++j) {
        if (r(j, j) < 0.0) {
            r.row(j) = -r.row(j);
            q.col(j) = -q.col(j);
        }
    }
    return {std::move(q), std::move(r)};
}

GenEigResult gen_eig_smallest(const Matrix& p, const Matrix& q, Index count) {
    require_finite(p, "gen_eig_smallest");
    require_finite(q, "gen_eig_smallest");
    if (p.rows() != p.cols() || q.rows() != q.cols() || p.rows() != q.rows()) {
        throw DimensionError("gen_eig_smallest: p and q must be square with equal dims");
    }
    const Index dim = p.rows();
    if (count < 1 || count > dim) {
        throw DimensionError("gen_eig_smallest: count out of range");
    }
    const double p_scale = std::max(1.0, p.cwiseAbs().maxCoeff());
    const double q_scale = std::max(1.0, q.cwiseAbs().maxCoeff());
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > 1e-10 * p_scale ||
        (q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * q_scale) {
        throw InvalidInputError("gen_eig_smallest: input not symmetric within 1e-10");
    }
    const Matrix ps = 0.5 * (p + p.transpose());
    const double delta = 1e-10;
    Matrix qreg = 0.5 * (q + q.transpose());
    qreg.diagonal().array() += delta * qreg.trace() / static_cast<double>(dim);

    // Reduce to a standard symmetric problem through the Cholesky factor of q:
    // with q = L L^T, solve (L^-1 p L^-T) y = lambda y, x = L^-T y.
    Eigen::LLT<Matrix> llt(qreg);
    if (llt.info() != Eigen::Success) {
        throw SingularError("gen_eig_smallest: q singular beyond regularization capacity");
    }
    const Matrix l = llt.matrixL();
    Matrix reduced = l.triangularView<Eigen::Lower>().solve(ps);
    reduced = l.triangularView<Eigen::Lower>().solve(reduced.transpose()).transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (reduced + reduced.transpose()));
    if (eig.info() != Eigen::Success) {
        throw SingularError("gen_eig_smallest: eigensolver failed to converge");
    }
    Matrix vectors =
        l.transpose().triangularView<Eigen::Upper>().solve(eig.eigenvectors().leftCols(count));
    return {eig.eigenvalues().head(count), std::move(vectors), delta};
}

double frob_dist_factored(const FactoredMatrix& f1, const FactoredMatrix& f2) {
    if (f1.left.cols() != f1.right.cols() || f2.left.cols() != f2.right.cols()) {
        throw DimensionError("frob_dist_factored: left/right factor widths differ");
    }
    if (f1.rows() != f2.rows() || f1.cols() != f2.cols()) {
        throw DimensionError("frob_dist_factored: operands have different (n, m)");
    }
    // || L1 R1^T - L2 R2^T ||_F^2 = tr((L^T L)(R^T R)) with L = [L1, -L2],
    // R = [R1, R2]; expanded into the three Gram blocks below.
    const Matrix g11 = f1.left.transpose() * f1.left;
    const Matrix g12 = f1.left.transpose() * f2.left;
    const Matrix g22 = f2.left.transpose() * f2.left;
    const Matrix h11 = f1.right.transpose() * f1.right;
    const Matrix h12 = f1.right.transpose() * f2.right;
    const Matrix h22 = f2.right.transpose() * f2.right;
    const double d2 = g11.cwiseProduct(h11).sum() - 2.0 * g12.cwiseProduct(h12).sum() +
                      g22.cwiseProduct(h22).sum();
    return std::sqrt(std::max(d2, 0.0));
}

double frob_norm_factored(const FactoredMatrix& f) {
    if (f.left.cols() != f.right.cols()) {
        throw DimensionError("frob_norm_factored: left/right factor widths differ");
    }
    const Matrix g = f.left.transpose() * f.left;
    const Matrix h = f.right.transpose() * f.right;
    return std::sqrt(std::max(g.cwiseProduct(h).sum(), 0.0));
}

SvdResult svd_factored(const FactoredMatrix& f, Index p) {
    if (f.left.cols() != f.right.cols()) {
        throw DimensionError("svd_factored: left/right factor widths differ");
    }
    require_finite(f.left, "svd_factored");
    require_finite(f.right, "svd_factored");
    // When a factor is wider than tall the QR step is skipped (Q = I); the
    // core stays small either way.
    Matrix ql, rl, qr_, rr;
    if (f.left.cols() <= f.left.rows()) {
        std::tie(ql, rl) = thin_qr(f.left);
    } else {
        rl = f.left;
    }
    if (f.right.cols() <= f.right.rows()) {
        std::tie(qr_, rr) = thin_qr(f.right);
    } else {
        rr = f.right;
    }
    const Matrix core = rl * rr.transpose();
    SvdResult cs = svd(core, p);
    SvdResult out;
    out.sigma = std::move(cs.sigma);
    out.u = ql.size() ? Matrix(ql * cs.u) : std::move(cs.u);
    out.v = qr_.size() ? Matrix(qr_ * cs.v) : std::move(cs.v);
    return out;
}

std::pair<Matrix, std::vector<Index>> orthonormalize_with_drop(const Matrix& m, double drop_tol) {
    require_finite(m, "orthonormalize_with_drop");
    const double scale = m.norm();
    Matrix basis(m.rows(), m.cols());
    std::vector<Index> kept;
    Index nb = 0;
    for (Index j = 0; j < m.cols(); ++j) {
        Vector v = m.col(j);
        // Two projection passes keep orthogonality at machine precision.
        for (int pass = 0; pass < 2 && nb > 0; ++pass) {
            v -= basis.leftCols(nb) * (basis.leftCols(nb).transpose() * v);
        }
        const double norm = v.norm();
        if (norm > drop_tol * scale) {
            basis.col(nb++) = v / norm;
            kept.push_back(j);
        }
    }
    return {basis.leftCols(nb), std::move(kept)};
}

}  // namespace lorasub
