#include "lorasub/orthogonality.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lorasub {

namespace {

bool is_canonical(const Matrix& a, const Matrix& b, const Vector& sigma) {
    if (a.cols() != b.cols() || sigma.size() != a.cols()) return false;
    const Matrix ga = a.transpose() * a;
    const Matrix gb = b.transpose() * b;
    const double scale = std::max({ga.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff(), 1e-300});
    const double tol = 1e-8 * scale;
    return (ga - Matrix(sigma.asDiagonal())).cwiseAbs().maxCoeff() <= tol &&
           (gb - Matrix(sigma.asDiagonal())).cwiseAbs().maxCoeff() <= tol;
}

// Columns whose singular value is below the zero cutoff carry no update mass;
// they are removed before the pencil is built so a zero column cannot
// masquerade as a shared direction.
Matrix live_columns(const Matrix& a, const Vector& sigma) {
    const double cutoff = sigma.size() ? kSingularValueCutoff * sigma.maxCoeff() : 0.0;
    Index live = 0;
    for (Index j = 0; j < sigma.size(); ++j) {
        if (sigma(j) > cutoff) ++live;
    }
    Matrix out(a.rows(), live);
    Index at = 0;
    for (Index j = 0; j < sigma.size(); ++j) {
        if (sigma(j) > cutoff) out.col(at++) = a.col(j);
    }
    return out;
}

}  // namespace

CanonicalPair canonicalize(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("canonicalize: factor widths differ");
    }
    const Index d = a.cols();
    if (d < 1 || d > std::min(a.rows(), b.rows())) {
        throw DimensionError("canonicalize: d out of range [1, min(n, m)]");
    }
    SvdResult dec = svd_factored({a, b}, d);
    CanonicalPair out;
    out.sigma = dec.sigma;
    const double cutoff = kSingularValueCutoff * dec.sigma(0);
    out.a = Matrix::Zero(a.rows(), d);
    out.b = Matrix::Zero(b.rows(), d);
    for (Index j = 0; j < d; ++j) {
        if (dec.sigma(j) <= cutoff) {
            out.sigma(j) = 0.0;
            continue;
        }
        const double root = std::sqrt(dec.sigma(j));
        out.a.col(j) = dec.u.col(j) * root;
        out.b.col(j) = dec.v.col(j) * root;
    }
    return out;
}

OverlapReport subspace_overlap(const SharedSubspace& s1, const SharedSubspace& s2,
                               double threshold) {
    if (s1.a.rows() != s2.a.rows() || s1.b.rows() != s2.b.rows()) {
        throw DimensionError("subspace_overlap: subspaces do not share (n, m)");
    }
    CanonicalPair c1, c2;
    if (is_canonical(s1.a, s1.b, s1.sigma)) {
        c1 = {s1.a, s1.b, s1.sigma};
    } else {
        c1 = canonicalize(s1.a, s1.b);
    }
    if (is_canonical(s2.a, s2.b, s2.sigma)) {
        c2 = {s2.a, s2.b, s2.sigma};
    } else {
        c2 = canonicalize(s2.a, s2.b);
    }

    // With S = a b^T canonical, b^T x sweeps all of R^d as x sweeps R^m, so
    // substituting y = b^T x turns the ratio ||S x - S' x'||^2 /
    // (||S x||^2 + ||S' x'||^2) into a quotient of the 2d x 2d pencil
    //   [ a^T a   -a^T a' ]          [ a^T a      0    ]
    //   [ -a'^T a  a'^T a' ] y = lam [   0     a'^T a' ] y,
    // the factored realization of the S^T S / S^T S' Gram blocks.
    const Matrix a1 = live_columns(c1.a, c1.sigma);
    const Matrix a2 = live_columns(c2.a, c2.sigma);
    const Index d1 = a1.cols();
    const Index d2 = a2.cols();
    if (d1 + d2 == 0) {
        throw InvalidInputError("subspace_overlap: both subspaces are zero");
    }
    Matrix pencil = Matrix::Zero(d1 + d2, d1 + d2);
    Matrix rhs = Matrix::Zero(d1 + d2, d1 + d2);
    pencil.topLeftCorner(d1, d1) = a1.transpose() * a1;
    pencil.bottomRightCorner(d2, d2) = a2.transpose() * a2;
    pencil.topRightCorner(d1, d2) = -(a1.transpose() * a2);
    pencil.bottomLeftCorner(d2, d1) = pencil.topRightCorner(d1, d2).transpose();
    rhs.topLeftCorner(d1, d1) = pencil.topLeftCorner(d1, d1);
    rhs.bottomRightCorner(d2, d2) = pencil.bottomRightCorner(d2, d2);

    GenEigResult eig = gen_eig_smallest(pencil, rhs, d1 + d2);

    OverlapReport report;
    report.layer_a = s1.layer;
    report.layer_b = s2.layer;
    report.lambdas_raw = eig.lambdas;
    report.lambdas = eig.lambdas.cwiseMax(0.0).cwiseMin(1.0);
    report.min_lambda = report.lambdas(0);
    report.threshold = threshold;
    report.disentangled = report.min_lambda >= threshold;
    report.delta = eig.delta;
    return report;
}

std::vector<OverlapReport> pairwise_overlap(const std::vector<SharedSubspace>& subspaces,
                                            double threshold) {
    std::map<LayerSite, std::vector<const SharedSubspace*>> groups;
    for (const auto& s : subspaces) {
        groups[s.layer.site()].push_back(&s);
    }
    std::vector<OverlapReport> reports;
    for (auto& [site, members] : groups) {
        std::sort(members.begin(), members.end(), [](const auto* x, const auto* y) {
            return x->layer.attribute < y->layer.attribute;
        });
        for (std::size_t i = 0; i < members.size(); ++i) {
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                if (members[i]->layer.attribute == members[j]->layer.attribute) continue;
                reports.push_back(subspace_overlap(*members[i], *members[j], threshold));
            }
        }
    }
    return reports;
}

}  // namespace lorasub
