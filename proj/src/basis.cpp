#include "lorasub/basis.hpp"

#include <algorithm>
#include <string>

namespace lorasub {

namespace {

void require_basis_shapes(const SubspaceBasis& basis) {
    if (basis.a_bar.cols() != basis.b_bar.cols()) {
        throw DimensionError("basis sides have different column counts");
    }
}

std::vector<BasisBlock> block_ranges(const std::vector<SharedSubspace>& subspaces,
                                     const std::vector<Index>& kept, Index limit) {
    // kept is ascending over the concatenated column index; surviving columns
    // of one source stay contiguous in the output.
    std::vector<BasisBlock> blocks;
    Index source_start = 0;
    std::size_t cursor = 0;
    for (const auto& s : subspaces) {
        const Index width = s.a.cols();
        BasisBlock block{s.layer.attribute, width,
                         std::min(static_cast<Index>(cursor), limit), 0};
        while (cursor < kept.size() && static_cast<Index>(cursor) < limit &&
               kept[cursor] < source_start + width) {
            ++block.col_count;
            ++cursor;
        }
        blocks.push_back(block);
        source_start += width;
    }
    return blocks;
}

}  // namespace

SubspaceBasis assemble_basis(const std::vector<SharedSubspace>& subspaces, double drop_tol) {
    if (subspaces.empty()) throw InvalidInputError("assemble_basis: no subspaces given");
    const Index n = subspaces.front().a.rows();
    const Index m = subspaces.front().b.rows();
    Index total = 0;
    for (const auto& s : subspaces) {
        if (s.a.rows() != n || s.b.rows() != m) {
            throw DimensionError("assemble_basis: subspaces do not share (n, m)");
        }
        if (s.a.cols() != s.b.cols()) {
            throw DimensionError("assemble_basis: factor widths differ");
        }
        total += s.a.cols();
    }
    Matrix concat_a(n, total);
    Matrix concat_b(m, total);
    Index at = 0;
    for (const auto& s : subspaces) {
        concat_a.middleCols(at, s.a.cols()) = s.a;
        concat_b.middleCols(at, s.b.cols()) = s.b;
        at += s.a.cols();
    }
    auto [qa, kept_a] = orthonormalize_with_drop(concat_a, drop_tol);
    auto [qb, kept_b] = orthonormalize_with_drop(concat_b, drop_tol);
    const Index dim = std::min(qa.cols(), qb.cols());
    if (dim == 0) throw InvalidInputError("assemble_basis: all columns degenerate");

    SubspaceBasis basis;
    basis.truncated = qa.cols() != qb.cols();
    basis.a_bar = qa.leftCols(dim);
    basis.b_bar = qb.leftCols(dim);
    basis.blocks = block_ranges(subspaces, kept_a, dim);
    return basis;
}

Matrix apply_delta(const SubspaceDelta& delta, const Matrix& x) {
    require_basis_shapes(delta.basis);
    const Index dim = delta.basis.dim();
    if (delta.m.rows() != dim || delta.m.cols() != dim) {
        throw DimensionError("apply_delta: M must be " + std::to_string(dim) + "x" +
                             std::to_string(dim));
    }
    if (x.rows() != delta.basis.b_bar.rows()) {
        throw DimensionError("apply_delta: x has " + std::to_string(x.rows()) +
                             " rows, expected " + std::to_string(delta.basis.b_bar.rows()));
    }
    return delta.basis.a_bar * (delta.m * (delta.basis.b_bar.transpose() * x));
}

Matrix grad_m(const SubspaceBasis& basis, const Matrix& upstream) {
    require_basis_shapes(basis);
    if (upstream.rows() != basis.a_bar.rows() || upstream.cols() != basis.b_bar.rows()) {
        throw DimensionError("grad_m: upstream dims do not match (n, m)");
    }
    return basis.a_bar.transpose() * upstream * basis.b_bar;
}

Matrix grad_m(const SubspaceBasis& basis, const FactoredMatrix& upstream) {
    require_basis_shapes(basis);
    if (upstream.rows() != basis.a_bar.rows() || upstream.cols() != basis.b_bar.rows()) {
        throw DimensionError("grad_m: upstream dims do not match (n, m)");
    }
    return (basis.a_bar.transpose() * upstream.left) *
           (basis.b_bar.transpose() * upstream.right).transpose();
}

FitResult fit_m(const SubspaceBasis& basis, const Matrix& x, const Matrix& y, double lr,
                int steps) {
    require_basis_shapes(basis);
    if (!(lr > 0.0)) throw InvalidInputError("fit_m: lr must be positive");
    if (steps < 0) throw InvalidInputError("fit_m: steps must be non-negative");
    if (x.cols() != y.cols() || x.cols() == 0) {
        throw DimensionError("fit_m: X and Y must have the same, nonzero batch size");
    }
    if (x.rows() != basis.b_bar.rows() || y.rows() != basis.a_bar.rows()) {
        throw DimensionError("fit_m: data dims do not match the basis");
    }
    const double batch = static_cast<double>(x.cols());
    const Matrix bx = basis.b_bar.transpose() * x;  // D x N, reused every step

    FitResult result;
    result.m = Matrix::Zero(basis.dim(), basis.dim());
    auto loss_and_residual = [&](const Matrix& m, Matrix& residual) {
        residual = basis.a_bar * (m * bx) - y;
        return 0.5 * residual.squaredNorm() / batch;
    };
    Matrix residual;
    result.loss_trace.push_back(loss_and_residual(result.m, residual));
    for (int step = 0; step < steps; ++step) {
        const Matrix grad = (basis.a_bar.transpose() * residual) * bx.transpose() / batch;
        result.m -= lr * grad;
        const double loss = loss_and_residual(result.m, residual);
        if (loss > 1e12) {
            throw DivergenceError("fit_m: diverged at step " + std::to_string(step + 1), step + 1);
        }
        result.loss_trace.push_back(loss);
    }
    return result;
}

}  // namespace lorasub
