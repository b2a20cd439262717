#include "lorasub/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lorasub {

namespace {

void require_spectrum(const Vector& sigma) {
    if (sigma.size() == 0) throw InvalidInputError("empty singular value list");
    if (!sigma.allFinite() || (sigma.array() < 0.0).any()) {
        throw InvalidInputError("singular values must be finite and non-negative");
    }
    for (Index i = 0; i + 1 < sigma.size(); ++i) {
        if (sigma(i + 1) > sigma(i)) {
            throw InvalidInputError("singular values must be non-increasing");
        }
    }
}

}  // namespace

std::string to_string(SpectralPattern pattern) {
    switch (pattern) {
        case SpectralPattern::drop_at_r: return "drop_at_r";
        case SpectralPattern::drop_beyond_r: return "drop_beyond_r";
        case SpectralPattern::two_drops: return "two_drops";
        case SpectralPattern::no_drop: return "no_drop";
    }
    return {};
}

std::vector<Index> gap_indices(const Vector& sigma, double min_ratio) {
    require_spectrum(sigma);
    const double cutoff = kSingularValueCutoff * sigma(0);
    std::vector<Index> gaps;
    for (Index i = 0; i + 1 < sigma.size(); ++i) {
        if (sigma(i) <= cutoff) break;  // remainder is numerically zero
        if (sigma(i + 1) < min_ratio * sigma(i)) gaps.push_back(i + 1);
    }
    return gaps;
}

std::optional<Index> detect_gap(const Vector& sigma, double min_ratio) {
    const auto gaps = gap_indices(sigma, min_ratio);
    if (gaps.empty()) return std::nullopt;
    return gaps.front();
}

SpectralPattern classify_pattern(const Vector& sigma, Index r, double min_ratio) {
    const auto gaps = gap_indices(sigma, min_ratio);
    if (gaps.size() == 2) return SpectralPattern::two_drops;
    if (gaps.size() == 1) {
        if (std::abs(gaps[0] - r) <= 1) return SpectralPattern::drop_at_r;
        if (gaps[0] > r + 1) return SpectralPattern::drop_beyond_r;
    }
    return SpectralPattern::no_drop;
}

SpectrumReport spectrum(const FactoredMatrix& c, const LayerKey& layer, Index r, Index d,
                        double min_ratio) {
    if (r < 1 || d < 1) throw InvalidInputError("spectrum: r and d must be >= 1");
    const Index p = std::min({c.rows(), c.cols(), c.factor_cols()});
    SvdResult dec = svd_factored(c, p);

    SpectrumReport report;
    report.layer = layer;
    report.sigma = std::move(dec.sigma);
    report.sigma_max = report.sigma(0);

    const double cutoff = kSingularValueCutoff * report.sigma_max;
    report.log10_sigma.resize(static_cast<std::size_t>(report.sigma.size()));
    for (Index i = 0; i < report.sigma.size(); ++i) {
        report.log10_sigma[static_cast<std::size_t>(i)] =
            report.sigma(i) > cutoff ? std::log10(report.sigma(i))
                                     : std::numeric_limits<double>::quiet_NaN();
    }
    report.gap_index = detect_gap(report.sigma, min_ratio);
    report.pattern = classify_pattern(report.sigma, r, min_ratio);
    if (2 * d <= report.sigma.size() && report.sigma_max > 0.0) {
        report.low_rank_ratio = report.sigma(2 * d - 1) / report.sigma_max;
    }
    return report;
}

double effective_rank(const Matrix& w) {
    if (!w.allFinite()) throw InvalidInputError("effective_rank: non-finite entries");
    const double frob = w.norm();
    if (frob == 0.0) throw InvalidInputError("effective_rank: zero matrix");
    Eigen::BDCSVD<Matrix> dec(w);
    const double spectral = dec.singularValues()(0);
    return (frob / spectral) * (frob / spectral);
}

std::vector<long> allocate_ranks(const std::vector<double>& eff_ranks, long budget,
                                 AllocationStrategy strategy, std::optional<long> clamp_min) {
    if (eff_ranks.empty()) throw InvalidInputError("allocate_ranks: no layers given");
    if (budget < 1) throw InvalidInputError("allocate_ranks: budget must be >= 1");
    for (double er : eff_ranks) {
        if (!(er > 0.0) || !std::isfinite(er)) {
            throw InvalidInputError("allocate_ranks: effective ranks must be positive");
        }
    }
    std::vector<long> out(eff_ranks.size(), budget);
    if (strategy == AllocationStrategy::importance) {
        double avg = 0.0;
        for (double er : eff_ranks) avg += er;
        avg /= static_cast<double>(eff_ranks.size());
        for (std::size_t i = 0; i < eff_ranks.size(); ++i) {
            out[i] = budget * static_cast<long>(std::floor(eff_ranks[i] / avg));
        }
    }
    if (clamp_min) {
        for (auto& v : out) v = std::max(v, *clamp_min);
    }
    return out;
}

std::vector<MagnitudeSeries> magnitude_curve(
    const std::map<LayerKey, SharedSubspace>& subspaces) {
    // LayerKey ordering is (attribute, scope, kind, index); regroup into the
    // panel order (scope, kind) with one attribute series each.
    std::map<std::tuple<LayerScope, LayerKind, Attribute>, std::vector<MagnitudePoint>> grouped;
    for (const auto& [key, subspace] : subspaces) {
        const double top = subspace.sigma.size() ? subspace.sigma(0) : 0.0;
        grouped[{key.scope, key.kind, key.attribute}].push_back({key.index, top});
    }
    std::vector<MagnitudeSeries> out;
    for (auto& [group, points] : grouped) {
        std::sort(points.begin(), points.end(),
                  [](const MagnitudePoint& x, const MagnitudePoint& y) { return x.index < y.index; });
        out.push_back({std::get<0>(group), std::get<1>(group), std::get<2>(group),
                       std::move(points)});
    }
    return out;
}

}  // namespace lorasub
