#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lorasub/model.hpp"

namespace lorasub {

// The four spectral shapes of the mixture matrix C observed across layers.
enum class SpectralPattern { drop_at_r, drop_beyond_r, two_drops, no_drop };

std::string to_string(SpectralPattern pattern);

struct SpectrumReport {
    LayerKey layer;
    Vector sigma;                    // full spectrum, length min(k*r, n, m)
    std::vector<double> log10_sigma;  // NaN where sigma is below the zero cutoff
    std::optional<Index> gap_index;   // 1-based count of values before the dominant drop
    SpectralPattern pattern = SpectralPattern::no_drop;
    double sigma_max = 0.0;
    double low_rank_ratio = 0.0;  // sigma_{2d} / sigma_max, 0 when 2d exceeds the spectrum
};

// Full spectrum of C with gap/pattern/low-rank annotations. r is the adapter
// rank the pattern rules compare against, d the subspace dimension for the
// low-rank ratio.
SpectrumReport spectrum(const FactoredMatrix& c, const LayerKey& layer, Index r, Index d,
                        double min_ratio = 0.1);

// Smallest 1-based index i with sigma_{i+1}/sigma_i < min_ratio, scanning
// only entries above the zero cutoff; nullopt when no such drop exists.
std::optional<Index> detect_gap(const Vector& sigma, double min_ratio = 0.1);

// All drop positions, same scan rule as detect_gap.
std::vector<Index> gap_indices(const Vector& sigma, double min_ratio = 0.1);

// drop_at_r: single gap within r +- 1. drop_beyond_r: single gap past r + 1.
// two_drops: exactly two gaps. no_drop: anything else.
SpectralPattern classify_pattern(const Vector& sigma, Index r, double min_ratio = 0.1);

// (||W||_F / ||W||_2)^2 — a smooth rank surrogate in [1, rank(W)].
double effective_rank(const Matrix& w);

enum class AllocationStrategy { uniform, importance };

// Per-layer subspace budgets. uniform: every layer gets `budget`. importance:
// d_l = budget * floor(eff_rank_l / mean eff_rank), optionally clamped from
// below (the literal formula can emit 0).
std::vector<long> allocate_ranks(const std::vector<double>& eff_ranks, long budget,
                                 AllocationStrategy strategy,
                                 std::optional<long> clamp_min = std::nullopt);

struct MagnitudePoint {
    int index = 0;
    double sigma_max = 0.0;
};

// One series per (scope, kind, attribute): sigma_max over layer index — the
// eight-panel magnitude view, four attribute curves each.
struct MagnitudeSeries {
    LayerScope scope = LayerScope::global;
    LayerKind kind = LayerKind::atten_qkv;
    Attribute attribute;
    std::vector<MagnitudePoint> points;
};

std::vector<MagnitudeSeries> magnitude_curve(const std::map<LayerKey, SharedSubspace>& subspaces);

}  // namespace lorasub
