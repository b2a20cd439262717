#pragma once

#include <cstdint>
#include <utility>

#include <nlohmann/json.hpp>

#include "lorasub/model.hpp"

namespace lorasub {

// Recipe for an ensemble with a planted shared subspace. Inlier adapter i is
// A_i = [A* diag(sigma)^1/2 | gamma * N_i^A], B_i = [B* diag(sigma)^1/2 | N_i^B]
// with the noise product rescaled to unit Frobenius norm before gamma, so
// A_i B_i^T = S* + gamma * (unit-norm noise) exactly. The trailing `outliers`
// adapters are fresh random rank-r pairs scaled to outlier_scale * ||S*||_F.
struct PlantedSpec {
    Index n = 128;
    Index m = 96;
    Index k = 10;       // adapter count, outliers included
    Index r = 16;       // adapter rank
    Index s = 8;        // shared dimension, s <= r
    Vector shared_sigma;  // length s, positive descending; empty -> linspace 1.0 .. 0.5
    double noise_gamma = 0.0;
    Index outliers = 0;
    double outlier_scale = 10.0;
    std::uint64_t seed = 0;
    LayerKey layer{Attribute::texture(), LayerScope::global, LayerKind::atten_qkv, 1};

    void validate() const;
    Vector resolved_sigma() const;
};

struct PlantedEnsemble {
    LoraEnsemble ensemble;   // single layer, k adapters
    SharedSubspace truth;    // canonical (A* S^1/2, B* S^1/2, sigma)
};

// Bit-reproducible per seed; one RNG substream per adapter and per factor
// block (see rng.hpp for the splitting scheme).
PlantedEnsemble generate_planted(const PlantedSpec& spec);

// Two ensembles over one jointly drawn orthonormal frame whose planted
// subspaces share exactly shared_dims directions (0 = mutually orthogonal).
// Both take the base spec's dims/noise; layers differ only in attribute.
std::pair<PlantedEnsemble, PlantedEnsemble> generate_planted_pair(const PlantedSpec& base,
                                                                  Index shared_dims,
                                                                  const Attribute& attr_a,
                                                                  const Attribute& attr_b);

// Overlap distance of the extracted subspace to the planted truth: 0 is
// perfect containment of a shared direction, 1 is orthogonality.
double recovery_error(const SharedSubspace& extracted, const SharedSubspace& truth);

}  // namespace lorasub
