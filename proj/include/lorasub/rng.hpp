#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "lorasub/linalg.hpp"

namespace lorasub {

// Stream splitting: the root seed is mixed once with splitmix64, then each
// path element id folds in as state = splitmix64(state ^ (GOLDEN + id)).
// Distinct paths give independent substreams; the scheme is fixed so that
// generated fixtures are reproducible.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t substream_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path);

// Standard-normal stream over mt19937_64. Uniforms come from the top 53 bits
// (bit-stable across platforms); normals use explicit Box-Muller, so they are
// stable up to libm rounding. Values fill matrices in row-major order.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : engine_(seed) {}

    double next();
    Matrix matrix(Index rows, Index cols);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace lorasub
