#pragma once

#include <cstdint>
#include <random>

#include "cott/tensor.hpp"

namespace cott {

/// Deterministic standard-normal fill. Same seed, same tensor.
template <typename Scalar>
Tensor<Scalar> random_normal(Shape shape, std::uint64_t seed, double stddev = 1.0) {
    Tensor<Scalar> out(std::move(shape));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, stddev);
    for (Index i = 0; i < out.size(); ++i) out[i] = static_cast<Scalar>(dist(rng));
    return out;
}

/// Uniform integer in [lo, hi], inclusive.
inline Index random_index(std::mt19937_64& rng, Index lo, Index hi) {
    std::uniform_int_distribution<Index> dist(lo, hi);
    return dist(rng);
}

}  // namespace cott
