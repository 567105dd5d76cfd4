#pragma once

#include <cstdint>
#include <random>

#include "cott/config.hpp"
#include "cott/random.hpp"
#include "cott/tensor.hpp"

namespace cott {

/// One randomized attention problem: dimensions drawn from fixed ranges
/// (batch/heads 1-4, seq 1-64, d_key/d_value 1-16) plus matching
/// Gaussian Q, K, V. Instance k of a run is fully determined by
/// (seed, k), so verification sweeps are reproducible.
template <typename Scalar>
struct Instance {
    AttentionConfig<Scalar> cfg;
    Tensor<Scalar> q, k, v;
};

template <typename Scalar>
Instance<Scalar> make_instance(std::uint64_t seed, std::uint64_t index) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + index);
    const Index batch = random_index(rng, 1, 4);
    const Index heads = random_index(rng, 1, 4);
    const Index seq = random_index(rng, 1, 64);
    const Index d_key = random_index(rng, 1, 16);
    const Index d_value = random_index(rng, 1, 16);

    Instance<Scalar> inst;
    inst.cfg = AttentionConfig<Scalar>::make(batch, heads, seq, d_key, d_value);
    inst.q = random_normal<Scalar>(inst.cfg.qk_shape(), rng());
    inst.k = random_normal<Scalar>(inst.cfg.qk_shape(), rng());
    inst.v = random_normal<Scalar>(inst.cfg.v_shape(), rng());
    return inst;
}

}  // namespace cott
