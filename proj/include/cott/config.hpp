#pragma once

#include <cmath>
#include <vector>

#include "cott/errors.hpp"
#include "cott/tensor.hpp"

namespace cott {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// How the value-stabilization divisor treats sequence length: a single
/// full-sequence length for every position (the default), or the growing
/// per-position token count (position t divides by (t+1)^sigmoid(m)).
/// The two are not equivalent; only the fixed mode matches the batch path.
enum class StabMode { Fixed, Growing };

/// Per-head attention geometry plus the stabilization exponents.
/// d_key and d_value are per-head dimensions.
template <typename Scalar>
struct AttentionConfig {
    Index batch = 1;
    Index heads = 1;
    Index seq_len = 1;
    Index d_key = 1;
    Index d_value = 1;
    std::vector<Scalar> m;        // one stabilization exponent per head
    Scalar eps_norm = Scalar(1e-12);

    static AttentionConfig make(Index batch, Index heads, Index seq_len, Index d_key, Index d_value,
                                Scalar m_init = Scalar(0.5)) {
        AttentionConfig cfg;
        cfg.batch = batch;
        cfg.heads = heads;
        cfg.seq_len = seq_len;
        cfg.d_key = d_key;
        cfg.d_value = d_value;
        cfg.m.assign(static_cast<std::size_t>(heads > 0 ? heads : 0), m_init);
        cfg.validate();
        return cfg;
    }

    void validate() const {
        if (batch < 1 || heads < 1 || seq_len < 1 || d_key < 1 || d_value < 1)
            throw ShapeError("attention config: all dimensions must be >= 1");
        if (static_cast<Index>(m.size()) != heads)
            throw ShapeError("attention config: need exactly one m per head");
        if (!(eps_norm > Scalar(0))) throw DomainError("attention config: eps_norm must be positive");
        for (Scalar v : m)
            if (!std::isfinite(v)) throw NumericError("attention config: m must be finite");
    }

    Shape qk_shape() const { return {batch, heads, seq_len, d_key}; }
    Shape v_shape() const { return {batch, heads, seq_len, d_value}; }
};

}  // namespace cott
