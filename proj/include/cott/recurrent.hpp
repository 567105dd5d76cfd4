#pragma once

#include <cstddef>
#include <vector>

#include "cott/config.hpp"
#include "cott/core_ops.hpp"
#include "cott/memory.hpp"
#include "cott/tensor.hpp"

namespace cott {

/// Fixed-size recurrent hidden state: the running sum of value-key outer
/// products, one (d_value x d_key) block per (batch, head), plus a token
/// counter. Its byte size is a function of the configuration only — it
/// never grows with the number of tokens consumed, which is what makes
/// constant-memory inference possible. Storage is tracked so the memory
/// benchmarks see it.
template <typename Scalar>
class RecurrentState {
public:
    /// compensated=true adds a same-sized Kahan correction buffer, for
    /// long-stream drift studies; the footprint is still independent of t.
    RecurrentState(Index batch, Index heads, Index d_value, Index d_key, bool compensated = false)
        : batch_(batch),
          heads_(heads),
          d_value_(d_value),
          d_key_(d_key),
          buf_(static_cast<std::size_t>(batch * heads * d_value * d_key), Scalar(0)),
          comp_(compensated ? buf_.size() : 0, Scalar(0)) {
        if (batch < 1 || heads < 1 || d_value < 1 || d_key < 1)
            throw ShapeError("recurrent state: all dimensions must be >= 1");
    }

    Index batch() const { return batch_; }
    Index heads() const { return heads_; }
    Index d_value() const { return d_value_; }
    Index d_key() const { return d_key_; }
    Index tokens_seen() const { return t_; }
    bool compensated() const { return !comp_.empty(); }
    std::size_t byte_size() const { return (buf_.size() + comp_.size()) * sizeof(Scalar); }

    Eigen::Map<RowMatrix<Scalar>> block(Index n, Index h) {
        return {buf_.data() + (n * heads_ + h) * d_value_ * d_key_, d_value_, d_key_};
    }
    Eigen::Map<const RowMatrix<Scalar>> block(Index n, Index h) const {
        return {buf_.data() + (n * heads_ + h) * d_value_ * d_key_, d_value_, d_key_};
    }

    void bump_token_counter() { ++t_; }

    /// Kahan-compensated elementwise add into block (n, h).
    void add_compensated(Index n, Index h, Index i, Index j, Scalar term) {
        const std::size_t idx =
            static_cast<std::size_t>(((n * heads_ + h) * d_value_ + i) * d_key_ + j);
        const Scalar y = term - comp_[idx];
        const Scalar t = buf_[idx] + y;
        comp_[idx] = (t - buf_[idx]) - y;
        buf_[idx] = t;
    }

private:
    Index batch_, heads_, d_value_, d_key_;
    Index t_ = 0;
    memory::TrackedVector<Scalar> buf_;
    memory::TrackedVector<Scalar> comp_;
};

/// Zero state, token counter zero.
template <typename Scalar>
RecurrentState<Scalar> state_init(const AttentionConfig<Scalar>& cfg, bool compensated = false) {
    cfg.validate();
    return RecurrentState<Scalar>(cfg.batch, cfg.heads, cfg.d_value, cfg.d_key, compensated);
}

/// In-place update: adds the outer product v_t k_t^T to every (batch, head)
/// block and advances the token counter. k_t and v_t are one token's rows,
/// shaped (batch, heads, d_key) and (batch, heads, d_value).
template <typename Scalar>
void state_update(RecurrentState<Scalar>& state, const Tensor<Scalar>& k_t, const Tensor<Scalar>& v_t) {
    if (k_t.rank() != 3 || k_t.dim(0) != state.batch() || k_t.dim(1) != state.heads() ||
        k_t.dim(2) != state.d_key())
        throw ShapeError("state_update: k_t must have shape (batch, heads, d_key)");
    if (v_t.rank() != 3 || v_t.dim(0) != state.batch() || v_t.dim(1) != state.heads() ||
        v_t.dim(2) != state.d_value())
        throw ShapeError("state_update: v_t must have shape (batch, heads, d_value)");

    for (Index n = 0; n < state.batch(); ++n) {
        for (Index h = 0; h < state.heads(); ++h) {
            Eigen::Map<const Vector<Scalar>> k(k_t.data() + (n * state.heads() + h) * state.d_key(),
                                               state.d_key());
            Eigen::Map<const Vector<Scalar>> v(v_t.data() + (n * state.heads() + h) * state.d_value(),
                                               state.d_value());
            if (state.compensated()) {
                for (Index i = 0; i < state.d_value(); ++i)
                    for (Index j = 0; j < state.d_key(); ++j) state.add_compensated(n, h, i, j, v[i] * k[j]);
            } else {
                state.block(n, h).noalias() += v * k.transpose();
            }
        }
    }
    state.bump_token_counter();
}

/// Copy-on-update variant for property tests that need the old state.
template <typename Scalar>
RecurrentState<Scalar> state_updated(const RecurrentState<Scalar>& state, const Tensor<Scalar>& k_t,
                                     const Tensor<Scalar>& v_t) {
    RecurrentState<Scalar> next = state;
    state_update(next, k_t, v_t);
    return next;
}

/// Readout: contracts each (batch, head) state block with the query over
/// the key dimension, yielding that token's attention output.
template <typename Scalar>
Tensor<Scalar> state_readout(const RecurrentState<Scalar>& state, const Tensor<Scalar>& q_t) {
    if (q_t.rank() != 3 || q_t.dim(0) != state.batch() || q_t.dim(1) != state.heads() ||
        q_t.dim(2) != state.d_key())
        throw ShapeError("state_readout: q_t must have shape (batch, heads, d_key)");

    Tensor<Scalar> out({state.batch(), state.heads(), state.d_value()});
    for (Index n = 0; n < state.batch(); ++n) {
        for (Index h = 0; h < state.heads(); ++h) {
            Eigen::Map<const Vector<Scalar>> q(q_t.data() + (n * state.heads() + h) * state.d_key(),
                                               state.d_key());
            Eigen::Map<Vector<Scalar>> o(out.data() + (n * state.heads() + h) * state.d_value(),
                                         state.d_value());
            o.noalias() = state.block(n, h) * q;
        }
    }
    return out;
}

namespace detail {

/// One streaming step over raw inputs: normalize the token's q/k rows,
/// stabilize its v row, update the state, read out. All temporaries are
/// token-sized; nothing scales with the sequence.
template <typename Scalar>
void stream_step(RecurrentState<Scalar>& state, const Tensor<Scalar>& q, const Tensor<Scalar>& k,
                 const Tensor<Scalar>& v, const AttentionConfig<Scalar>& cfg, StabMode mode, Index t,
                 Tensor<Scalar>& out) {
    const Index heads = cfg.heads;
    const Index dk = cfg.d_key;
    const Index dv = cfg.d_value;
    const Index s = cfg.seq_len;

    memory::TrackedVector<Scalar> step_buf(static_cast<std::size_t>(dk + dv));
    for (Index n = 0; n < cfg.batch; ++n) {
        for (Index h = 0; h < heads; ++h) {
            const Index row = ((n * heads + h) * s + t);
            Eigen::Map<const Vector<Scalar>> q_row(q.data() + row * dk, dk);
            Eigen::Map<const Vector<Scalar>> k_row(k.data() + row * dk, dk);
            Eigen::Map<const Vector<Scalar>> v_row(v.data() + row * dv, dv);

            Eigen::Map<Vector<Scalar>> kn(step_buf.data(), dk);
            Eigen::Map<Vector<Scalar>> vs(step_buf.data() + dk, dv);
            kn = k_row / std::max(k_row.norm(), cfg.eps_norm);
            const Scalar len = mode == StabMode::Fixed ? static_cast<Scalar>(s) : static_cast<Scalar>(t + 1);
            vs = v_row / std::pow(len, sigmoid(cfg.m[static_cast<std::size_t>(h)]));

            state.block(n, h).noalias() += vs * kn.transpose();

            // Reuse the k slot for the normalized query; k is already consumed.
            kn = q_row / std::max(q_row.norm(), cfg.eps_norm);
            Eigen::Map<Vector<Scalar>> o_row(out.data() + row * dv, dv);
            o_row.noalias() = state.block(n, h) * kn;
        }
    }
    state.bump_token_counter();
}

}  // namespace detail

/// Streams a full sequence through the recurrent formulation: per token,
/// normalize, stabilize, update the state, read out. Normalization and
/// stabilization happen internally so the result matches the batch causal
/// path on the same raw inputs (in Fixed mode). When step_peaks is given,
/// the tracked peak is reset before every step and recorded after it.
template <typename Scalar>
Tensor<Scalar> stream_sequence(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                               const AttentionConfig<Scalar>& cfg, StabMode mode = StabMode::Fixed,
                               std::vector<std::size_t>* step_peaks = nullptr) {
    cfg.validate();
    detail::require_per_head_shapes(q, k, v, cfg, "stream_sequence");

    Tensor<Scalar> out(v.shape());
    RecurrentState<Scalar> state = state_init(cfg);
    for (Index t = 0; t < cfg.seq_len; ++t) {
        if (step_peaks) memory::reset_peak();
        detail::stream_step(state, q, k, v, cfg, mode, t, out);
        if (step_peaks) step_peaks->push_back(memory::peak_bytes());
    }
    return out;
}

}  // namespace cott
