#pragma once

#include <algorithm>

#include "cott/config.hpp"
#include "cott/core_ops.hpp"
#include "cott/memory.hpp"
#include "cott/tensor.hpp"

namespace cott {

/// Multiplicative causal mask semantics. Inclusive keeps the diagonal
/// (each token attends to itself). StrictBelow drops it; it exists only
/// as a fault-injection hook for the verification suite.
enum class CausalMaskKind { Inclusive, StrictBelow };

/// Quadratic causal reference: materializes the (s x s) score matrix,
/// zeroes everything above the diagonal, multiplies by V. Inputs are
/// expected already normalized and stabilized; this computes
/// (Q K^T .* M) V literally and serves as the correctness oracle for the
/// linear-memory paths.
template <typename Scalar>
Tensor<Scalar> causal_oracle(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                             const AttentionConfig<Scalar>& cfg,
                             CausalMaskKind mask = CausalMaskKind::Inclusive) {
    cfg.validate();
    detail::require_per_head_shapes(q, k, v, cfg, "causal_oracle");

    const Index s = cfg.seq_len;
    Tensor<Scalar> out(v.shape());
    memory::TrackedVector<Scalar> buf(static_cast<std::size_t>(s * s));
    Eigen::Map<RowMatrix<Scalar>> scores(buf.data(), s, s);

    const Index keep_from = mask == CausalMaskKind::Inclusive ? 1 : 0;
    for (Index o = 0; o < q.outer_count(); ++o) {
        scores.noalias() = q.mat(o) * k.mat(o).transpose();
        for (Index i = 0; i < s; ++i)
            for (Index j = i + keep_from; j < s; ++j) scores(i, j) = Scalar(0);
        out.mat(o).noalias() = scores * v.mat(o);
    }
    return out;
}

namespace detail {

/// Chunked workspace for one (batch, head) scan: a running (d_value x d_key)
/// accumulator plus one chunk of per-position partial sums. Its size depends
/// on (chunk_len, d_value, d_key) only, never on the sequence length — that
/// is the linear-memory property the benchmarks verify.
template <typename Scalar>
struct ScanWorkspace {
    ScanWorkspace(Index chunk_len, Index d_value, Index d_key)
        : chunk_len(chunk_len),
          d_value(d_value),
          d_key(d_key),
          acc_buf(static_cast<std::size_t>(d_value * d_key)),
          partial_buf(static_cast<std::size_t>(chunk_len * d_value * d_key)),
          out_tmp(static_cast<std::size_t>(std::max(d_value, d_key))) {}

    Eigen::Map<RowMatrix<Scalar>> acc() { return {acc_buf.data(), d_value, d_key}; }
    Eigen::Map<RowMatrix<Scalar>> partial(Index i) {
        return {partial_buf.data() + i * d_value * d_key, d_value, d_key};
    }
    Eigen::Map<Vector<Scalar>> tmp(Index n) { return {out_tmp.data(), n}; }

    void reset() {
        std::fill(acc_buf.begin(), acc_buf.end(), Scalar(0));
    }

    Index chunk_len, d_value, d_key;
    memory::TrackedVector<Scalar> acc_buf;
    memory::TrackedVector<Scalar> partial_buf;
    memory::TrackedVector<Scalar> out_tmp;
};

}  // namespace detail

/// Linear-memory causal forward. Walks the sequence chunk by chunk,
/// materializing the value-key outer-product cumulative sum only for the
/// positions of the current chunk on top of a running accumulator:
///
///   out[t] = (acc_before_chunk + partial[t]) * q[t],
///   partial[t] = sum of v[tau] k[tau]^T over tau in the chunk, tau <= t.
///
/// Peak auxiliary memory is (chunk_len + 1) * d_value * d_key elements,
/// independent of the sequence length. Results match causal_oracle and are
/// independent of chunk_len.
template <typename Scalar>
Tensor<Scalar> causal_linear_forward(const Tensor<Scalar>& q, const Tensor<Scalar>& k,
                                     const Tensor<Scalar>& v, const AttentionConfig<Scalar>& cfg,
                                     Index chunk_len = 128) {
    cfg.validate();
    detail::require_per_head_shapes(q, k, v, cfg, "causal_linear_forward");
    if (chunk_len < 1) throw DomainError("causal_linear_forward: chunk_len must be >= 1");

    const Index s = cfg.seq_len;
    const Index dk = cfg.d_key;
    const Index dv = cfg.d_value;
    Tensor<Scalar> out(v.shape());
    detail::ScanWorkspace<Scalar> ws(std::min(chunk_len, s), dv, dk);

    for (Index o = 0; o < q.outer_count(); ++o) {
        auto qm = q.mat(o);
        auto km = k.mat(o);
        auto vm = v.mat(o);
        auto om = out.mat(o);
        ws.reset();
        auto acc = ws.acc();
        for (Index c0 = 0; c0 < s; c0 += ws.chunk_len) {
            const Index len = std::min(ws.chunk_len, s - c0);
            for (Index i = 0; i < len; ++i) {
                auto p = ws.partial(i);
                p.noalias() = vm.row(c0 + i).transpose() * km.row(c0 + i);
                if (i > 0) p += ws.partial(i - 1);
            }
            for (Index i = 0; i < len; ++i) {
                auto o_t = ws.tmp(dv);
                o_t.noalias() = acc * qm.row(c0 + i).transpose();
                o_t.noalias() += ws.partial(i) * qm.row(c0 + i).transpose();
                om.row(c0 + i) = o_t.transpose();
            }
            acc += ws.partial(len - 1);
        }
    }
    return out;
}

template <typename Scalar>
struct CausalGradients {
    Tensor<Scalar> dq, dk, dv;
};

/// Manual backward pass for the masked product O = (Q K^T .* M) V:
///
///   dQ = (G V^T .* M) K        — forward-direction scan over v k^T
///   dK = (G V^T .* M)^T Q      — reverse-direction scan over g q^T
///   dV = (Q K^T .* M)^T G      — same reverse scan, contracted with K
///
/// Both scans use the same chunked workspace as the forward pass; the
/// reverse scan accumulates from the end of the sequence.
template <typename Scalar>
CausalGradients<Scalar> causal_backward(const Tensor<Scalar>& q, const Tensor<Scalar>& k,
                                        const Tensor<Scalar>& v, const Tensor<Scalar>& g,
                                        const AttentionConfig<Scalar>& cfg, Index chunk_len = 128) {
    cfg.validate();
    detail::require_per_head_shapes(q, k, v, cfg, "causal_backward");
    if (g.shape() != v.shape()) throw ShapeError("causal_backward: G must match the forward output shape");
    if (chunk_len < 1) throw DomainError("causal_backward: chunk_len must be >= 1");

    const Index s = cfg.seq_len;
    const Index dk_dim = cfg.d_key;
    const Index dv_dim = cfg.d_value;
    CausalGradients<Scalar> grads{Tensor<Scalar>(q.shape()), Tensor<Scalar>(k.shape()),
                                  Tensor<Scalar>(v.shape())};
    detail::ScanWorkspace<Scalar> ws(std::min(chunk_len, s), dv_dim, dk_dim);

    for (Index o = 0; o < q.outer_count(); ++o) {
        auto qm = q.mat(o);
        auto km = k.mat(o);
        auto vm = v.mat(o);
        auto gm = g.mat(o);

        // dQ[t] = cumsum(v k^T)[t]^T g[t]; same scan direction as forward.
        ws.reset();
        auto acc = ws.acc();
        auto dqm = grads.dq.mat(o);
        for (Index c0 = 0; c0 < s; c0 += ws.chunk_len) {
            const Index len = std::min(ws.chunk_len, s - c0);
            for (Index i = 0; i < len; ++i) {
                auto p = ws.partial(i);
                p.noalias() = vm.row(c0 + i).transpose() * km.row(c0 + i);
                if (i > 0) p += ws.partial(i - 1);
            }
            for (Index i = 0; i < len; ++i) {
                auto d_t = ws.tmp(dk_dim);
                d_t.noalias() = acc.transpose() * gm.row(c0 + i).transpose();
                d_t.noalias() += ws.partial(i).transpose() * gm.row(c0 + i).transpose();
                dqm.row(c0 + i) = d_t.transpose();
            }
            acc += ws.partial(len - 1);
        }

        // dK[t] = revsum(g q^T)[t]^T v[t], dV[t] = revsum(g q^T)[t] k[t];
        // the cumulative sum runs backward, accumulating from the end.
        ws.reset();
        auto dkm = grads.dk.mat(o);
        auto dvm = grads.dv.mat(o);
        for (Index c1 = s; c1 > 0;) {
            const Index len = std::min(ws.chunk_len, c1);
            const Index c0 = c1 - len;
            for (Index i = len - 1; i >= 0; --i) {
                auto p = ws.partial(i);
                p.noalias() = gm.row(c0 + i).transpose() * qm.row(c0 + i);
                if (i + 1 < len) p += ws.partial(i + 1);
            }
            for (Index i = 0; i < len; ++i) {
                auto dk_t = ws.tmp(dk_dim);
                dk_t.noalias() = acc.transpose() * vm.row(c0 + i).transpose();
                dk_t.noalias() += ws.partial(i).transpose() * vm.row(c0 + i).transpose();
                dkm.row(c0 + i) = dk_t.transpose();

                auto dv_t = ws.tmp(dv_dim);
                dv_t.noalias() = acc * km.row(c0 + i).transpose();
                dv_t.noalias() += ws.partial(i) * km.row(c0 + i).transpose();
                dvm.row(c0 + i) = dv_t.transpose();
            }
            acc += ws.partial(0);
            c1 = c0;
        }
    }
    return grads;
}

}  // namespace cott
