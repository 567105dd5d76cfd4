#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cott/config.hpp"
#include "cott/memory.hpp"
#include "cott/tensor.hpp"

namespace cott {

namespace detail {

template <typename Scalar>
void require_per_head_shapes(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                             const AttentionConfig<Scalar>& cfg, const char* who) {
    if (q.shape() != cfg.qk_shape() || k.shape() != cfg.qk_shape() || v.shape() != cfg.v_shape())
        throw ShapeError(std::string(who) + ": tensor shapes do not match the attention config");
}

}  // namespace detail

/// Divides every row vector (the trailing dimension) by max(norm, eps).
/// Rows of norm <= eps shrink toward zero instead of erroring, so
/// padding-zeroed rows pass through harmlessly.
template <typename Scalar>
Tensor<Scalar> l2_normalize_rows(const Tensor<Scalar>& x, Scalar eps) {
    if (!(eps > Scalar(0))) throw DomainError("l2_normalize_rows: eps must be positive");
    Tensor<Scalar> out(x.shape());
    const Index d = x.shape().back();
    const Index rows = x.size() / d;
    for (Index r = 0; r < rows; ++r) {
        Eigen::Map<const Vector<Scalar>> src(x.data() + r * d, d);
        Eigen::Map<Vector<Scalar>> dst(out.data() + r * d, d);
        const Scalar n = src.norm();
        dst = src / std::max(n, eps);
    }
    return out;
}

/// Pairwise cosine of the angle between rows of Q and rows of K.
/// Output shape is the shared leading dims plus (rows(Q), rows(K));
/// every entry lies in [-1, 1] up to rounding.
template <typename Scalar>
Tensor<Scalar> cosine_similarity(const Tensor<Scalar>& q, const Tensor<Scalar>& k, Scalar eps) {
    if (q.rank() < 2 || k.rank() < 2) throw ShapeError("cosine_similarity: inputs must have rank >= 2");
    if (q.rank() != k.rank()) throw ShapeError("cosine_similarity: rank mismatch");
    if (q.shape().back() != k.shape().back())
        throw ShapeError("cosine_similarity: trailing dimensions differ");
    for (int i = 0; i + 2 < q.rank(); ++i)
        if (q.dim(i) != k.dim(i)) throw ShapeError("cosine_similarity: leading dimensions differ");

    const Tensor<Scalar> nq = l2_normalize_rows(q, eps);
    const Tensor<Scalar> nk = l2_normalize_rows(k, eps);

    Shape out_shape(q.shape().begin(), q.shape().end() - 1);
    out_shape.push_back(k.dim(k.rank() - 2));
    Tensor<Scalar> out(std::move(out_shape));
    for (Index o = 0; o < q.outer_count(); ++o)
        out.mat(o).noalias() = nq.mat(o) * nk.mat(o).transpose();
    return out;
}

/// Scaled dot-product attention with row softmax; the quadratic reference.
/// The causal variant adds -inf above the diagonal before the softmax,
/// which makes those weights exactly zero.
template <typename Scalar>
Tensor<Scalar> softmax_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k, const Tensor<Scalar>& v,
                                 bool causal) {
    if (q.rank() != 4 || k.rank() != 4 || v.rank() != 4)
        throw ShapeError("softmax_attention: expected (batch, heads, seq, dim) tensors");
    if (q.shape() != k.shape() || q.dim(0) != v.dim(0) || q.dim(1) != v.dim(1) || q.dim(2) != v.dim(2))
        throw ShapeError("softmax_attention: shape mismatch between Q, K, V");
    if (!q.all_finite() || !k.all_finite() || !v.all_finite())
        throw NumericError("softmax_attention: inputs must be finite");

    const Index s = q.dim(2);
    const Index d_key = q.dim(3);
    const Scalar inv_scale = Scalar(1) / std::sqrt(static_cast<Scalar>(d_key));

    Tensor<Scalar> out(v.shape());
    memory::TrackedVector<Scalar> score_buf(static_cast<std::size_t>(s * s));
    Eigen::Map<RowMatrix<Scalar>> scores(score_buf.data(), s, s);

    // The full s x s score matrix is materialized (that is the point of
    // this reference), but it is filled and consumed in row blocks sized
    // to stay cache-resident between the two matrix products; one big
    // GEMM -> softmax -> GEMM sequence would stream it through DRAM three
    // times and time measurements stop scaling cleanly.
    const Index rows_per_block =
        std::max(Index(1), static_cast<Index>((Index(1) << 20) / (s * Index(sizeof(Scalar)))));

    for (Index o = 0; o < q.outer_count(); ++o) {
        for (Index r0 = 0; r0 < s; r0 += rows_per_block) {
            const Index rows = std::min(rows_per_block, s - r0);
            const Index r1 = r0 + rows;
            const Index cols = causal ? r1 : s;  // causal rows never see keys past r1
            auto blk = scores.middleRows(r0, rows);
            blk.leftCols(cols).noalias() =
                q.mat(o).middleRows(r0, rows) * k.mat(o).topRows(cols).transpose() * inv_scale;
            // Row softmax over the unmasked prefix; masked weights are set
            // to exactly zero rather than exp(-inf), which SIMD exp may
            // round to a denormal. max is order-independent and exp is
            // elementwise, so both may vectorize; the sum keeps a fixed
            // left-to-right order.
            for (Index i = r0; i < r1; ++i) {
                const Index lim = causal ? i + 1 : s;
                auto row = scores.row(i).head(lim);
                const Scalar mx = row.maxCoeff();
                row = (row.array() - mx).exp().matrix();
                Scalar sum = 0;
                for (Index j = 0; j < lim; ++j) sum += scores(i, j);
                row /= sum;
                scores.row(i).tail(s - lim).setZero();
            }
            out.mat(o).middleRows(r0, rows).noalias() = blk.leftCols(cols) * v.mat(o).topRows(cols);
        }
    }
    return out;
}

/// Divides values by s_len^sigmoid(m), per batch element and per head.
/// sigmoid keeps the divisor inside [1, s_len].
template <typename Scalar>
Tensor<Scalar> stabilize_values(const Tensor<Scalar>& v, const std::vector<Index>& s_len,
                                const std::vector<Scalar>& m) {
    if (v.rank() != 4) throw ShapeError("stabilize_values: expected (batch, heads, seq, dim) values");
    const Index batch = v.dim(0);
    const Index heads = v.dim(1);
    if (static_cast<Index>(s_len.size()) != batch)
        throw ShapeError("stabilize_values: need one sequence length per batch element");
    if (static_cast<Index>(m.size()) != heads) throw ShapeError("stabilize_values: need one m per head");
    for (Index n : s_len)
        if (n < 1) throw DomainError("stabilize_values: sequence length must be >= 1");
    for (Scalar mh : m)
        if (!std::isfinite(mh)) throw NumericError("stabilize_values: m must be finite");

    Tensor<Scalar> out(v.shape());
    for (Index n = 0; n < batch; ++n) {
        for (Index h = 0; h < heads; ++h) {
            const Scalar divisor =
                std::pow(static_cast<Scalar>(s_len[static_cast<std::size_t>(n)]), sigmoid(m[static_cast<std::size_t>(h)]));
            out.mat(n, h) = v.mat(n, h) / divisor;
        }
    }
    return out;
}

template <typename Scalar>
Tensor<Scalar> stabilize_values(const Tensor<Scalar>& v, Index s_len, const std::vector<Scalar>& m) {
    if (v.rank() != 4) throw ShapeError("stabilize_values: expected (batch, heads, seq, dim) values");
    return stabilize_values(v, std::vector<Index>(static_cast<std::size_t>(v.dim(0)), s_len), m);
}

/// Growing-length reading of the divisor: position t divides by
/// (t+1)^sigmoid(m), the token count seen so far instead of the full
/// sequence length. Not equivalent to the fixed-length form.
template <typename Scalar>
Tensor<Scalar> stabilize_values_growing(const Tensor<Scalar>& v, const std::vector<Scalar>& m) {
    if (v.rank() != 4) throw ShapeError("stabilize_values_growing: expected (batch, heads, seq, dim) values");
    const Index heads = v.dim(1);
    const Index s = v.dim(2);
    if (static_cast<Index>(m.size()) != heads)
        throw ShapeError("stabilize_values_growing: need one m per head");
    for (Scalar mh : m)
        if (!std::isfinite(mh)) throw NumericError("stabilize_values_growing: m must be finite");

    Tensor<Scalar> out(v.shape());
    for (Index o = 0; o < v.outer_count(); ++o) {
        const Index h = o % heads;
        const Scalar sig = sigmoid(m[static_cast<std::size_t>(h)]);
        auto src = v.mat(o);
        auto dst = out.mat(o);
        for (Index t = 0; t < s; ++t)
            dst.row(t) = src.row(t) / std::pow(static_cast<Scalar>(t + 1), sig);
    }
    return out;
}

enum class Grouping { ScoresFirst, KvFirst };

/// Bidirectional cosine attention: normalize Q and K rows, stabilize V,
/// then contract. ScoresFirst materializes the (s x s) similarity matrix;
/// KvFirst materializes only the (d_key x d_value) key-value product. The
/// two groupings are algebraically identical.
template <typename Scalar>
Tensor<Scalar> bidirectional_cos_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k,
                                           const Tensor<Scalar>& v, const AttentionConfig<Scalar>& cfg,
                                           Grouping grouping, const std::vector<Index>& eff_len) {
    cfg.validate();
    detail::require_per_head_shapes(q, k, v, cfg, "bidirectional_cos_attention");

    const Tensor<Scalar> nq = l2_normalize_rows(q, cfg.eps_norm);
    const Tensor<Scalar> nk = l2_normalize_rows(k, cfg.eps_norm);
    const Tensor<Scalar> vs = stabilize_values(v, eff_len, cfg.m);

    const Index s = cfg.seq_len;
    Tensor<Scalar> out(v.shape());
    if (grouping == Grouping::ScoresFirst) {
        memory::TrackedVector<Scalar> buf(static_cast<std::size_t>(s * s));
        Eigen::Map<RowMatrix<Scalar>> scores(buf.data(), s, s);
        for (Index o = 0; o < q.outer_count(); ++o) {
            scores.noalias() = nq.mat(o) * nk.mat(o).transpose();
            out.mat(o).noalias() = scores * vs.mat(o);
        }
    } else {
        memory::TrackedVector<Scalar> buf(static_cast<std::size_t>(cfg.d_key * cfg.d_value));
        Eigen::Map<RowMatrix<Scalar>> kv(buf.data(), cfg.d_key, cfg.d_value);
        for (Index o = 0; o < q.outer_count(); ++o) {
            kv.noalias() = nk.mat(o).transpose() * vs.mat(o);
            out.mat(o).noalias() = nq.mat(o) * kv;
        }
    }
    return out;
}

template <typename Scalar>
Tensor<Scalar> bidirectional_cos_attention(const Tensor<Scalar>& q, const Tensor<Scalar>& k,
                                           const Tensor<Scalar>& v, const AttentionConfig<Scalar>& cfg,
                                           Grouping grouping) {
    return bidirectional_cos_attention(q, k, v, cfg, grouping,
                                       std::vector<Index>(static_cast<std::size_t>(cfg.batch), cfg.seq_len));
}

template <typename Scalar>
struct MaskedInputs {
    Tensor<Scalar> q, k, v;
    std::vector<Index> eff_len;  // valid tokens per batch element, clamped to >= 1
};

/// Zeroes padded positions in Q, K and V and reports the per-batch count
/// of valid tokens. A fully padded element clamps to length 1 so the
/// stabilization divisor stays defined.
template <typename Scalar>
MaskedInputs<Scalar> apply_padding_mask(const Tensor<Scalar>& q, const Tensor<Scalar>& k,
                                        const Tensor<Scalar>& v, const Tensor<std::uint8_t>& pad) {
    if (q.rank() != 4 || k.rank() != 4 || v.rank() != 4)
        throw ShapeError("apply_padding_mask: expected (batch, heads, seq, dim) tensors");
    if (q.shape() != k.shape() || q.dim(0) != v.dim(0) || q.dim(1) != v.dim(1) || q.dim(2) != v.dim(2))
        throw ShapeError("apply_padding_mask: shape mismatch between Q, K, V");
    const Index batch = q.dim(0);
    const Index heads = q.dim(1);
    const Index s = q.dim(2);
    if (pad.rank() != 2 || pad.dim(0) != batch || pad.dim(1) != s)
        throw ShapeError("apply_padding_mask: pad must have shape (batch, seq)");

    MaskedInputs<Scalar> out{q, k, v, std::vector<Index>(static_cast<std::size_t>(batch), 0)};
    for (Index n = 0; n < batch; ++n) {
        Index valid = 0;
        for (Index t = 0; t < s; ++t) {
            if (pad[n * s + t]) {
                ++valid;
                continue;
            }
            for (Index h = 0; h < heads; ++h) {
                out.q.mat(n, h).row(t).setZero();
                out.k.mat(n, h).row(t).setZero();
                out.v.mat(n, h).row(t).setZero();
            }
        }
        out.eff_len[static_cast<std::size_t>(n)] = std::max<Index>(valid, 1);
    }
    return out;
}

}  // namespace cott
