#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "cott/causal.hpp"
#include "cott/config.hpp"
#include "cott/core_ops.hpp"
#include "cott/random.hpp"
#include "cott/tensor.hpp"

namespace cott {

struct LayerDims {
    Index d_model = 8;
    Index d_key = 8;    // total across heads
    Index d_value = 8;  // total across heads
    Index heads = 2;
};

/// Multi-head cosine-attention layer: query/key/value projections plus one
/// learned stabilization exponent per head.
template <typename Scalar>
struct AttentionLayer {
    LayerDims dims;
    Tensor<Scalar> w_q, w_k, w_v;  // (d_model, d_key) / (d_model, d_key) / (d_model, d_value)
    std::vector<Scalar> m;         // per head, initialized to 0.5
    Scalar eps_norm = Scalar(1e-12);
    std::uint64_t revision = 0;  // bumped by parameter updates; guards stale caches

    Index head_key() const { return dims.d_key / dims.heads; }
    Index head_value() const { return dims.d_value / dims.heads; }
};

/// Deterministic init: weights from a zero-mean normal with scale
/// 1/sqrt(d_model), m at 0.5 for every head.
template <typename Scalar>
AttentionLayer<Scalar> layer_init(const LayerDims& dims, std::uint64_t seed) {
    if (dims.d_model < 1 || dims.d_key < 1 || dims.d_value < 1 || dims.heads < 1)
        throw ShapeError("layer_init: all dimensions must be >= 1");
    if (dims.d_key % dims.heads != 0 || dims.d_value % dims.heads != 0)
        throw ShapeError("layer_init: d_key and d_value must be divisible by the head count");

    const double scale = 1.0 / std::sqrt(static_cast<double>(dims.d_model));
    AttentionLayer<Scalar> layer;
    layer.dims = dims;
    layer.w_q = random_normal<Scalar>({dims.d_model, dims.d_key}, seed, scale);
    layer.w_k = random_normal<Scalar>({dims.d_model, dims.d_key}, seed + 1, scale);
    layer.w_v = random_normal<Scalar>({dims.d_model, dims.d_value}, seed + 2, scale);
    layer.m.assign(static_cast<std::size_t>(dims.heads), Scalar(0.5));
    return layer;
}

namespace detail {

// (N, s, D) -> (N, H, s, D/H), head h taking columns [h*Dh, (h+1)*Dh).
template <typename Scalar>
Tensor<Scalar> split_heads(const Tensor<Scalar>& x, Index heads) {
    const Index batch = x.dim(0), s = x.dim(1), d = x.dim(2);
    const Index dh = d / heads;
    Tensor<Scalar> out({batch, heads, s, dh});
    for (Index n = 0; n < batch; ++n)
        for (Index h = 0; h < heads; ++h) out.mat(n, h) = x.mat(n).middleCols(h * dh, dh);
    return out;
}

template <typename Scalar>
Tensor<Scalar> merge_heads(const Tensor<Scalar>& x) {
    const Index batch = x.dim(0), heads = x.dim(1), s = x.dim(2), dh = x.dim(3);
    Tensor<Scalar> out({batch, s, heads * dh});
    for (Index n = 0; n < batch; ++n)
        for (Index h = 0; h < heads; ++h) out.mat(n).middleCols(h * dh, dh) = x.mat(n, h);
    return out;
}

}  // namespace detail

template <typename Scalar>
struct LayerCache {
    Tensor<Scalar> x;
    Tensor<Scalar> q4, k4, v4;  // per-head projections, pre-normalization
    Tensor<Scalar> nq, nk, vs;  // normalized queries/keys, stabilized values
    AttentionConfig<Scalar> cfg;
    bool causal = true;
    Index chunk_len = 128;
    std::uint64_t revision = 0;
};

/// Projects, splits heads, normalizes Q and K rows, stabilizes V with the
/// per-head m, runs causal (blocked scan) or bidirectional (kv-first)
/// cosine attention, merges heads. The cache retains what backward needs.
template <typename Scalar>
std::pair<Tensor<Scalar>, LayerCache<Scalar>> layer_forward(const AttentionLayer<Scalar>& layer,
                                                            const Tensor<Scalar>& x, bool causal,
                                                            Index chunk_len = 128) {
    if (x.rank() != 3 || x.dim(2) != layer.dims.d_model)
        throw ShapeError("layer_forward: input must have shape (batch, seq, d_model)");
    if (!x.all_finite()) throw NumericError("layer_forward: input must be finite");

    const Index batch = x.dim(0), s = x.dim(1);
    Tensor<Scalar> q3({batch, s, layer.dims.d_key});
    Tensor<Scalar> k3({batch, s, layer.dims.d_key});
    Tensor<Scalar> v3({batch, s, layer.dims.d_value});
    for (Index n = 0; n < batch; ++n) {
        q3.mat(n).noalias() = x.mat(n) * layer.w_q.mat();
        k3.mat(n).noalias() = x.mat(n) * layer.w_k.mat();
        v3.mat(n).noalias() = x.mat(n) * layer.w_v.mat();
    }

    LayerCache<Scalar> cache;
    cache.x = x;
    cache.q4 = detail::split_heads(q3, layer.dims.heads);
    cache.k4 = detail::split_heads(k3, layer.dims.heads);
    cache.v4 = detail::split_heads(v3, layer.dims.heads);
    cache.cfg = AttentionConfig<Scalar>::make(batch, layer.dims.heads, s, layer.head_key(),
                                              layer.head_value());
    cache.cfg.m = layer.m;
    cache.cfg.eps_norm = layer.eps_norm;
    cache.causal = causal;
    cache.chunk_len = chunk_len;
    cache.revision = layer.revision;

    cache.nq = l2_normalize_rows(cache.q4, layer.eps_norm);
    cache.nk = l2_normalize_rows(cache.k4, layer.eps_norm);
    cache.vs = stabilize_values(cache.v4, s, layer.m);

    Tensor<Scalar> o4(cache.vs.shape());
    if (causal) {
        o4 = causal_linear_forward(cache.nq, cache.nk, cache.vs, cache.cfg, chunk_len);
    } else {
        RowMatrix<Scalar> kv(layer.head_key(), layer.head_value());
        for (Index o = 0; o < o4.outer_count(); ++o) {
            kv.noalias() = cache.nk.mat(o).transpose() * cache.vs.mat(o);
            o4.mat(o).noalias() = cache.nq.mat(o) * kv;
        }
    }
    return {detail::merge_heads(o4), std::move(cache)};
}

/// Chain rule through row L2 normalization. For a row x with norm n > eps
/// and direction u = x/n, the incoming gradient g maps to (g - u (u.g))/n:
/// the radial component dies, the tangential part scales by 1/n. Rows at
/// or below eps get zero gradient, consistent with the zero-map forward
/// convention.
template <typename Scalar>
Tensor<Scalar> normalize_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& g, Scalar eps) {
    if (!same_shape(x, g)) throw ShapeError("normalize_backward: gradient shape must match input");
    Tensor<Scalar> out(x.shape());
    const Index d = x.shape().back();
    const Index rows = x.size() / d;
    for (Index r = 0; r < rows; ++r) {
        Eigen::Map<const Vector<Scalar>> xr(x.data() + r * d, d);
        Eigen::Map<const Vector<Scalar>> gr(g.data() + r * d, d);
        Eigen::Map<Vector<Scalar>> or_(out.data() + r * d, d);
        const Scalar n = xr.norm();
        if (n > eps) {
            const Scalar radial = xr.dot(gr) / (n * n);
            or_ = (gr - xr * radial) / n;
        } else {
            or_.setZero();
        }
    }
    return out;
}

template <typename Scalar>
struct LayerGradients {
    Tensor<Scalar> dw_q, dw_k, dw_v;
    std::vector<Scalar> dm;
    Tensor<Scalar> dx;
};

/// Manual backward through the whole layer: attention gradients (scanned
/// for the causal path, algebraic for kv-first), the stabilization
/// exponent gradient, the normalization Jacobian, and the projections.
template <typename Scalar>
LayerGradients<Scalar> layer_backward(const AttentionLayer<Scalar>& layer, const LayerCache<Scalar>& cache,
                                      const Tensor<Scalar>& dy) {
    if (cache.revision != layer.revision)
        throw UsageError("layer_backward: cache is stale; parameters changed since the forward pass");
    if (cache.cfg.heads != layer.dims.heads || cache.cfg.d_key != layer.head_key() ||
        cache.cfg.d_value != layer.head_value())
        throw UsageError("layer_backward: cache does not belong to this layer");
    if (dy.rank() != 3 || dy.dim(0) != cache.cfg.batch || dy.dim(1) != cache.cfg.seq_len ||
        dy.dim(2) != layer.dims.d_value)
        throw ShapeError("layer_backward: dY must have shape (batch, seq, d_value)");

    const Index batch = cache.cfg.batch;
    const Index s = cache.cfg.seq_len;
    const Tensor<Scalar> g4 = detail::split_heads(dy, layer.dims.heads);

    Tensor<Scalar> dnq(cache.nq.shape());
    Tensor<Scalar> dnk(cache.nk.shape());
    Tensor<Scalar> dvs(cache.vs.shape());
    if (cache.causal) {
        CausalGradients<Scalar> cg =
            causal_backward(cache.nq, cache.nk, cache.vs, g4, cache.cfg, cache.chunk_len);
        dnq = std::move(cg.dq);
        dnk = std::move(cg.dk);
        dvs = std::move(cg.dv);
    } else {
        RowMatrix<Scalar> kv(layer.head_key(), layer.head_value());
        RowMatrix<Scalar> dkv(layer.head_key(), layer.head_value());
        for (Index o = 0; o < g4.outer_count(); ++o) {
            kv.noalias() = cache.nk.mat(o).transpose() * cache.vs.mat(o);
            dkv.noalias() = cache.nq.mat(o).transpose() * g4.mat(o);
            dnq.mat(o).noalias() = g4.mat(o) * kv.transpose();
            dnk.mat(o).noalias() = cache.vs.mat(o) * dkv.transpose();
            dvs.mat(o).noalias() = cache.nk.mat(o) * dkv;
        }
    }

    // Through the stabilization: vs = v4 / s^sigmoid(m). ln(s) vanishes at
    // s = 1, so dm is identically zero there.
    LayerGradients<Scalar> grads;
    grads.dm.assign(static_cast<std::size_t>(layer.dims.heads), Scalar(0));
    Tensor<Scalar> dv4(cache.v4.shape());
    const Scalar log_len = std::log(static_cast<Scalar>(s));
    for (Index n = 0; n < batch; ++n) {
        for (Index h = 0; h < layer.dims.heads; ++h) {
            const Scalar sig = sigmoid(layer.m[static_cast<std::size_t>(h)]);
            const Scalar divisor = std::pow(static_cast<Scalar>(s), sig);
            dv4.mat(n, h) = dvs.mat(n, h) / divisor;
            grads.dm[static_cast<std::size_t>(h)] +=
                -(dvs.mat(n, h).cwiseProduct(cache.vs.mat(n, h))).sum() * log_len * sig * (Scalar(1) - sig);
        }
    }

    const Tensor<Scalar> dq4 = normalize_backward(cache.q4, dnq, layer.eps_norm);
    const Tensor<Scalar> dk4 = normalize_backward(cache.k4, dnk, layer.eps_norm);

    const Tensor<Scalar> dq3 = detail::merge_heads(dq4);
    const Tensor<Scalar> dk3 = detail::merge_heads(dk4);
    const Tensor<Scalar> dv3 = detail::merge_heads(dv4);

    grads.dw_q = Tensor<Scalar>(layer.w_q.shape());
    grads.dw_k = Tensor<Scalar>(layer.w_k.shape());
    grads.dw_v = Tensor<Scalar>(layer.w_v.shape());
    grads.dx = Tensor<Scalar>(cache.x.shape());
    for (Index n = 0; n < batch; ++n) {
        grads.dw_q.mat().noalias() += cache.x.mat(n).transpose() * dq3.mat(n);
        grads.dw_k.mat().noalias() += cache.x.mat(n).transpose() * dk3.mat(n);
        grads.dw_v.mat().noalias() += cache.x.mat(n).transpose() * dv3.mat(n);
        grads.dx.mat(n).noalias() = dq3.mat(n) * layer.w_q.mat().transpose();
        grads.dx.mat(n).noalias() += dk3.mat(n) * layer.w_k.mat().transpose();
        grads.dx.mat(n).noalias() += dv3.mat(n) * layer.w_v.mat().transpose();
    }
    return grads;
}

/// Plain gradient-descent step; bumps the revision so stale caches are
/// rejected.
template <typename Scalar>
void apply_update(AttentionLayer<Scalar>& layer, const LayerGradients<Scalar>& grads, Scalar lr) {
    layer.w_q.flat() -= lr * grads.dw_q.flat();
    layer.w_k.flat() -= lr * grads.dw_k.flat();
    layer.w_v.flat() -= lr * grads.dw_v.flat();
    for (std::size_t h = 0; h < layer.m.size(); ++h) layer.m[h] -= lr * grads.dm[h];
    ++layer.revision;
}

/// Default step size for the toy trainer, sized to the shipped
/// configuration (d_model 16, two heads, batch 16, seq 4): large enough to
/// halve the memorization loss well inside 200 steps, small enough not to
/// diverge.
inline constexpr double kToyLearningRate = 0.5;

/// Synthetic training task. Memorize fits the outputs of a hidden,
/// independently initialized layer on a fixed set of random sequences;
/// Copy reproduces the input (needs d_value == d_model).
struct ToyTask {
    enum class Kind { Memorize, Copy };
    Kind kind = Kind::Memorize;
    Index batch = 16;
    Index seq = 4;
    bool causal = true;
};

template <typename Scalar>
struct TrainResult {
    std::vector<Scalar> loss;                  // steps+1 entries; loss[0] is the initial loss
    std::vector<std::vector<Scalar>> m_trace;  // steps+1 snapshots of the per-head m vector
    bool diverged = false;
};

/// Gradient-descent loop on mean squared error. Divergence (non-finite
/// loss) stops the loop and is reported in the result, not thrown.
template <typename Scalar>
TrainResult<Scalar> train_toy(AttentionLayer<Scalar>& layer, const ToyTask& task, int steps, Scalar lr,
                              std::uint64_t seed) {
    if (steps < 1) throw DomainError("train_toy: steps must be >= 1");
    if (lr < Scalar(0)) throw DomainError("train_toy: learning rate must be >= 0");
    if (task.kind == ToyTask::Kind::Copy && layer.dims.d_value != layer.dims.d_model)
        throw ShapeError("train_toy: copy task needs d_value == d_model");

    const Tensor<Scalar> x = random_normal<Scalar>({task.batch, task.seq, layer.dims.d_model}, seed);
    Tensor<Scalar> target;
    if (task.kind == ToyTask::Kind::Copy) {
        target = x;
    } else {
        AttentionLayer<Scalar> teacher = layer_init<Scalar>(layer.dims, seed + 1000);
        target = layer_forward(teacher, x, task.causal).first;
    }

    const Scalar inv_count = Scalar(1) / static_cast<Scalar>(target.size());
    TrainResult<Scalar> result;
    result.m_trace.push_back(layer.m);
    for (int step = 0; step < steps; ++step) {
        auto [y, cache] = layer_forward(layer, x, task.causal);
        Tensor<Scalar> diff(y.shape());
        diff.flat() = y.flat() - target.flat();
        const Scalar loss = diff.flat().squaredNorm() * inv_count;
        result.loss.push_back(loss);
        if (!std::isfinite(loss)) {
            result.diverged = true;
            return result;
        }
        Tensor<Scalar> dy(y.shape());
        dy.flat() = diff.flat() * (Scalar(2) * inv_count);
        const LayerGradients<Scalar> grads = layer_backward(layer, cache, dy);
        apply_update(layer, grads, lr);
        result.m_trace.push_back(layer.m);
    }

    const auto [y_final, cache_final] = layer_forward(layer, x, task.causal);
    Tensor<Scalar> diff(y_final.shape());
    diff.flat() = y_final.flat() - target.flat();
    result.loss.push_back(diff.flat().squaredNorm() * inv_count);
    return result;
}

}  // namespace cott
