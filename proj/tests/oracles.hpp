#pragma once

// Reference implementations for tests only: plain scalar loops sharing no
// code with the library's Eigen kernels, written against the formulas
// directly. Deliberately naive.

#include <cmath>
#include <vector>

#include "cott/tensor.hpp"

namespace testoracle {

using cott::Index;
using cott::Tensor;

inline double dot(const double* a, const double* b, Index d) {
    double acc = 0.0;
    for (Index i = 0; i < d; ++i) acc += a[i] * b[i];
    return acc;
}

inline const double* row(const Tensor<double>& t, Index n, Index h, Index r) {
    const Index s = t.dim(2), d = t.dim(3);
    return t.data() + ((n * t.dim(1) + h) * s + r) * d;
}

// (Q K^T [.* M]) V over rank-4 (N, H, s, d) tensors, quadruple loop.
inline Tensor<double> masked_attention(const Tensor<double>& q, const Tensor<double>& k,
                                       const Tensor<double>& v, bool causal) {
    const Index batch = q.dim(0), heads = q.dim(1), s = q.dim(2), dk = q.dim(3), dv = v.dim(3);
    Tensor<double> out(v.shape());
    for (Index n = 0; n < batch; ++n)
        for (Index h = 0; h < heads; ++h)
            for (Index t = 0; t < s; ++t) {
                double* o = out.data() + ((n * heads + h) * s + t) * dv;
                const Index hi = causal ? t : s - 1;
                for (Index tau = 0; tau <= hi; ++tau) {
                    const double w = dot(row(q, n, h, t), row(k, n, h, tau), dk);
                    const double* vr = row(v, n, h, tau);
                    for (Index j = 0; j < dv; ++j) o[j] += w * vr[j];
                }
            }
    return out;
}

// Softmax attention with the 1/sqrt(d_key) scale, scalar loops throughout.
inline Tensor<double> softmax_attention(const Tensor<double>& q, const Tensor<double>& k,
                                        const Tensor<double>& v, bool causal) {
    const Index batch = q.dim(0), heads = q.dim(1), s = q.dim(2), dk = q.dim(3), dv = v.dim(3);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dk));
    Tensor<double> out(v.shape());
    std::vector<double> w(static_cast<std::size_t>(s));
    for (Index n = 0; n < batch; ++n)
        for (Index h = 0; h < heads; ++h)
            for (Index t = 0; t < s; ++t) {
                const Index lim = causal ? t + 1 : s;
                double mx = -1e300;
                for (Index tau = 0; tau < lim; ++tau) {
                    w[static_cast<std::size_t>(tau)] =
                        dot(row(q, n, h, t), row(k, n, h, tau), dk) * inv_scale;
                    mx = std::max(mx, w[static_cast<std::size_t>(tau)]);
                }
                double sum = 0.0;
                for (Index tau = 0; tau < lim; ++tau) {
                    w[static_cast<std::size_t>(tau)] = std::exp(w[static_cast<std::size_t>(tau)] - mx);
                    sum += w[static_cast<std::size_t>(tau)];
                }
                double* o = out.data() + ((n * heads + h) * s + t) * dv;
                for (Index tau = 0; tau < lim; ++tau) {
                    const double* vr = row(v, n, h, tau);
                    for (Index j = 0; j < dv; ++j)
                        o[j] += (w[static_cast<std::size_t>(tau)] / sum) * vr[j];
                }
            }
    return out;
}

// Row-by-row L2 normalization over the trailing dim, any rank.
inline Tensor<double> normalize_rows(const Tensor<double>& x, double eps) {
    Tensor<double> out(x.shape());
    const Index d = x.shape().back();
    const Index rows = x.size() / d;
    for (Index r = 0; r < rows; ++r) {
        double sq = 0.0;
        for (Index j = 0; j < d; ++j) sq += x[r * d + j] * x[r * d + j];
        const double div = std::max(std::sqrt(sq), eps);
        for (Index j = 0; j < d; ++j) out[r * d + j] = x[r * d + j] / div;
    }
    return out;
}

}  // namespace testoracle
