#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <new>
#include <string>
#include <vector>

#include "cott/causal.hpp"
#include "cott/core_ops.hpp"
#include "cott/errors.hpp"
#include "cott/instances.hpp"
#include "cott/memory.hpp"
#include "cott/recurrent.hpp"

namespace cott {

enum class BenchImpl { Softmax, CosineBidir, CosineCausal, CosineStream };
enum class BenchAxis { Seq, Dim };
enum class FitMetric { Time, Memory };

std::string to_string(BenchImpl impl);
std::string to_string(BenchAxis axis);
BenchImpl parse_impl(const std::string& name);
BenchAxis parse_axis(const std::string& name);

/// One measured point: median wall time over `reps` timed repetitions
/// (after one warmup) and the peak of the tracked-allocation counter,
/// which covers operator workspaces and recurrent state but not the
/// caller-owned input/output tensors.
struct BenchRecord {
    BenchImpl impl = BenchImpl::Softmax;
    BenchAxis axis = BenchAxis::Seq;
    Index s = 0;
    Index d = 0;
    int reps = 0;
    std::uint64_t wall_ns = 0;
    std::uint64_t peak_bytes = 0;
    bool ok = true;

    friend bool operator==(const BenchRecord&, const BenchRecord&) = default;
};

struct ScalingFit {
    double exponent = 0.0;
    double r2 = 0.0;
    int points = 0;
};

struct BenchOptions {
    Index batch = 1;
    Index heads = 8;
    Index fixed_seq = 512;
    Index fixed_dim = 64;  // per-head d_key and d_value
    Index chunk_len = 128;
    int reps = 5;
    std::uint64_t seed = 42;
};

/// Least-squares slope of log(metric) vs log(swept size) with its R².
/// Needs at least 4 successful points spanning an 8x size range.
ScalingFit fit_exponent(const std::vector<BenchRecord>& records, FitMetric metric);

/// Schema: impl,axis,s,d,reps,wall_ns_median,peak_bytes,status — header
/// first, one record per row, fits appended as '#' comment lines.
void emit_csv(const std::vector<BenchRecord>& records,
              const std::vector<std::pair<std::string, ScalingFit>>& fits, const std::string& path);

/// Reads back what emit_csv wrote, ignoring the header and comments.
std::vector<BenchRecord> parse_csv(const std::string& path);

namespace detail {

template <typename Scalar>
std::uint64_t time_once(BenchImpl impl, const Tensor<Scalar>& q, const Tensor<Scalar>& k,
                        const Tensor<Scalar>& v, const AttentionConfig<Scalar>& cfg, Index chunk_len) {
    const auto start = std::chrono::steady_clock::now();
    Tensor<Scalar> out({1});
    switch (impl) {
        case BenchImpl::Softmax:
            out = softmax_attention(q, k, v, /*causal=*/true);
            break;
        case BenchImpl::CosineBidir:
            out = bidirectional_cos_attention(q, k, v, cfg, Grouping::KvFirst);
            break;
        case BenchImpl::CosineCausal:
            out = causal_linear_forward(q, k, v, cfg, chunk_len);
            break;
        case BenchImpl::CosineStream:
            out = stream_sequence(q, k, v, cfg);
            break;
    }
    const auto stop = std::chrono::steady_clock::now();
    // Keep the result alive so the work cannot be elided.
    if (!out.all_finite()) throw NumericError("bench: non-finite output");
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start).count());
}

}  // namespace detail

/// Runs one implementation over strictly increasing sweep points. Input
/// generation and (for the pre-normalized paths) normalization happen
/// outside the timed region. Out-of-memory at a point marks that record
/// failed and the sweep continues. Strictly serial.
template <typename Scalar>
std::vector<BenchRecord> run_sweep(BenchImpl impl, BenchAxis axis, const std::vector<Index>& points,
                                   const BenchOptions& opt) {
    if (points.empty()) throw DomainError("run_sweep: need at least one sweep point");
    for (std::size_t i = 1; i < points.size(); ++i)
        if (points[i] <= points[i - 1]) throw DomainError("run_sweep: points must be strictly increasing");
    if (opt.reps < 3) throw DomainError("run_sweep: reps must be >= 3");

    std::vector<BenchRecord> records;
    records.reserve(points.size());
    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        const Index s = axis == BenchAxis::Seq ? points[pi] : opt.fixed_seq;
        const Index d = axis == BenchAxis::Dim ? points[pi] : opt.fixed_dim;
        BenchRecord rec;
        rec.impl = impl;
        rec.axis = axis;
        rec.s = s;
        rec.d = d;
        rec.reps = opt.reps;
        try {
            const AttentionConfig<Scalar> cfg =
                AttentionConfig<Scalar>::make(opt.batch, opt.heads, s, d, d);
            const std::uint64_t seed = opt.seed + 7919 * static_cast<std::uint64_t>(pi);
            Tensor<Scalar> q = random_normal<Scalar>(cfg.qk_shape(), seed);
            Tensor<Scalar> k = random_normal<Scalar>(cfg.qk_shape(), seed + 1);
            Tensor<Scalar> v = random_normal<Scalar>(cfg.v_shape(), seed + 2);
            if (impl == BenchImpl::CosineBidir || impl == BenchImpl::CosineCausal) {
                // Setup cost, excluded from timing: these paths consume
                // pre-normalized queries/keys and pre-stabilized values.
                q = l2_normalize_rows(q, cfg.eps_norm);
                k = l2_normalize_rows(k, cfg.eps_norm);
                v = stabilize_values(v, s, cfg.m);
            }

            detail::time_once(impl, q, k, v, cfg, opt.chunk_len);  // warmup
            std::vector<std::uint64_t> times;
            times.reserve(static_cast<std::size_t>(opt.reps));
            std::uint64_t peak = 0;
            for (int r = 0; r < opt.reps; ++r) {
                memory::reset_peak();
                times.push_back(detail::time_once(impl, q, k, v, cfg, opt.chunk_len));
                peak = std::max<std::uint64_t>(peak, memory::peak_bytes() - memory::current_bytes());
            }
            std::sort(times.begin(), times.end());
            rec.wall_ns = times[times.size() / 2];
            rec.peak_bytes = peak;
            rec.ok = true;
        } catch (const std::bad_alloc&) {
            rec.ok = false;
        }
        records.push_back(rec);
    }
    return records;
}

}  // namespace cott
