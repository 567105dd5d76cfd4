#include "doctest.h"

#include <cstring>

#include "cott/causal.hpp"
#include "cott/gradcheck.hpp"
#include "cott/instances.hpp"
#include "cott/memory.hpp"
#include "cott/random.hpp"
#include "oracles.hpp"

using cott::AttentionConfig;
using cott::Index;
using cott::Tensor;

TEST_CASE("causal_oracle: single token is (q.k) v") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 1, 3, 2);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 1);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 2);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 3);
    const auto out = cott::causal_oracle(q, k, v, cfg);
    const double w = q[0] * k[0] + q[1] * k[1] + q[2] * k[2];
    CHECK(out[0] == doctest::Approx(w * v[0]).epsilon(1e-15));
    CHECK(out[1] == doctest::Approx(w * v[1]).epsilon(1e-15));
}

TEST_CASE("causal_oracle: position 0 equals the length-1 prefix result") {
    const auto cfg = AttentionConfig<double>::make(1, 2, 6, 4, 3);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 4);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 5);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 6);
    const auto out = cott::causal_oracle(q, k, v, cfg);
    for (Index h = 0; h < 2; ++h) {
        const double w = q.mat(0, h).row(0).dot(k.mat(0, h).row(0));
        for (Index j = 0; j < 3; ++j)
            CHECK(out.mat(0, h)(0, j) == doctest::Approx(w * v.mat(0, h)(0, j)).epsilon(1e-12));
    }
}

TEST_CASE("causal_oracle: matches the scalar triple-loop reference") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 5, 3, 2);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 7);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 8);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 9);
    const auto got = cott::causal_oracle(q, k, v, cfg);
    const auto want = testoracle::masked_attention(q, k, v, /*causal=*/true);
    CHECK(cott::max_abs_diff(got, want) < 1e-12);
}

TEST_CASE("causal_linear_forward: single token scales v by q.k") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 1, 4, 3);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 10);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 11);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 12);
    const auto out = cott::causal_linear_forward(q, k, v, cfg);
    const double w = q.mat(0).row(0).dot(k.mat(0).row(0));
    for (Index j = 0; j < 3; ++j) CHECK(out[j] == doctest::Approx(w * v[j]).epsilon(1e-15));
}

TEST_CASE("causal_linear_forward: output independent of chunk length") {
    const auto cfg = AttentionConfig<double>::make(2, 2, 19, 5, 4);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 13);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 14);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 15);
    const auto whole = cott::causal_linear_forward(q, k, v, cfg, 19);
    for (const Index chunk : {Index(1), Index(3), Index(7), Index(128)}) {
        const auto chunked = cott::causal_linear_forward(q, k, v, cfg, chunk);
        CHECK(cott::max_abs_diff(whole, chunked) < 1e-9);
    }
}

TEST_CASE("causal_linear_forward: equals causal_oracle on a (2,2,32,8) instance") {
    const auto cfg = AttentionConfig<double>::make(2, 2, 32, 8, 8);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 16);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 17);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 18);
    CHECK(cott::max_abs_diff(cott::causal_linear_forward(q, k, v, cfg),
                             cott::causal_oracle(q, k, v, cfg)) < 1e-9);
}

TEST_CASE("causal_linear_forward: oracle equivalence across random instances") {
    for (std::uint64_t i = 0; i < 30; ++i) {
        const auto inst = cott::make_instance<double>(1234, i);
        const auto lin = cott::causal_linear_forward(inst.q, inst.k, inst.v, inst.cfg);
        const auto ora = cott::causal_oracle(inst.q, inst.k, inst.v, inst.cfg);
        CHECK(cott::max_abs_diff(lin, ora) < 1e-9);
    }
}

TEST_CASE("causal_linear_forward: chunk_len must be positive") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 2, 2, 2);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 19);
    CHECK_THROWS_AS(cott::causal_linear_forward(q, q, q, cfg, 0), cott::DomainError);
}

TEST_CASE("causal_linear_forward: future perturbations leave earlier rows bit-identical") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 11, 4, 3);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 20);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 21);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 22);
    const auto base = cott::causal_linear_forward(q, k, v, cfg, 4);
    for (Index tp = 0; tp < 11; ++tp) {
        auto k2 = k;
        auto v2 = v;
        k2.mat(0).row(tp).array() += 9.0;
        v2.mat(0).row(tp).array() -= 4.0;
        const auto out = cott::causal_linear_forward(q, k2, v2, cfg, 4);
        for (Index t = 0; t < tp; ++t)
            CHECK(std::memcmp(base.mat(0).row(t).data(), out.mat(0).row(t).data(), 3 * sizeof(double)) ==
                  0);
    }
}

TEST_CASE("causal_linear_forward: tracked workspace bytes constant across sequence lengths") {
    std::size_t expected = 0;
    for (const Index s : {Index(128), Index(256), Index(512), Index(1024)}) {
        const auto cfg = AttentionConfig<double>::make(1, 2, s, 6, 5);
        const auto q = cott::random_normal<double>(cfg.qk_shape(), 23);
        const auto k = cott::random_normal<double>(cfg.qk_shape(), 24);
        const auto v = cott::random_normal<double>(cfg.v_shape(), 25);
        cott::memory::reset_peak();
        const std::size_t before = cott::memory::current_bytes();
        const auto out = cott::causal_linear_forward(q, k, v, cfg, 128);
        const std::size_t ws = cott::memory::peak_bytes() - before;
        CHECK(out.all_finite());
        if (s == 128)
            expected = ws;
        else
            CHECK(ws == expected);
    }
    CHECK(expected > 0);
}

TEST_CASE("causal_backward: zero upstream gradient zeroes all gradients") {
    const auto cfg = AttentionConfig<double>::make(1, 2, 5, 3, 4);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 26);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 27);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 28);
    const Tensor<double> g(cfg.v_shape());
    const auto grads = cott::causal_backward(q, k, v, g, cfg);
    CHECK(grads.dq.flat().cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.dk.flat().cwiseAbs().maxCoeff() == 0.0);
    CHECK(grads.dv.flat().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("causal_backward: single token gives dV = (q.k) g") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 1, 3, 2);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 29);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 30);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 31);
    const auto g = cott::random_normal<double>(cfg.v_shape(), 32);
    const auto grads = cott::causal_backward(q, k, v, g, cfg);
    const double w = q.mat(0).row(0).dot(k.mat(0).row(0));
    CHECK(grads.dv[0] == doctest::Approx(w * g[0]).epsilon(1e-15));
    CHECK(grads.dv[1] == doctest::Approx(w * g[1]).epsilon(1e-15));
}

TEST_CASE("causal_backward: matches central finite differences") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 6, 4, 4);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 33);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 34);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 35);
    const auto w = cott::random_normal<double>(cfg.v_shape(), 36);
    const auto analytic = cott::causal_backward(q, k, v, w, cfg, 3);

    const auto loss = [&](const Tensor<double>& qq, const Tensor<double>& kk, const Tensor<double>& vv) {
        const auto out = cott::causal_linear_forward(qq, kk, vv, cfg, 3);
        double acc = 0.0;
        for (Index i = 0; i < out.size(); ++i) acc += out[i] * w[i];
        return acc;
    };
    const double step = 1e-6;
    const auto fd_q =
        cott::finite_diff<double>([&](const Tensor<double>& t) { return loss(t, k, v); }, q, step);
    const auto fd_k =
        cott::finite_diff<double>([&](const Tensor<double>& t) { return loss(q, t, v); }, k, step);
    const auto fd_v =
        cott::finite_diff<double>([&](const Tensor<double>& t) { return loss(q, k, t); }, v, step);
    CHECK(cott::compare(analytic.dq, fd_q, 1e-4).max_rel_err < 1e-5);
    CHECK(cott::compare(analytic.dk, fd_k, 1e-4).max_rel_err < 1e-5);
    CHECK(cott::compare(analytic.dv, fd_v, 1e-4).max_rel_err < 1e-5);
}

TEST_CASE("causal_backward: dQ is a forward scan over (G, V, K)") {
    const auto cfg = AttentionConfig<double>::make(2, 2, 14, 5, 3);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 37);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 38);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 39);
    const auto g = cott::random_normal<double>(cfg.v_shape(), 40);
    const auto grads = cott::causal_backward(q, k, v, g, cfg, 4);
    // dQ[t] = sum_{tau<=t} (g_t . v_tau) k_tau: the forward recurrence with
    // G as queries, V as keys, K as values.
    const auto swapped = AttentionConfig<double>::make(2, 2, 14, cfg.d_value, cfg.d_key);
    const auto dq_via_forward = cott::causal_linear_forward(g, v, k, swapped, 4);
    CHECK(cott::max_abs_diff(grads.dq, dq_via_forward) < 1e-9);
}

TEST_CASE("causal_backward: shape mismatch in G throws") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 3, 2, 2);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 41);
    const auto g_bad = cott::random_normal<double>({1, 1, 3, 3}, 42);
    CHECK_THROWS_AS(cott::causal_backward(q, q, q, g_bad, cfg), cott::ShapeError);
}

TEST_CASE("strict-below mask drops the diagonal but stays causal") {
    const auto cfg = AttentionConfig<double>::make(1, 1, 4, 3, 2);
    const auto q = cott::random_normal<double>(cfg.qk_shape(), 43);
    const auto k = cott::random_normal<double>(cfg.qk_shape(), 44);
    const auto v = cott::random_normal<double>(cfg.v_shape(), 45);
    const auto strict = cott::causal_oracle(q, k, v, cfg, cott::CausalMaskKind::StrictBelow);
    const auto inclusive = cott::causal_oracle(q, k, v, cfg, cott::CausalMaskKind::Inclusive);
    // Row 0 attends to nothing under the strict mask.
    CHECK(strict.mat(0).row(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(cott::max_abs_diff(strict, inclusive) > 1e-6);
}
