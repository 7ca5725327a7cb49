#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "trajlab/attention.hpp"
#include "trajlab/errors.hpp"
#include "trajlab/ops.hpp"

using namespace trajlab;

TEST(AttentionMask, AllMaskedRowIsMaskError) {
    EXPECT_THROW(AttentionMask(2, 2, {true, false, false, false}), MaskError);
    EXPECT_THROW(AttentionMask::key_padding(3, {false, false}), MaskError);
    EXPECT_THROW(AttentionMask::causal(3) & AttentionMask::key_padding(3, {false, true, true}), MaskError);
}

TEST(AttentionMask, CausalIsLowerTriangular) {
    const auto m = AttentionMask::causal(4);
    for (std::size_t q = 0; q < 4; ++q)
        for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(m.allowed(q, k), k <= q);
}

TEST(ScaledDotAttention, SingleKeyReturnsItsValue) {
    Tensor q = Tensor::matrix(3, 2, {1, 2, -3, 0.5, 7, 7});
    Tensor k = Tensor::matrix(1, 2, {0.3, -0.2});
    Tensor v = Tensor::matrix(1, 3, {4, 5, 6});
    Tensor out = scaled_dot_attention(q, k, v, AttentionMask::full(3, 1));
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.at(r, c), v.at(0, c), 1e-15);
}

TEST(ScaledDotAttention, IdenticalKeysAverageValues) {
    Tensor q = Tensor::matrix(2, 2, {1, 2, -1, 0});
    Tensor k = Tensor::matrix(3, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    Tensor v = Tensor::matrix(3, 2, {1, 0, 0, 3, 2, 3});
    Tensor out = scaled_dot_attention(q, k, v, AttentionMask::full(2, 3));
    for (std::size_t r = 0; r < 2; ++r) {
        EXPECT_NEAR(out.at(r, 0), 1.0, 1e-12);
        EXPECT_NEAR(out.at(r, 1), 2.0, 1e-12);
    }
}

TEST(ScaledDotAttention, HandEvaluatedTwoKeyExample) {
    Tensor q = Tensor::matrix(1, 2, {1, 0});
    Tensor k = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tensor v = Tensor::matrix(2, 2, {1, 0, 0, 1});
    Tensor out = scaled_dot_attention(q, k, v, AttentionMask::full(1, 2));
    const double s0 = 1.0 / std::sqrt(2.0), s1 = 0.0;
    const double w0 = std::exp(s0) / (std::exp(s0) + std::exp(s1));
    EXPECT_NEAR(out.at(0, 0), w0, 1e-15);
    EXPECT_NEAR(out.at(0, 1), 1.0 - w0, 1e-15);
}

TEST(ScaledDotAttention, DimensionMismatchIsShapeError) {
    Tensor q = Tensor::zeros({2, 3}), k = Tensor::zeros({2, 2}), v = Tensor::zeros({2, 2});
    EXPECT_THROW(scaled_dot_attention(q, k, v, AttentionMask::full(2, 2)), ShapeError);
    Tensor q2 = Tensor::zeros({2, 2});
    EXPECT_THROW(scaled_dot_attention(q2, k, v, AttentionMask::full(3, 2)), ShapeError);
}

TEST(MultiHeadAttention, WeightsSumToOneAndMaskedKeysGetZero) {
    std::mt19937_64 rng(2);
    const std::size_t batch = 3, lq = 4, lk = 5, d = 6, heads = 3;
    Tensor q = check::random_tensor({batch * lq, d}, rng, -3, 3, false);
    Tensor k = check::random_tensor({batch * lk, d}, rng, -3, 3, false);
    Tensor v = check::random_tensor({batch * lk, d}, rng, -3, 3, false);
    std::vector<AttentionMask> masks{AttentionMask::key_padding(lq, {true, false, true, true, false}),
                                     AttentionMask::full(lq, lk),
                                     AttentionMask::key_padding(lq, {false, false, false, false, true})};
    std::vector<double> w;
    multi_head_attention(q, k, v, heads, batch, masks, &w);
    ASSERT_EQ(w.size(), batch * heads * lq * lk);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < lq; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j < lk; ++j) {
                    const double x = w[((b * heads + h) * lq + i) * lk + j];
                    if (!masks[b].allowed(i, j)) EXPECT_EQ(x, 0.0);
                    sum += x;
                }
                EXPECT_NEAR(sum, 1.0, 1e-9);
            }
}

TEST(MultiHeadAttention, CausalMaskLeaksNothing) {
    std::mt19937_64 rng(3);
    const std::size_t len = 6, d = 4;
    Tensor x = check::random_tensor({len, d}, rng, -1, 1, false);
    const AttentionMask causal = AttentionMask::causal(len);
    const Tensor base = multi_head_attention(x, x, x, 2, 1, {&causal, 1});
    for (std::size_t j = 0; j < len; ++j) {
        std::vector<double> perturbed(x.values().begin(), x.values().end());
        for (std::size_t c = 0; c < d; ++c) perturbed[j * d + c] += 10.0;
        Tensor xp = Tensor::matrix(len, d, perturbed);
        const Tensor out = multi_head_attention(xp, xp, xp, 2, 1, {&causal, 1});
        for (std::size_t i = 0; i < j; ++i)
            for (std::size_t c = 0; c < d; ++c) EXPECT_LT(std::abs(out.at(i, c) - base.at(i, c)), 1e-9);
    }
}

TEST(MultiHeadAttention, PaddedKeysHaveNoInfluence) {
    std::mt19937_64 rng(4);
    Tensor q = check::random_tensor({2, 4}, rng, -1, 1, false);
    Tensor k = check::random_tensor({5, 4}, rng, -1, 1, false);
    Tensor v = check::random_tensor({5, 4}, rng, -1, 1, false);
    const AttentionMask m = AttentionMask::key_padding(2, {true, false, true, false, true});
    const Tensor base = multi_head_attention(q, k, v, 2, 1, {&m, 1});
    std::vector<double> kv(k.values().begin(), k.values().end()), vv(v.values().begin(), v.values().end());
    for (std::size_t c = 0; c < 4; ++c) {
        kv[1 * 4 + c] = 1e3;
        vv[3 * 4 + c] = -1e3;
    }
    const Tensor out = multi_head_attention(q, Tensor::matrix(5, 4, kv), Tensor::matrix(5, 4, vv), 2, 1, {&m, 1});
    for (std::size_t i = 0; i < base.size(); ++i) EXPECT_EQ(out.values()[i], base.values()[i]);
}

TEST(MultiHeadAttention, HeadsMustDivideWidth) {
    Tensor x = Tensor::zeros({2, 6});
    const AttentionMask m = AttentionMask::full(2, 2);
    EXPECT_THROW(multi_head_attention(x, x, x, 4, 1, {&m, 1}), ShapeError);
}

TEST(MultiHeadAttention, OneHeadOneSequenceMatchesScaledDot) {
    std::mt19937_64 rng(5);
    Tensor q = check::random_tensor({3, 4}, rng, -1, 1, false);
    Tensor k = check::random_tensor({5, 4}, rng, -1, 1, false);
    Tensor v = check::random_tensor({5, 2}, rng, -1, 1, false);
    const AttentionMask m = AttentionMask::key_padding(3, {true, true, false, true, true});
    const Tensor a = multi_head_attention(q, k, v, 1, 1, {&m, 1});
    // Direct evaluation.
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> s(5);
        double mx = -1e300, z = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < 4; ++c) dot += q.at(i, c) * k.at(j, c);
            s[j] = dot / 2.0;
            if (m.allowed(i, j)) mx = std::max(mx, s[j]);
        }
        for (std::size_t j = 0; j < 5; ++j) z += m.allowed(i, j) ? std::exp(s[j] - mx) : 0.0;
        for (std::size_t c = 0; c < 2; ++c) {
            double o = 0.0;
            for (std::size_t j = 0; j < 5; ++j)
                if (m.allowed(i, j)) o += std::exp(s[j] - mx) / z * v.at(j, c);
            EXPECT_NEAR(a.at(i, c), o, 1e-12);
        }
    }
}
