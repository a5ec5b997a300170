// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite differences (h = 1e-5, double precision) against reverse mode for every
// differentiable operation and for the composite building blocks of the model.

#include <gtest/gtest.h>

#include <random>

#include "support/oracles.hpp"
#include "tsflow/flow.hpp"
#include "tsflow/ops.hpp"
#include "tsflow/sdt.hpp"
#include "tsflow/temporal.hpp"

using namespace tsflow;
using namespace tsflow::testing;

namespace {

constexpr double kOpTolerance = 1e-4;

void expect_gradcheck(const std::function<Tensor()>& f, std::vector<Tensor> leaves, double tol = kOpTolerance) {
    const GradcheckResult r = check_gradients(f, std::move(leaves));
    EXPECT_GT(r.checked, 0u);
    EXPECT_LT(r.max_rel_error, tol) << r.worst;
}

}  // namespace

TEST(Gradcheck, Add) {
    std::mt19937_64 rng(1);
    Tensor a = random_parameter({3, 4}, rng), b = random_parameter({3, 4}, rng);
    expect_gradcheck(weighted_sum([&] { return add(a, b); }, {3, 4}, 1), {a, b});
}

TEST(Gradcheck, AddTrailingBroadcast) {
    std::mt19937_64 rng(2);
    Tensor a = random_parameter({2, 3, 4}, rng), b = random_parameter({4}, rng);
    expect_gradcheck(weighted_sum([&] { return add(a, b); }, {2, 3, 4}, 2), {a, b});
}

TEST(Gradcheck, Sub) {
    std::mt19937_64 rng(3);
    Tensor a = random_parameter({5}, rng), b = random_parameter({5}, rng);
    expect_gradcheck(weighted_sum([&] { return sub(a, b); }, {5}, 3), {a, b});
}

TEST(Gradcheck, MulWithChannelMaskBroadcast) {
    std::mt19937_64 rng(4);
    Tensor a = random_parameter({2, 3, 2, 2}, rng), m = random_parameter({2, 1, 2, 2}, rng);
    expect_gradcheck(weighted_sum([&] { return mul(a, m); }, {2, 3, 2, 2}, 4), {a, m});
}

TEST(Gradcheck, MulSameShape) {
    std::mt19937_64 rng(5);
    Tensor a = random_parameter({3, 3}, rng), b = random_parameter({3, 3}, rng);
    expect_gradcheck(weighted_sum([&] { return mul(a, b); }, {3, 3}, 5), {a, b});
}

TEST(Gradcheck, ScaleAndAddScalar) {
    std::mt19937_64 rng(6);
    Tensor a = random_parameter({4}, rng);
    expect_gradcheck(weighted_sum([&] { return add_scalar(scale(a, -1.7), 0.3); }, {4}, 6), {a});
}

TEST(Gradcheck, Square) {
    std::mt19937_64 rng(7);
    Tensor a = random_parameter({6}, rng);
    expect_gradcheck(weighted_sum([&] { return square(a); }, {6}, 7), {a});
}

TEST(Gradcheck, Gelu) {
    std::mt19937_64 rng(8);
    Tensor a = random_parameter({8}, rng);
    expect_gradcheck(weighted_sum([&] { return gelu(a); }, {8}, 8), {a});
}

TEST(Gradcheck, Silu) {
    std::mt19937_64 rng(9);
    Tensor a = random_parameter({8}, rng);
    expect_gradcheck(weighted_sum([&] { return silu(a); }, {8}, 9), {a});
}

TEST(Gradcheck, Matmul) {
    std::mt19937_64 rng(10);
    Tensor a = random_parameter({3, 4}, rng), b = random_parameter({4, 2}, rng);
    expect_gradcheck(weighted_sum([&] { return matmul(a, b); }, {3, 2}, 10), {a, b});
}

TEST(Gradcheck, MatmulBatchedWithSharedRight) {
    std::mt19937_64 rng(11);
    Tensor a = random_parameter({2, 3, 3, 4}, rng), b = random_parameter({3, 4, 2}, rng);
    expect_gradcheck(weighted_sum([&] { return matmul(a, b); }, {2, 3, 3, 2}, 11), {a, b});
}

TEST(Gradcheck, Linear) {
    std::mt19937_64 rng(12);
    Tensor x = random_parameter({2, 3, 5}, rng), w = random_parameter({5, 4}, rng), b = random_parameter({4}, rng);
    expect_gradcheck(weighted_sum([&] { return linear(x, w, b); }, {2, 3, 4}, 12), {x, w, b});
}

TEST(Gradcheck, LinearOnVector) {
    std::mt19937_64 rng(13);
    Tensor x = random_parameter({5}, rng), w = random_parameter({5, 3}, rng), b = random_parameter({3}, rng);
    expect_gradcheck(weighted_sum([&] { return linear(x, w, b); }, {3}, 13), {x, w, b});
}

TEST(Gradcheck, ReshapePermuteTranspose) {
    std::mt19937_64 rng(14);
    Tensor a = random_parameter({2, 3, 4}, rng);
    expect_gradcheck(weighted_sum([&] { return transpose_last(permute(reshape(a, {4, 3, 2}), {1, 0, 2})); },
                                  {3, 2, 4}, 14),
                     {a});
}

TEST(Gradcheck, SoftmaxRandomFourVector) {
    std::mt19937_64 rng(15);
    Tensor a = random_parameter({4}, rng);
    const GradcheckResult r = check_gradients(weighted_sum([&] { return softmax_lastdim(a); }, {4}, 15), {a});
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Gradcheck, SoftmaxRows) {
    std::mt19937_64 rng(16);
    Tensor a = random_parameter({3, 5}, rng);
    expect_gradcheck(weighted_sum([&] { return softmax_lastdim(a); }, {3, 5}, 16), {a});
}

TEST(Gradcheck, LayerNormTwoByEight) {
    std::mt19937_64 rng(17);
    Tensor a = random_parameter({2, 8}, rng);
    const GradcheckResult r = check_gradients(weighted_sum([&] { return layer_norm(a, 1e-6); }, {2, 8}, 17), {a});
    EXPECT_LT(r.max_rel_error, 1e-5) << r.worst;
}

TEST(Gradcheck, SumMeanMeanAxis) {
    std::mt19937_64 rng(18);
    Tensor a = random_parameter({3, 4, 2}, rng);
    expect_gradcheck([&] { return add(sum(square(a)), mean(a)); }, {a});
    expect_gradcheck(weighted_sum([&] { return mean_axis(a, 1); }, {3, 2}, 18), {a});
}

TEST(Gradcheck, GatherBias) {
    std::mt19937_64 rng(19);
    Tensor table = random_parameter({2, kNumBuckets}, rng);
    const std::vector<int> dates{0, 3, 40, 41};
    const std::vector<int> ids = bucket_ids(dates, dates);
    expect_gradcheck(weighted_sum([&] { return gather_bias(table, ids, 4, 4); }, {2, 4, 4}, 19), {table});
}

TEST(Gradcheck, RotatePairs) {
    std::mt19937_64 rng(20);
    Tensor x = random_parameter({2, 3, 4}, rng);
    const std::vector<int> dates{5, 17, 200};
    const auto angles = rope_angles(dates, 4, RopeConfig{});
    expect_gradcheck(weighted_sum([&] { return rotate_pairs(x, angles); }, {2, 3, 4}, 20), {x});
}

TEST(Gradcheck, FlowTimeEmbedding) {
    ParameterStore store;
    Rng rng(21);
    FlowTimeEmbed psi = make_flow_time_embed(store, "psi", 16, rng);
    std::vector<Tensor> leaves;
    for (const auto& n : store.names()) leaves.push_back(store.get(n));
    const GradcheckResult r = check_gradients(weighted_sum([&] { return psi(0.37); }, {16}, 21), leaves);
    EXPECT_LT(r.max_rel_error, 1e-5) << r.worst;
}

TEST(Gradcheck, CombineDatesThroughLambdas) {
    ParameterStore store;
    DateEmbedParams p = make_date_embed_params(store, "dates");
    const std::vector<int> days{0, 14, 90};
    expect_gradcheck(weighted_sum([&] { return combine_dates(days, 40, p, 8, 365.0); }, {3, 8}, 22),
                     {p.lambda_abs, p.lambda_delta});
}

TEST(Gradcheck, AdaLnGatedBlock) {
    std::mt19937_64 trng(23);
    ParameterStore store;
    Rng rng(23);
    AdaLnProjection proj{make_linear(store, "g", 8, 8, rng), make_linear(store, "b", 8, 8, rng),
                         make_linear(store, "gate", 8, 8, rng)};
    Linear f = make_linear(store, "f", 8, 8, rng);
    Tensor x = random_parameter({3, 8}, trng);
    Tensor c = random_parameter({8}, trng);
    std::vector<Tensor> leaves{x, c};
    for (const auto& n : store.names()) leaves.push_back(store.get(n));
    expect_gradcheck(weighted_sum([&] { return adaln_modulate(x, c, proj, [&](const Tensor& h) { return gelu(f(h)); }); },
                                  {3, 8}, 23),
                     leaves);
}

namespace {

AttentionWeights make_attention(ParameterStore& store, const std::string& p, std::size_t m, Rng& rng) {
    return {make_linear(store, p + ".q", m, m, rng), make_linear(store, p + ".k", m, m, rng),
            make_linear(store, p + ".v", m, m, rng), make_linear(store, p + ".o", m, m, rng)};
}

std::vector<Tensor> all_params(const ParameterStore& store) {
    std::vector<Tensor> out;
    for (const auto& n : store.names()) out.push_back(store.get(n));
    return out;
}

}  // namespace

TEST(Gradcheck, SpatialSelfAttention) {
    ParameterStore store;
    Rng rng(24);
    auto w = make_attention(store, "a", 8, rng);
    std::mt19937_64 trng(24);
    Tensor x = random_parameter({2, 4, 8}, trng);
    auto leaves = all_params(store);
    leaves.push_back(x);
    expect_gradcheck(weighted_sum([&] { return spatial_self_attention(x, w, 2); }, {2, 4, 8}, 24), leaves);
}

TEST(Gradcheck, TemporalSelfAttentionWithBiasAndRope) {
    ParameterStore store;
    Rng rng(25);
    auto w = make_attention(store, "a", 8, rng);
    BiasTable table = make_bias_table(store, "bias", 2);
    std::mt19937_64 trng(25);
    {
        auto d = table.weights.data();
        for (double& v : d) v = std::uniform_real_distribution<double>(-1, 1)(trng);
    }
    Tensor x = random_parameter({3, 4, 8}, trng);
    const std::vector<int> dates{0, 11, 50};
    auto leaves = all_params(store);
    leaves.push_back(x);
    expect_gradcheck(
        weighted_sum([&] { return temporal_self_attention(x, dates, w, 2, &table, RopeConfig{}); }, {3, 4, 8}, 25),
        leaves);
}

TEST(Gradcheck, SpatialCrossAttention) {
    ParameterStore store;
    Rng rng(26);
    auto w = make_attention(store, "a", 8, rng);
    std::mt19937_64 trng(26);
    Tensor opt = random_parameter({2, 4, 8}, trng);
    Tensor sar = random_parameter({3, 4, 8}, trng);
    auto leaves = all_params(store);
    leaves.push_back(opt);
    leaves.push_back(sar);
    expect_gradcheck(weighted_sum([&] { return spatial_cross_attention(opt, sar, w, 2); }, {2, 4, 8}, 26), leaves);
}

TEST(Gradcheck, TemporalCrossAttention) {
    ParameterStore store;
    Rng rng(27);
    auto w = make_attention(store, "a", 8, rng);
    BiasTable table = make_bias_table(store, "bias", 2);
    std::mt19937_64 trng(27);
    {
        auto d = table.weights.data();
        for (double& v : d) v = std::uniform_real_distribution<double>(-1, 1)(trng);
    }
    Tensor opt = random_parameter({2, 4, 8}, trng);
    Tensor sar = random_parameter({3, 4, 8}, trng);
    const std::vector<int> d_opt{3, 40}, d_sar{0, 12, 36};
    auto leaves = all_params(store);
    leaves.push_back(opt);
    leaves.push_back(sar);
    expect_gradcheck(
        weighted_sum([&] { return temporal_cross_attention(opt, sar, d_opt, d_sar, w, 2, &table); }, {2, 4, 8}, 27),
        leaves);
}

TEST(Gradcheck, MaskedLossGatesObservedEntries) {
    std::mt19937_64 rng(28);
    Tensor v = random_parameter({2, 2, 3, 3}, rng);
    Tensor target = random_tensor({2, 2, 3, 3}, rng);
    Tensor m = random_mask({2, 1, 3, 3}, rng);
    expect_gradcheck([&] { return masked_fm_loss(v, target, m); }, {v});
    v.zero_grad();
    backward(masked_fm_loss(v, target, m));
    const auto g = v.grad();
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t p = 0; p < 9; ++p)
                if (m.at(f * 9 + p) == 0.0) EXPECT_EQ(g[(f * 2 + c) * 9 + p], 0.0);
}
