// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "support/oracles.hpp"
#include "tsflow/checkpoint.hpp"
#include "tsflow/flow.hpp"
#include "tsflow/sdt.hpp"

using namespace tsflow;
using namespace tsflow::testing;
namespace fs = std::filesystem;

namespace {

// Moves every parameter off its initial value so zero-initialized gates and heads stop
// hiding the rest of the network.
void randomize(Sdt& model, std::uint64_t seed, double amplitude = 0.3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    for (const auto& name : model.params().names())
        for (double& v : model.params().get(name).data()) v = u(rng);
}

SdtInput tiny_input(const SdtConfig& c, std::size_t t, std::size_t ts, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    SdtInput in;
    in.z = random_tensor({t, c.optical_channels, c.height, c.width}, rng, -1.0, 1.0);
    in.mask = random_mask({t, 1, c.height, c.width}, rng);
    in.tau = 0.37;
    for (std::size_t i = 0; i < t; ++i) in.optical_dates.push_back(static_cast<int>(3 + 11 * i));
    if (ts > 0) {
        in.sar = random_tensor({ts, c.sar_channels, c.height, c.width}, rng, -1.0, 1.0);
        for (std::size_t i = 0; i < ts; ++i) in.sar_dates.push_back(static_cast<int>(7 * i));
    }
    return in;
}

AttentionWeights random_attention(std::size_t m, std::mt19937_64& rng) {
    auto lin = [&] { return Linear{random_tensor({m, m}, rng, -0.5, 0.5), random_tensor({m}, rng, -0.5, 0.5)}; };
    return AttentionWeights{lin(), lin(), lin(), lin()};
}

// Plain-loop multi-head attention over rows of q_src [Lq, M] and kv_src [Lk, M].
std::vector<double> attention_oracle(const Tensor& q_src, const Tensor& kv_src, const AttentionWeights& w,
                                     std::size_t heads, const std::vector<double>* bias) {
    const std::size_t lq = q_src.dim(0), lk = kv_src.dim(0), m = q_src.dim(1), dh = m / heads;
    auto project = [&](const Tensor& x, const Linear& l, std::size_t rows) {
        std::vector<double> out = naive_matmul(values_of(x), values_of(l.weight), rows, m, m);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < m; ++j) out[r * m + j] += l.bias.at(j);
        return out;
    };
    const auto q = project(q_src, w.q, lq), k = project(kv_src, w.k, lk), v = project(kv_src, w.v, lk);
    std::vector<double> ctx(lq * m, 0.0);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < lq; ++i) {
            std::vector<double> s(lk);
            double mx = -1e300;
            for (std::size_t j = 0; j < lk; ++j) {
                double d = 0.0;
                for (std::size_t e = 0; e < dh; ++e) d += q[i * m + h * dh + e] * k[j * m + h * dh + e];
                s[j] = d / std::sqrt(static_cast<double>(dh)) + (bias ? (*bias)[(h * lq + i) * lk + j] : 0.0);
                mx = std::max(mx, s[j]);
            }
            double z = 0.0;
            for (double& x : s) z += (x = std::exp(x - mx));
            for (std::size_t j = 0; j < lk; ++j)
                for (std::size_t e = 0; e < dh; ++e) ctx[i * m + h * dh + e] += s[j] / z * v[j * m + h * dh + e];
        }
    auto out = naive_matmul(ctx, values_of(w.o.weight), lq, m, m);
    for (std::size_t r = 0; r < lq; ++r)
        for (std::size_t j = 0; j < m; ++j) out[r * m + j] += w.o.bias.at(j);
    return out;
}

}  // namespace

TEST(Patchify, FeatureOrderIsChannelRowColumn) {
    std::vector<double> v(1 * 2 * 4 * 4);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    const Tensor frames(Shape{1, 2, 4, 4}, v);
    const Tensor tokens = patchify(frames, 2);
    ASSERT_EQ(tokens.shape(), (Shape{1, 4, 8}));
    // Token 1 is grid cell (0, 1): rows 0-1, columns 2-3.
    const std::vector<double> expect{2, 3, 6, 7, 18, 19, 22, 23};
    for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(tokens.at(8 + j), expect[j]);
}

TEST(Patchify, UnpatchifyInverts) {
    std::mt19937_64 rng(1);
    const Tensor f = random_tensor({3, 2, 8, 4}, rng);
    EXPECT_EQ(values_of(unpatchify(patchify(f, 2), 2, 8, 4, 2)), values_of(f));
    EXPECT_THROW(patchify(f, 3), ShapeError);
}

TEST(PositionEmbed, RowsAreDistinctAndBounded) {
    const Tensor p = spatial_pos_embed(4, 5, 16);
    std::set<std::vector<double>> rows;
    for (std::size_t r = 0; r < 20; ++r) {
        std::vector<double> row;
        for (std::size_t j = 0; j < 16; ++j) row.push_back(p.at(r * 16 + j));
        rows.insert(row);
        for (double x : row) EXPECT_LE(std::abs(x), 1.0);
    }
    EXPECT_EQ(rows.size(), 20u);
}

TEST(AdaLn, ZeroGateIsIdentity) {
    std::mt19937_64 rng(2);
    const std::size_t m = 8;
    const Tensor x = random_tensor({3, m}, rng), c = random_tensor({m}, rng);
    AdaLnProjection proj{Linear{random_tensor({m, m}, rng), random_tensor({m}, rng)},
                         Linear{random_tensor({m, m}, rng), random_tensor({m}, rng)},
                         Linear{Tensor(Shape{m, m}, 0.0), Tensor(Shape{m}, 0.0)}};
    const Tensor out = adaln_modulate(x, c, proj, [](const Tensor& h) { return scale(h, 5.0); });
    EXPECT_EQ(values_of(out), values_of(x));
}

TEST(AdaLn, UnitGateWithZeroModulationAddsNormalizedSublayer) {
    std::mt19937_64 rng(3);
    const std::size_t m = 4;
    const Tensor x = random_tensor({2, m}, rng), c(Shape{m}, 0.0);
    AdaLnProjection proj{Linear{Tensor(Shape{m, m}, 0.0), Tensor(Shape{m}, 0.0)},
                         Linear{Tensor(Shape{m, m}, 0.0), Tensor(Shape{m}, 0.0)},
                         Linear{Tensor(Shape{m, m}, 0.0), Tensor(Shape{m}, 1.0)}};
    const Tensor out = adaln_modulate(x, c, proj, [](const Tensor& h) { return h; });
    const Tensor expect = add(x, layer_norm(x, 1e-6));
    EXPECT_LT(max_abs_diff(out, expect), 1e-14);
}

TEST(Attention, MatchesPlainLoopOracle) {
    std::mt19937_64 rng(4);
    const std::size_t m = 8, heads = 2;
    const AttentionWeights w = random_attention(m, rng);
    const Tensor q = random_tensor({5, m}, rng), kv = random_tensor({3, m}, rng);
    const Tensor bias = random_tensor({heads, 5, 3}, rng);
    const auto b = values_of(bias);
    EXPECT_LT(max_abs_diff(multihead_attention(q, kv, w, heads), Tensor(Shape{5, m}, attention_oracle(q, kv, w, heads, nullptr))),
              1e-12);
    EXPECT_LT(max_abs_diff(multihead_attention(q, kv, w, heads, &bias), Tensor(Shape{5, m}, attention_oracle(q, kv, w, heads, &b))),
              1e-12);
}

TEST(Attention, ProbabilitiesAreRowStochastic) {
    std::mt19937_64 rng(5);
    const AttentionWeights w = random_attention(8, rng);
    const Tensor q = random_tensor({2, 4, 8}, rng);
    Tensor probs;
    multihead_attention(q, q, w, 2, nullptr, nullptr, nullptr, &probs);
    ASSERT_EQ(probs.shape(), (Shape{2, 2, 4, 4}));
    for (std::size_t r = 0; r < 16; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < 4; ++j) s += probs.at(r * 4 + j);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Attention, HugeBiasSelectsOneKey) {
    std::mt19937_64 rng(6);
    const std::size_t m = 4;
    const AttentionWeights w = random_attention(m, rng);
    const Tensor q = random_tensor({1, m}, rng), kv = random_tensor({3, m}, rng);
    std::vector<double> b(3, 0.0);
    b[1] = 1e4;
    const Tensor bias(Shape{1, 1, 3}, b);
    const Tensor out = multihead_attention(q, kv, w, 1, &bias);
    // Output is then o(v(kv[1])).
    const Tensor v1 = w.o(w.v(reshape(slice_frames(kv, 1, 1), {m})));
    EXPECT_LT(max_abs_diff(reshape(out, {m}), v1), 1e-10);
}

TEST(TemporalSelfAttention, EquivariantToFramePermutationWithDates) {
    std::mt19937_64 rng(7);
    ParameterStore store;
    BiasTable table = make_bias_table(store, "bias", 2);
    for (double& v : table.weights.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
    const AttentionWeights w = random_attention(8, rng);
    const Tensor tokens = random_tensor({4, 3, 8}, rng);
    const std::vector<int> dates{5, 30, 31, 200};
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    std::vector<int> pd;
    for (std::size_t i : perm) pd.push_back(dates[i]);
    const Tensor a = temporal_self_attention(tokens, dates, w, 2, &table, RopeConfig{});
    const Tensor b = temporal_self_attention(gather_frames(tokens, perm), pd, w, 2, &table, RopeConfig{});
    EXPECT_LT(max_abs_diff(b, gather_frames(a, perm)), 1e-12);
}

TEST(TemporalSelfAttention, CommonDateShiftWithoutBiasLeavesOutputUnchanged) {
    std::mt19937_64 rng(8);
    const AttentionWeights w = random_attention(8, rng);
    const Tensor tokens = random_tensor({3, 2, 8}, rng);
    const std::vector<int> d{0, 12, 40}, shifted{100, 112, 140};
    EXPECT_LT(max_abs_diff(temporal_self_attention(tokens, d, w, 2, nullptr, RopeConfig{}),
                           temporal_self_attention(tokens, shifted, w, 2, nullptr, RopeConfig{})),
              1e-10);
}

TEST(CrossAttention, NoSarGivesZeros) {
    std::mt19937_64 rng(9);
    const AttentionWeights w = random_attention(8, rng);
    const Tensor opt = random_tensor({2, 3, 8}, rng);
    const std::vector<int> d{1, 2}, none;
    const Tensor sc = spatial_cross_attention(opt, Tensor(), w, 2);
    for (double v : sc.values()) EXPECT_EQ(v, 0.0);
    const Tensor tc = temporal_cross_attention(opt, Tensor(), d, none, w, 2, nullptr);
    for (double v : tc.values()) EXPECT_EQ(v, 0.0);
}

TEST(CrossAttention, SpatialUsesTimeMeanOfSar) {
    std::mt19937_64 rng(10);
    const AttentionWeights w = random_attention(8, rng);
    const Tensor opt = random_tensor({2, 3, 8}, rng), sar = random_tensor({4, 3, 8}, rng);
    const Tensor pooled = mean_axis(sar, 0);
    const Tensor via_mean = spatial_cross_attention(opt, reshape(pooled, {1, 3, 8}), w, 2);
    EXPECT_LT(max_abs_diff(spatial_cross_attention(opt, sar, w, 2), via_mean), 1e-12);
}

TEST(Sdt, OutputIsZeroAtInitialization) {
    const SdtConfig c = SdtConfig::tiny();
    Sdt model(c);
    const Tensor v = model.forward(tiny_input(c, 3, 4, 11));
    EXPECT_EQ(v.shape(), (Shape{3, c.optical_channels, c.height, c.width}));
    for (double x : v.values()) EXPECT_EQ(x, 0.0);
}

TEST(Sdt, ParameterCountMatchesStore) {
    for (const SdtConfig& c : {SdtConfig::tiny(), SdtConfig::desk(), SdtConfig::reference()}) {
        Sdt model(c);
        EXPECT_EQ(model.params().scalar_count(), Sdt::parameter_count(c));
    }
    SdtConfig no_mask = SdtConfig::tiny();
    no_mask.mask_channel = false;
    EXPECT_EQ(Sdt(no_mask).params().scalar_count(), Sdt::parameter_count(no_mask));
}

TEST(Sdt, SameSeedSameWeights) {
    Sdt a(SdtConfig::tiny()), b(SdtConfig::tiny());
    for (const auto& n : a.params().names()) EXPECT_EQ(values_of(a.params().get(n)), values_of(b.params().get(n))) << n;
}

TEST(Sdt, AcceptsAnyFrameCountAndSarFreeInput) {
    const SdtConfig c = SdtConfig::tiny();
    Sdt model(c);
    randomize(model, 12);
    for (std::size_t t : {1u, 3u, 5u}) {
        const Tensor v = model.forward(tiny_input(c, t, 0, 13));
        EXPECT_EQ(v.dim(0), t);
        require_finite(v, "test");
    }
}

TEST(Sdt, DeterministicForward) {
    const SdtConfig c = SdtConfig::tiny();
    Sdt model(c);
    randomize(model, 14);
    const SdtInput in = tiny_input(c, 3, 2, 15);
    EXPECT_EQ(values_of(model.forward(in)), values_of(model.forward(in)));
}

TEST(Sdt, MaskAndQueryDateAndSarAllReachTheOutput) {
    const SdtConfig c = SdtConfig::tiny();
    Sdt model(c);
    randomize(model, 16);
    const SdtInput base = tiny_input(c, 3, 2, 17);
    const Tensor ref = model.forward(base);
    SdtInput flipped = base;
    flipped.mask = add_scalar(scale(base.mask, -1.0), 1.0);
    EXPECT_GT(max_abs_diff(model.forward(flipped), ref), 1e-6);
    SdtInput queried = base;
    queried.query_date = base.optical_dates[1];
    EXPECT_GT(max_abs_diff(model.forward(queried), ref), 1e-6);
    SdtInput no_sar = base;
    no_sar.sar = Tensor();
    no_sar.sar_dates.clear();
    EXPECT_GT(max_abs_diff(model.forward(no_sar), ref), 1e-6);
}

TEST(Sdt, InputValidation) {
    const SdtConfig c = SdtConfig::tiny();
    Sdt model(c);
    SdtInput in = tiny_input(c, 3, 2, 18);
    in.optical_dates.pop_back();
    EXPECT_THROW(model.forward(in), ShapeError);
    in = tiny_input(c, 3, 2, 18);
    in.tau = 1.5;
    EXPECT_THROW(model.forward(in), std::invalid_argument);
    in = tiny_input(c, 3, 2, 18);
    in.z.data()[0] = std::nan("");
    EXPECT_THROW(model.forward(in), NonFiniteError);
}

TEST(Sdt, ConfigValidation) {
    SdtConfig c = SdtConfig::tiny();
    c.hidden = 18;  // not divisible by 4
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = SdtConfig::tiny();
    c.height = 9;
    EXPECT_THROW(Sdt{c}, std::invalid_argument);
}

TEST(Ablation, SpatialOnlyFusionIgnoresTemporalCrossWeights) {
    SdtConfig c = SdtConfig::tiny();
    c.ablation.spatial_only_fusion = true;
    Sdt model(c);
    randomize(model, 19);
    EXPECT_FALSE(model.params().trainable("blocks.0.temporal_cross.q.weight"));
    EXPECT_FALSE(model.params().trainable("blocks.0.temporal_cross.bias_table"));
    const SdtInput in = tiny_input(c, 3, 2, 20);
    const Tensor ref = model.forward(in);
    for (double& v : model.params().get("blocks.0.temporal_cross.v.weight").data()) v += 1.0;
    EXPECT_EQ(values_of(model.forward(in)), values_of(ref));
}

TEST(Ablation, NoRelBiasIgnoresBiasTables) {
    SdtConfig c = SdtConfig::tiny();
    c.ablation.no_rel_bias = true;
    Sdt model(c);
    randomize(model, 21);
    EXPECT_FALSE(model.params().trainable("blocks.0.temporal_self.bias_table"));
    const SdtInput in = tiny_input(c, 3, 2, 22);
    const Tensor ref = model.forward(in);
    for (double& v : model.params().get("blocks.0.temporal_self.bias_table").data()) v += 3.0;
    for (double& v : model.params().get("blocks.0.temporal_cross.bias_table").data()) v -= 2.0;
    EXPECT_EQ(values_of(model.forward(in)), values_of(ref));
}

TEST(Ablation, LambdaDeltaZeroMakesQueryDateIrrelevant) {
    SdtConfig c = SdtConfig::tiny();
    c.ablation.lambda_delta_zero = true;
    Sdt model(c);
    randomize(model, 23);
    model.params().get("dates.lambda_delta").data()[0] = 0.0;
    EXPECT_FALSE(model.params().trainable("dates.lambda_delta"));
    SdtInput in = tiny_input(c, 3, 2, 24);
    const Tensor ref = model.forward(in);
    in.query_date = 20;
    EXPECT_EQ(values_of(model.forward(in)), values_of(ref));
}

TEST(Checkpoint, RoundTripPreservesForward) {
    SdtConfig c = SdtConfig::tiny();
    c.ablation.no_rel_bias = true;
    c.init_seed = 5;
    Sdt model(c);
    randomize(model, 25);
    const fs::path dir = fs::temp_directory_path() / "tsflow_sdt_ckpt";
    fs::remove_all(dir);
    save_checkpoint(dir, model);
    const Sdt loaded = load_model(dir);
    EXPECT_EQ(loaded.config(), c);
    const SdtInput in = tiny_input(c, 3, 2, 26);
    EXPECT_EQ(values_of(loaded.forward(in)), values_of(model.forward(in)));
    EXPECT_FALSE(loaded.params().trainable("blocks.0.temporal_self.bias_table"));
    fs::remove_all(dir);
}

TEST(Checkpoint, ConfigJsonRoundTripAndUnknownKeys) {
    SdtConfig c = SdtConfig::desk();
    c.ablation.spatial_only_fusion = true;
    c.rope.scale = 0.5;
    EXPECT_EQ(sdt_config_from_json(sdt_config_to_json(c)), c);
    EXPECT_THROW(sdt_config_from_json(R"({"hiden": 32})"), std::invalid_argument);
}

TEST(SdtGradcheck, TinyEndToEnd) {
    const SdtConfig c = SdtConfig::tiny();
    Sdt model(c);
    randomize(model, 27, 0.2);
    const SdtInput in = tiny_input(c, 3, 2, 28);
    std::mt19937_64 rng(29);
    const Tensor target = random_tensor(in.z.shape(), rng);
    std::vector<Tensor> leaves;
    for (const auto& n : model.params().names()) leaves.push_back(model.params().get(n));
    const auto loss = [&] { return masked_fm_loss(model.forward(in), target, in.mask); };
    const auto r = check_gradients(loss, leaves, 1e-5, 25, 30);
    EXPECT_EQ(r.checked, 25u);
    EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}
