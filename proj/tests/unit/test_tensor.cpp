// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "support/oracles.hpp"
#include "tsflow/ops.hpp"
#include "tsflow/tensor.hpp"
#include "tsflow/tensor_io.hpp"

using namespace tsflow;
using namespace tsflow::testing;

TEST(Tensor, ShapeAndValueCountAgree) {
    Tensor t(Shape{2, 3, 4}, 1.5);
    EXPECT_EQ(t.numel(), 24u);
    EXPECT_EQ(t.rank(), 3u);
    EXPECT_EQ(t.dim(1), 3u);
    EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(Tensor, CopiesShareStorage) {
    Tensor a(Shape{2}, std::vector<double>{1, 2});
    Tensor b = a;
    b.data()[0] = 7;
    EXPECT_EQ(a.at(0), 7);
    Tensor c = a.detach();
    c.data()[1] = 9;
    EXPECT_EQ(a.at(1), 2);
}

TEST(Tensor, OperationResultsAreImmutable) {
    Tensor a = Tensor::parameter(Shape{2}, {1, 2});
    Tensor b = scale(a, 2.0);
    EXPECT_THROW(b.data(), std::logic_error);
}

TEST(Tensor, RequireFiniteRejectsNanAndInf) {
    Tensor ok(Shape{2}, std::vector<double>{1, 2});
    EXPECT_NO_THROW(require_finite(ok, "ok"));
    Tensor bad(Shape{2}, std::vector<double>{1, std::numeric_limits<double>::quiet_NaN()});
    EXPECT_THROW(require_finite(bad, "bad"), NonFiniteError);
    Tensor inf(Shape{1}, std::vector<double>{std::numeric_limits<double>::infinity()});
    EXPECT_THROW(require_finite(inf, "inf"), NonFiniteError);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    std::mt19937_64 rng(1);
    Tensor a = random_tensor({3, 3}, rng);
    Tensor eye(Shape{3, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1});
    EXPECT_EQ(values_of(matmul(eye, a)), values_of(a));
}

TEST(Matmul, HandComputedProduct) {
    Tensor a(Shape{2, 2}, std::vector<double>{1, 2, 3, 4});
    Tensor b(Shape{2, 1}, std::vector<double>{0, 1});
    Tensor c = matmul(a, b);
    EXPECT_EQ(c.shape(), (Shape{2, 1}));
    EXPECT_EQ(values_of(c), (std::vector<double>{2, 4}));
}

TEST(Matmul, BatchedMatchesNaiveLoops) {
    std::mt19937_64 rng(2);
    Tensor a = random_tensor({3, 4, 5}, rng);
    Tensor b = random_tensor({3, 5, 2}, rng);
    Tensor c = matmul(a, b);
    for (std::size_t i = 0; i < 3; ++i) {
        std::vector<double> av(a.values().begin() + i * 20, a.values().begin() + (i + 1) * 20);
        std::vector<double> bv(b.values().begin() + i * 10, b.values().begin() + (i + 1) * 10);
        const auto ref = naive_matmul(av, bv, 4, 5, 2);
        for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(c.at(i * 8 + j), ref[j], 1e-12);
    }
}

TEST(Matmul, SharedRightOperandBroadcastsOverBatch) {
    std::mt19937_64 rng(3);
    Tensor a = random_tensor({2, 3, 4}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    Tensor c = matmul(a, b);
    EXPECT_EQ(c.shape(), (Shape{2, 3, 5}));
    const auto ref = naive_matmul(values_of(a), values_of(b), 6, 4, 5);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(c.at(i), ref[i], 1e-12);
}

TEST(Matmul, MismatchReportsBothShapes) {
    Tensor a(Shape{2, 3}), b(Shape{4, 2});
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[4,2]"), std::string::npos) << msg;
    }
}

TEST(Matmul, GradientOfSumIsRowBroadcastOfColumnSums) {
    std::mt19937_64 rng(4);
    Tensor a = random_parameter({3, 4}, rng);
    Tensor b = random_tensor({4, 2}, rng);
    backward(sum(matmul(a, b)));
    const auto g = a.grad();
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(g[i * 4 + k], b.at(k * 2) + b.at(k * 2 + 1), 1e-12);
}

TEST(Softmax, UniformInputGivesUniformOutput) {
    Tensor s = softmax_lastdim(Tensor(Shape{3}, 0.0));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.at(i), 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitsDoNotOverflow) {
    Tensor s = softmax_lastdim(Tensor(Shape{2}, std::vector<double>{1000, 0}));
    EXPECT_EQ(s.at(0), 1.0);
    EXPECT_EQ(s.at(1), 0.0);
    EXPECT_TRUE(all_finite(s.values()));
}

TEST(Softmax, RowsAreDistributions) {
    std::mt19937_64 rng(5);
    Tensor s = softmax_lastdim(random_tensor({6, 7}, rng, -10, 10));
    for (std::size_t r = 0; r < 6; ++r) {
        double total = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
            EXPECT_GE(s.at(r * 7 + j), 0.0);
            EXPECT_LE(s.at(r * 7 + j), 1.0);
            total += s.at(r * 7 + j);
        }
        EXPECT_NEAR(total, 1.0, 1e-12);
    }
}

TEST(Softmax, EmptyTensorRejected) { EXPECT_THROW(softmax_lastdim(Tensor(Shape{0})), ShapeError); }

TEST(LayerNorm, ConstantSliceMapsToZero) {
    Tensor y = layer_norm(Tensor(Shape{3}, 5.0), 1e-6);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(y.at(i), 0.0);
}

TEST(LayerNorm, TwoPointSliceHasUnitVariance) {
    // mean 0, variance 1 -> x / sqrt(1 + eps)
    const double eps = 1e-6;
    Tensor y = layer_norm(Tensor(Shape{2}, std::vector<double>{1, -1}), eps);
    EXPECT_NEAR(y.at(0), 1.0 / std::sqrt(1.0 + eps), 1e-15);
    EXPECT_NEAR(y.at(1), -1.0 / std::sqrt(1.0 + eps), 1e-15);
}

TEST(LayerNorm, SlicesHaveZeroMeanUnitVariance) {
    std::mt19937_64 rng(6);
    Tensor y = layer_norm(random_tensor({4, 16}, rng), 1e-12);
    for (std::size_t r = 0; r < 4; ++r) {
        double mu = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 16; ++j) mu += y.at(r * 16 + j) / 16.0;
        for (std::size_t j = 0; j < 16; ++j) var += std::pow(y.at(r * 16 + j) - mu, 2) / 16.0;
        EXPECT_NEAR(mu, 0.0, 1e-12);
        EXPECT_NEAR(var, 1.0, 1e-9);
    }
}

TEST(LayerNorm, RejectsZeroWidthAndBadEps) {
    EXPECT_THROW(layer_norm(Tensor(Shape{2, 0}), 1e-6), ShapeError);
    EXPECT_THROW(layer_norm(Tensor(Shape{2, 2}), 0.0), std::invalid_argument);
}

TEST(Backward, SquareAtThreeGivesSix) {
    Tensor x = Tensor::parameter(Shape{}, {3.0});
    backward(sum(square(x)));
    EXPECT_EQ(x.grad()[0], 6.0);
}

TEST(Backward, MaskedSumGradientEqualsMask) {
    std::mt19937_64 rng(7);
    Tensor v = random_parameter({2, 3, 4, 4}, rng);
    Tensor m = random_mask({2, 1, 4, 4}, rng);
    backward(sum(mul(m, v)));
    const auto g = v.grad();
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < 16; ++p) EXPECT_EQ(g[(f * 3 + c) * 16 + p], m.at(f * 16 + p));
}

TEST(Backward, NonScalarLossRejected) {
    Tensor x = Tensor::parameter(Shape{2}, {1, 2});
    EXPECT_THROW(backward(scale(x, 2.0)), std::invalid_argument);
}

TEST(Backward, NonParticipatingLeafGetsZero) {
    Tensor x = Tensor::parameter(Shape{2}, {1, 2});
    Tensor unused = Tensor::parameter(Shape{3}, {1, 2, 3});
    backward(sum(x));
    EXPECT_EQ(unused.grad(), (std::vector<double>{0, 0, 0}));
    EXPECT_FALSE(unused.has_grad());
}

TEST(Backward, SharedSubexpressionAccumulates) {
    Tensor x = Tensor::parameter(Shape{}, {2.0});
    Tensor y = mul(x, x);         // x^2
    backward(sum(add(y, mul(y, x))));  // x^2 + x^3 -> 2x + 3x^2 = 16
    EXPECT_NEAR(x.grad()[0], 16.0, 1e-12);
}

TEST(Backward, NoGradGuardStopsRecording) {
    Tensor x = Tensor::parameter(Shape{2}, {1, 2});
    Tensor y;
    {
        NoGradGuard guard;
        EXPECT_FALSE(grad_enabled());
        y = scale(x, 3.0);
    }
    EXPECT_TRUE(grad_enabled());
    EXPECT_FALSE(y.requires_grad());
}

TEST(Broadcast, MaskChannelBroadcastMatchesLoop) {
    std::mt19937_64 rng(8);
    Tensor v = random_tensor({2, 3, 2, 2}, rng);
    Tensor m = random_mask({2, 1, 2, 2}, rng);
    Tensor out = mul(v, m);
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < 4; ++p)
                EXPECT_EQ(out.at((f * 3 + c) * 4 + p), v.at((f * 3 + c) * 4 + p) * m.at(f * 4 + p));
}

TEST(Broadcast, TrailingVectorAddsToEveryRow) {
    Tensor a(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    Tensor b(Shape{3}, std::vector<double>{10, 20, 30});
    EXPECT_EQ(values_of(add(a, b)), (std::vector<double>{11, 22, 33, 14, 25, 36}));
}

TEST(Broadcast, IncompatibleShapesRejected) {
    EXPECT_THROW(add(Tensor(Shape{2, 3}), Tensor(Shape{2})), ShapeError);
    EXPECT_THROW(mul(Tensor(Shape{2, 3}), Tensor(Shape{3, 3})), ShapeError);
}

TEST(ShapeOps, PermuteMatchesIndexArithmetic) {
    std::mt19937_64 rng(9);
    Tensor a = random_tensor({2, 3, 4}, rng);
    Tensor p = permute(a, {2, 0, 1});
    ASSERT_EQ(p.shape(), (Shape{4, 2, 3}));
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(p.at((k * 2 + i) * 3 + j), a.at((i * 3 + j) * 4 + k));
}

TEST(ShapeOps, ReshapeKeepsOrderAndChecksCount) {
    Tensor a(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    EXPECT_EQ(values_of(reshape(a, {3, 2})), values_of(a));
    EXPECT_THROW(reshape(a, {4, 2}), ShapeError);
}

TEST(Reductions, MeanAxisAveragesTheAxis) {
    Tensor a(Shape{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    EXPECT_EQ(values_of(mean_axis(a, 0)), (std::vector<double>{2.5, 3.5, 4.5}));
    EXPECT_EQ(values_of(mean_axis(a, 1)), (std::vector<double>{2, 5}));
    EXPECT_EQ(mean(a).item(), 3.5);
}

TEST(TensorIo, RoundTripIsBitExact) {
    std::mt19937_64 rng(10);
    Tensor a = random_tensor({2, 3, 5}, rng);
    Tensor b = decode_tensor(encode_tensor(a));
    EXPECT_EQ(b.shape(), a.shape());
    EXPECT_EQ(values_of(b), values_of(a));
}

TEST(TensorIo, HeaderIsJsonAndDataIsAligned) {
    Tensor a(Shape{3}, std::vector<double>{1, 2, 3});
    const std::string bytes = encode_tensor(a);
    std::uint64_t len = 0;
    for (int i = 7; i >= 0; --i) len = (len << 8) | static_cast<unsigned char>(bytes[i]);
    const std::string header = bytes.substr(8, len);
    EXPECT_NE(header.find("\"dtype\""), std::string::npos);
    EXPECT_NE(header.find("\"f64\""), std::string::npos);
    EXPECT_NE(header.find("\"byte_offset\""), std::string::npos);
    EXPECT_EQ((bytes.size() - 3 * 8) % 8, 0u);
}

TEST(TensorIo, TruncatedInputRejected) {
    const std::string bytes = encode_tensor(Tensor(Shape{4}, 1.0));
    EXPECT_THROW(decode_tensor(std::string_view(bytes).substr(0, bytes.size() - 3)), std::runtime_error);
    EXPECT_THROW(decode_tensor(std::string_view(bytes).substr(0, 4)), std::runtime_error);
}

TEST(TensorIo, TensorSetKeepsNamesInOrder) {
    const auto dir = std::filesystem::temp_directory_path() / "tsflow_tensor_set_test";
    std::filesystem::remove_all(dir);
    NamedTensors in{{"b.weight", Tensor(Shape{2}, 1.0)}, {"a.bias", Tensor(Shape{1, 2}, 2.0)}};
    save_tensor_set(dir, in);
    const NamedTensors out = load_tensor_set(dir);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].first, "b.weight");
    EXPECT_EQ(out[1].first, "a.bias");
    EXPECT_EQ(out[1].second.shape(), (Shape{1, 2}));
    std::filesystem::remove_all(dir);
}
