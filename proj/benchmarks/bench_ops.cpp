// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "tsflow/ops.hpp"
#include "tsflow/tensor.hpp"

using namespace tsflow;

namespace {

Tensor random(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n;
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = n(rng);
    return t;
}

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random({n, 64}, 1), b = random({64, 256}, 2);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * 64 * 256));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(512);

void BM_MatmulBackward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Tensor a = random({n, 64}, 1), b = random({64, 256}, 2);
    a.set_requires_grad(true);
    b.set_requires_grad(true);
    for (auto _ : state) {
        a.zero_grad();
        b.zero_grad();
        backward(sum(matmul(a, b)));
    }
}
BENCHMARK(BM_MatmulBackward)->Arg(128)->Arg(512);

void BM_Softmax(benchmark::State& state) {
    const Tensor x = random({256, static_cast<std::size_t>(state.range(0))}, 3);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(softmax_lastdim(x));
}
BENCHMARK(BM_Softmax)->Arg(16)->Arg(64);

void BM_LayerNorm(benchmark::State& state) {
    const Tensor x = random({static_cast<std::size_t>(state.range(0)), 64}, 4);
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(layer_norm(x, 1e-6));
}
BENCHMARK(BM_LayerNorm)->Arg(128)->Arg(1024);

}  // namespace

BENCHMARK_MAIN();
