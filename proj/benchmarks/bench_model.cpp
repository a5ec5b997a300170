// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "tsflow/flow.hpp"
#include "tsflow/sdt.hpp"
#include "tsflow/train.hpp"

using namespace tsflow;

namespace {

Tensor uniform(Shape shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = u(rng);
    return t;
}

Tensor cloud_mask(Shape shape, std::mt19937_64& rng) {
    std::bernoulli_distribution keep(0.6);
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = keep(rng) ? 1.0 : 0.0;
    return t;
}

TrainSample sample(const SdtConfig& c, std::size_t frames, std::size_t sar_frames, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    TrainSample s;
    s.y = uniform({frames, c.optical_channels, c.height, c.width}, rng);
    s.mask = cloud_mask({frames, 1, c.height, c.width}, rng);
    s.noise = uniform(s.y.shape(), rng);
    s.x = s.y;
    s.tau = 0.5;
    for (std::size_t i = 0; i < frames; ++i) s.dates.push_back(static_cast<int>(10 * i));
    s.sar = uniform({sar_frames, c.sar_channels, c.height, c.width}, rng);
    for (std::size_t i = 0; i < sar_frames; ++i) s.sar_dates.push_back(static_cast<int>(3 * i));
    return s;
}

SdtInput input_of(const TrainSample& s) {
    SdtInput in;
    in.z = s.x;
    in.mask = s.mask;
    in.tau = s.tau;
    in.optical_dates = s.dates;
    in.sar = s.sar;
    in.sar_dates = s.sar_dates;
    return in;
}

void BM_SdtForward(benchmark::State& state) {
    const SdtConfig c = SdtConfig::desk();
    Sdt model(c);
    const SdtInput in = input_of(sample(c, c.window, 2 * c.window, 7));
    NoGradGuard guard;
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(in));
}
BENCHMARK(BM_SdtForward)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
    const SdtConfig c = SdtConfig::desk();
    Sdt model(c);
    Adam adam(0.9, 0.999, 1e-8);
    std::vector<TrainSample> batch;
    for (std::int64_t i = 0; i < state.range(0); ++i)
        batch.push_back(sample(c, c.window, 2 * c.window, 100 + static_cast<std::uint64_t>(i)));
    for (auto _ : state) benchmark::DoNotOptimize(train_step(model, adam, batch, 1e-4));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Sample(benchmark::State& state) {
    const SdtConfig c = SdtConfig::desk();
    Sdt model(c);
    const TrainSample s = sample(c, c.window, 2 * c.window, 9);
    SamplerConfig sc;
    sc.steps = static_cast<std::size_t>(state.range(0));
    const Conditioning cond{s.dates, s.sar, s.sar_dates, std::nullopt};
    for (auto _ : state) benchmark::DoNotOptimize(ode_sample(s.x, s.mask, cond, model, sc, 1));
}
BENCHMARK(BM_Sample)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

}  // namespace
