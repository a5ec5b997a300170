// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/temporal.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tsflow/ops.hpp"

namespace tsflow {

std::vector<double> date_embed(int day, std::size_t width, double span_days) {
    if (width == 0 || width % 2 != 0) throw std::invalid_argument("date_embed: width must be even and positive");
    if (!(span_days >= 1.0)) throw std::invalid_argument("date_embed: span must be at least one day");
    const std::size_t half = width / 2;
    std::vector<double> out(width);
    for (std::size_t k = 0; k < half; ++k) {
        const double frac = half == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(half - 1);
        const double period = 2.0 * std::pow(span_days, frac);
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(day) / period;
        out[2 * k] = std::sin(phase);
        out[2 * k + 1] = std::cos(phase);
    }
    return out;
}

Tensor date_embed_table(std::span<const int> days, std::size_t width, double span_days) {
    std::vector<double> values;
    values.reserve(days.size() * width);
    for (int d : days) {
        auto row = date_embed(d, width, span_days);
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({days.size(), width}, std::move(values));
}

DateEmbedParams make_date_embed_params(ParameterStore& store, const std::string& prefix) {
    DateEmbedParams p;
    p.lambda_abs = store.add(prefix + ".lambda_abs", init_constant({1}, 1.0));
    p.lambda_delta = store.add(prefix + ".lambda_delta", init_constant({1}, 0.1));
    return p;
}

Tensor combine_dates(std::span<const int> dates, std::optional<int> query_date, const DateEmbedParams& params,
                     std::size_t width, double span_days) {
    Tensor out = mul(date_embed_table(dates, width, span_days), params.lambda_abs);
    if (query_date && !params.delta_disabled) {
        std::vector<int> rel(dates.size());
        for (std::size_t i = 0; i < dates.size(); ++i) rel[i] = dates[i] - *query_date;
        out = add(out, mul(date_embed_table(rel, width, span_days), params.lambda_delta));
    }
    return out;
}

int bucket_day_diff(int day_diff) {
    const int sign = day_diff < 0 ? -1 : 1;
    const long a = std::labs(static_cast<long>(day_diff));
    int offset;
    if (a <= kExactBucketRange) {
        offset = static_cast<int>(a);
    } else if (a >= kMaxBucketDistance) {
        offset = kExactBucketRange + kLogBucketsPerSign;
    } else {
        const double ratio = std::log(static_cast<double>(a) / kExactBucketRange) /
                             std::log(static_cast<double>(kMaxBucketDistance) / kExactBucketRange);
        int k = static_cast<int>(std::floor(ratio * (kLogBucketsPerSign - 1)));
        k = std::min(std::max(k, 0), kLogBucketsPerSign - 2);
        offset = kExactBucketRange + 1 + k;
    }
    return kCenterBucket + sign * offset;
}

BiasTable make_bias_table(ParameterStore& store, const std::string& name, std::size_t heads) {
    return BiasTable{store.add(name, init_zeros({heads, static_cast<std::size_t>(kNumBuckets)}))};
}

std::vector<int> bucket_ids(std::span<const int> dates_q, std::span<const int> dates_k) {
    std::vector<int> ids(dates_q.size() * dates_k.size());
    for (std::size_t i = 0; i < dates_q.size(); ++i)
        for (std::size_t k = 0; k < dates_k.size(); ++k)
            ids[i * dates_k.size() + k] = bucket_day_diff(dates_q[i] - dates_k[k]);
    return ids;
}

Tensor relative_bias(std::span<const int> dates_q, std::span<const int> dates_k, const BiasTable& table) {
    if (table.weights.rank() != 2 || table.weights.dim(1) != static_cast<std::size_t>(kNumBuckets))
        throw ShapeError("relative_bias: table must be [heads, " + std::to_string(kNumBuckets) + "], got " +
                         shape_str(table.weights.shape()));
    const auto ids = bucket_ids(dates_q, dates_k);
    return gather_bias(table.weights, ids, dates_q.size(), dates_k.size());
}

std::vector<double> rope_frequencies(std::size_t head_dim, const RopeConfig& cfg) {
    if (head_dim % 2 != 0) throw std::invalid_argument("rope: head dimension must be even");
    std::vector<double> freqs(head_dim / 2);
    for (std::size_t f = 0; f < freqs.size(); ++f)
        freqs[f] = cfg.scale * std::pow(cfg.base, -2.0 * static_cast<double>(f) / static_cast<double>(head_dim));
    return freqs;
}

std::vector<double> rope_angles(std::span<const int> dates, std::size_t head_dim, const RopeConfig& cfg) {
    const auto freqs = rope_frequencies(head_dim, cfg);
    std::vector<double> angles(dates.size() * freqs.size());
    for (std::size_t l = 0; l < dates.size(); ++l)
        for (std::size_t f = 0; f < freqs.size(); ++f)
            angles[l * freqs.size() + f] = freqs[f] * static_cast<double>(dates[l]);
    return angles;
}

std::pair<Tensor, Tensor> rope_rotate(const Tensor& q, const Tensor& k, std::span<const int> dates_q,
                                      std::span<const int> dates_k, const RopeConfig& cfg) {
    const std::size_t dq = q.shape().back();
    if (dq != k.shape().back()) throw ShapeError("rope_rotate: query/key head dims differ");
    if (dq % 2 != 0) throw ShapeError("rope_rotate: odd head dimension " + std::to_string(dq));
    return {rotate_pairs(q, rope_angles(dates_q, dq, cfg)), rotate_pairs(k, rope_angles(dates_k, dq, cfg))};
}

std::vector<double> flow_time_features(double tau, std::size_t width) {
    if (width == 0 || width % 2 != 0) throw std::invalid_argument("flow_time_features: width must be even");
    const std::size_t half = width / 2;
    const double t = 1000.0 * tau;
    std::vector<double> out(width);
    for (std::size_t k = 0; k < half; ++k) {
        const double w = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
        out[k] = std::cos(t * w);
        out[half + k] = std::sin(t * w);
    }
    return out;
}

Tensor FlowTimeEmbed::operator()(double tau) const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("flow_time_embed: tau must lie in [0, 1]");
    Tensor features({width}, flow_time_features(tau, width));
    return out(silu(in(features)));
}

FlowTimeEmbed make_flow_time_embed(ParameterStore& store, const std::string& prefix, std::size_t width, Rng& rng) {
    FlowTimeEmbed e;
    e.width = width;
    e.in = Linear{store.add(prefix + ".in.weight", init_normal({width, width}, 0.02, rng)),
                  store.add(prefix + ".in.bias", init_zeros({width}))};
    e.out = Linear{store.add(prefix + ".out.weight", init_normal({width, width}, 0.02, rng)),
                   store.add(prefix + ".out.bias", init_zeros({width}))};
    return e;
}

}  // namespace tsflow
