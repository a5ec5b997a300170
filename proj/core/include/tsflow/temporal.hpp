// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tsflow/nn.hpp"
#include "tsflow/tensor.hpp"

namespace tsflow {

// ---------------------------------------------------------------------------
// Date features
// ---------------------------------------------------------------------------

/// Sinusoidal features of an acquisition day: width/2 geometric frequencies whose
/// periods run from 2 days to 2 * span_days, interleaved as [sin, cos, sin, cos, ...].
std::vector<double> date_embed(int day, std::size_t width, double span_days);

/// Stacks date_embed for each day into a constant [days.size(), width] tensor.
Tensor date_embed_table(std::span<const int> days, std::size_t width, double span_days);

/// Learned mixing weights for absolute and query-relative date features.
struct DateEmbedParams {
    Tensor lambda_abs;    // [1], init 1
    Tensor lambda_delta;  // [1], init 0.1
    /// Drops the query-relative path entirely (lambda_delta fixed at zero).
    bool delta_disabled = false;
};

DateEmbedParams make_date_embed_params(ParameterStore& store, const std::string& prefix);

/// lambda_abs * phi(d_i) + lambda_delta * phi(d_i - d_q). Without a query date, or with the
/// relative path disabled, the second term is omitted. Returns [dates.size(), width].
Tensor combine_dates(std::span<const int> dates, std::optional<int> query_date, const DateEmbedParams& params,
                     std::size_t width, double span_days);

// ---------------------------------------------------------------------------
// Day-difference bucketing and relative bias
// ---------------------------------------------------------------------------

inline constexpr int kExactBucketRange = 8;     // |dd| <= 8 gets its own bucket
inline constexpr int kLogBucketsPerSign = 8;    // 7 log-spaced + 1 overflow
inline constexpr int kMaxBucketDistance = 256;  // start of the overflow bucket
inline constexpr int kNumBuckets = 2 * (kExactBucketRange + kLogBucketsPerSign) + 1;
inline constexpr int kCenterBucket = kExactBucketRange + kLogBucketsPerSign;
inline constexpr std::string_view kBucketSchemeVersion = "signed-log/exact8-log7-overflow256/v1";

/// Signed-logarithmic bucket id in [0, kNumBuckets). Total, monotone, and mirrored:
/// bucket(-dd) == 2 * kCenterBucket - bucket(dd).
int bucket_day_diff(int day_diff);

/// Per-head bias values indexed by bucket id.
struct BiasTable {
    Tensor weights;  // [heads, kNumBuckets]

    std::size_t heads() const { return weights.dim(0); }
};

BiasTable make_bias_table(ParameterStore& store, const std::string& name, std::size_t heads);

/// Bucket ids for every (query, key) date pair, row-major [q.size() * k.size()].
std::vector<int> bucket_ids(std::span<const int> dates_q, std::span<const int> dates_k);

/// B[h, i, k] = table[h, bucket(dates_q[i] - dates_k[k])], shape [heads, |q|, |k|].
Tensor relative_bias(std::span<const int> dates_q, std::span<const int> dates_k, const BiasTable& table);

// ---------------------------------------------------------------------------
// Rotary encoding over real dates
// ---------------------------------------------------------------------------

struct RopeConfig {
    double base = 1000.0;  // theta_f = scale * base^(-2f/d_h)
    double scale = 1.0;    // 0 disables rotation

    bool operator==(const RopeConfig&) const = default;
};

std::vector<double> rope_frequencies(std::size_t head_dim, const RopeConfig& cfg);
/// Angle table [dates.size() * head_dim/2] for rotate_pairs.
std::vector<double> rope_angles(std::span<const int> dates, std::size_t head_dim, const RopeConfig& cfg);

/// Rotates q[..., Lq, d_h] by dates_q and k[..., Lk, d_h] by dates_k.
std::pair<Tensor, Tensor> rope_rotate(const Tensor& q, const Tensor& k, std::span<const int> dates_q,
                                      std::span<const int> dates_k, const RopeConfig& cfg);

// ---------------------------------------------------------------------------
// Flow-time embedding
// ---------------------------------------------------------------------------

/// Sinusoidal features of 1000 * tau: [cos(w_0 t), ..., cos(w_{h-1} t), sin(w_0 t), ...].
std::vector<double> flow_time_features(double tau, std::size_t width);

/// psi(tau) = W2 * silu(W1 * features(tau) + b1) + b2
struct FlowTimeEmbed {
    Linear in;
    Linear out;
    std::size_t width = 0;

    Tensor operator()(double tau) const;
};

FlowTimeEmbed make_flow_time_embed(ParameterStore& store, const std::string& prefix, std::size_t width, Rng& rng);

}  // namespace tsflow
