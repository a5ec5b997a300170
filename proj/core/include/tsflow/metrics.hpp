// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tsflow/tensor.hpp"

namespace tsflow {

// Masked metrics take pred/truth as [T, C, H, W] with mask [T, 1, H, W], or a single
// frame [C, H, W] with mask [1, H, W]. Only entries where the mask is 1 are scored.

struct ErrorPair {
    double mae = 0.0;
    double rmse = 0.0;
    std::size_t entries = 0;  // scored scalar entries (pixels x bands)
};

ErrorPair mae_rmse_masked(const Tensor& pred, const Tensor& truth, const Tensor& mask);

struct SamResult {
    double degrees = 0.0;        // mean over scored pixels
    std::size_t pixels = 0;
    std::size_t zero_norm = 0;   // pixels skipped because a spectrum had zero norm
};

/// Per-pixel spectral angle, then a global mean over masked pixels.
SamResult sam(const Tensor& pred, const Tensor& truth, const Tensor& mask);

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr double kNormalizedPeak = 2.0;

double psnr_from_mse(double mse, double peak = kNormalizedPeak);
double psnr(const Tensor& pred, const Tensor& truth, const Tensor& mask, double peak = kNormalizedPeak);

struct SsimConfig {
    std::size_t window = 7;
    double k1 = 0.01;
    double k2 = 0.03;
    double range = kNormalizedPeak;
};

/// Mean SSIM over all fully contained windows of two [C, H, W] frames, per band then
/// averaged across bands.
double ssim(const Tensor& a, const Tensor& b, const SsimConfig& config = {});

struct NdviCounter {
    std::size_t zero_sum = 0;
};

/// (nir - red) / (nir + red) on a physical-unit [C, H, W] frame; [H, W] result.
Tensor ndvi(const Tensor& frame, std::size_t nir_band, std::size_t red_band, NdviCounter* counter = nullptr);

struct TrajectoryPoint {
    int date = 0;
    double mean = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;

    double iqr() const { return q75 - q25; }
};

/// Regional summary of [H, W] NDVI maps over the pixels where region_mask is nonzero.
std::vector<TrajectoryPoint> ndvi_trajectory(const std::vector<Tensor>& maps, std::span<const int> dates,
                                             const Tensor& region_mask);

struct RankCorrelation {
    double value = 0.0;
    bool flat = false;  // undefined because one side is constant

    std::string str() const;
};

/// Spearman correlation with average ranks for ties.
RankCorrelation spearman(std::span<const double> a, std::span<const double> b);
RankCorrelation trend_agreement(const std::vector<TrajectoryPoint>& generated,
                                const std::vector<TrajectoryPoint>& reference);

struct BaselineCounter {
    std::size_t unobserved_pixels = 0;  // pixel/band series with no observation, filled by band mean
};

/// Per-pixel, per-band linear interpolation over real dates from observed frames (mask 0),
/// nearest-value extrapolation at the edges. Observed entries are returned unchanged.
Tensor linear_baseline(const Tensor& x, const Tensor& mask, std::span<const int> dates,
                       BaselineCounter* counter = nullptr);
/// Same rule evaluated at an arbitrary day; returns [C, H, W].
Tensor linear_baseline_at(const Tensor& x, const Tensor& mask, std::span<const int> dates, int day,
                          BaselineCounter* counter = nullptr);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct MetricValues {
    double mae = 0.0;
    double rmse = 0.0;
    double sam_degrees = 0.0;
    double psnr_db = 0.0;
    double ssim = 0.0;
    std::size_t masked_pixels = 0;
    std::size_t ssim_frames = 0;
};

/// All five metrics for one sequence. SSIM averages over frames with a non-empty mask.
MetricValues evaluate_masked(const Tensor& pred, const Tensor& truth, const Tensor& mask);

struct SequenceMetrics {
    std::string id;
    MetricValues values;
};

struct MetricReport {
    std::string protocol;
    std::string method;
    std::vector<SequenceMetrics> rows;
    MetricValues aggregate;  // mean of the per-sequence rows
    std::map<std::string, std::string> metadata;

    void add(std::string id, const MetricValues& values);
    /// Recomputes the aggregate row.
    void finalize();
};

}  // namespace tsflow
