// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "tsflow/nn.hpp"
#include "tsflow/tensor.hpp"

namespace tsflow {

inline constexpr double kReflectanceMax = 8000.0;
inline constexpr double kDefaultFill = 1.0;  // normalized-space fill for unknown pixels
inline constexpr double kSarClip = 2.0;      // standardized SAR clip before halving

/// Optical frames [T, C, H, W] in [-1, 1] with strictly increasing acquisition days.
struct OpticalSequence {
    Tensor values;
    std::vector<int> dates;

    std::size_t frames() const { return dates.size(); }
};

/// SAR frames [Ts, Cs, H, W] in [-1, 1] with their own acquisition days.
struct SarSequence {
    Tensor values;
    std::vector<int> dates;

    std::size_t frames() const { return dates.size(); }
};

/// Binary missingness [T, 1, H, W]; 1 = unknown, 0 = observed.
struct MaskSequence {
    Tensor values;
};

struct ClipCounter {
    std::size_t below = 0;
    std::size_t above = 0;
};

/// Clips to [0, 8000] then maps v -> v / 4000 - 1.
Tensor normalize_optical(const Tensor& raw, ClipCounter* counter = nullptr);
/// (v + 1) * 4000, back to reflectance units.
Tensor denormalize_optical(const Tensor& normalized);

/// Per-channel standardize, clip to [-2, 2], halve. raw is [Ts, Cs, H, W].
Tensor normalize_sar(const Tensor& raw, std::span<const double> mean, std::span<const double> stddev);

void require_strictly_increasing(std::span<const int> dates, const char* what);
void require_binary_mask(const Tensor& mask, const char* what);

/// x = (1 - m) * y + m * v_fill with m broadcast over channels.
Tensor compose_observed(const Tensor& y, const Tensor& mask, double fill = kDefaultFill);

/// Marks frame q (0-based) entirely unknown: m'_q = 1 and x'_q = v_fill.
std::pair<Tensor, Tensor> mask_query_frame(const Tensor& x, const Tensor& mask, std::size_t q,
                                           double fill = kDefaultFill);

// ---------------------------------------------------------------------------
// Mask pool
// ---------------------------------------------------------------------------

struct MaskPoolConfig {
    std::size_t patterns = 64;
    double min_coverage = 0.1;
    double max_coverage = 0.7;
    std::size_t blobs = 3;
};

/// Cloud-like patterns [1, H, W]; none empty, none fully covered.
struct MaskPool {
    std::vector<Tensor> patterns;
};

MaskPool make_mask_pool(std::size_t height, std::size_t width, const MaskPoolConfig& config, Rng& rng);
/// Uniform draw from the pool.
Tensor sample_mask(const MaskPool& pool, Rng& rng);

// ---------------------------------------------------------------------------
// Windows and frame bookkeeping
// ---------------------------------------------------------------------------

struct WindowSpec {
    std::size_t length = 15;
    std::size_t stride = 1;

    void validate() const;
};

struct Window {
    std::size_t start = 0;
    std::size_t length = 0;

    bool contains(std::size_t frame) const { return frame >= start && frame < start + length; }
};

/// Windows of spec.length frames every spec.stride frames; the last window is aligned to
/// the sequence end so every frame is covered. Rejects sequences shorter than the window.
std::vector<Window> sliding_windows(std::size_t frames, const WindowSpec& spec);

/// Running per-frame mean of overlapping window outputs.
class WindowMerger {
public:
    explicit WindowMerger(Shape full_shape);
    void add(const Window& window, const Tensor& values);
    /// Unweighted mean; frames no window touched stay zero.
    Tensor result() const;
    std::size_t coverage(std::size_t frame) const { return counts_.at(frame); }

private:
    Shape shape_;
    std::vector<double> sum_;
    std::vector<std::size_t> counts_;
};

/// Frames [start, start + count) along axis 0.
Tensor slice_frames(const Tensor& t, std::size_t start, std::size_t count);
/// Selected frames along axis 0, in the given order.
Tensor gather_frames(const Tensor& t, std::span<const std::size_t> indices);
/// Inserts a constant-valued frame at position index along axis 0.
Tensor insert_frame(const Tensor& t, std::size_t index, double value);
Tensor remove_frame(const Tensor& t, std::size_t index);
/// One frame along axis 0 without the leading dimension.
Tensor frame_at(const Tensor& t, std::size_t index);

}  // namespace tsflow
