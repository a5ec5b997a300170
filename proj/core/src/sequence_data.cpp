// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/sequence_data.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tsflow {

namespace {

std::size_t frame_size(const Tensor& t) {
    if (t.rank() == 0) throw ShapeError("frame op: scalar tensor has no frames");
    return t.dim(0) == 0 ? 0 : t.numel() / t.dim(0);
}

// Validates y [T, C, H, W] against m [T, 1, H, W].
void check_mask_shape(const Tensor& y, const Tensor& mask, const char* what) {
    if (y.rank() != 4 || mask.rank() != 4 || mask.dim(0) != y.dim(0) || mask.dim(1) != 1 ||
        mask.dim(2) != y.dim(2) || mask.dim(3) != y.dim(3))
        throw ShapeError(std::string(what) + ": mask " + shape_str(mask.shape()) + " incompatible with " +
                         shape_str(y.shape()));
}

}  // namespace

Tensor normalize_optical(const Tensor& raw, ClipCounter* counter) {
    std::vector<double> out(raw.numel());
    auto in = raw.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        double v = in[i];
        if (std::isnan(v)) throw NonFiniteError("normalize_optical: NaN reflectance");
        if (v < 0.0) {
            if (counter) ++counter->below;
            v = 0.0;
        } else if (v > kReflectanceMax) {
            if (counter) ++counter->above;
            v = kReflectanceMax;
        }
        out[i] = v / (kReflectanceMax / 2.0) - 1.0;
    }
    return Tensor(raw.shape(), std::move(out));
}

Tensor denormalize_optical(const Tensor& normalized) {
    std::vector<double> out(normalized.numel());
    auto in = normalized.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (in[i] + 1.0) * (kReflectanceMax / 2.0);
    return Tensor(normalized.shape(), std::move(out));
}

Tensor normalize_sar(const Tensor& raw, std::span<const double> mean, std::span<const double> stddev) {
    if (raw.rank() != 4) throw ShapeError("normalize_sar: expected [Ts, Cs, H, W], got " + shape_str(raw.shape()));
    const std::size_t channels = raw.dim(1);
    if (mean.size() != channels || stddev.size() != channels)
        throw std::invalid_argument("normalize_sar: need one mean/std per channel");
    for (double s : stddev)
        if (!(s > 0.0)) throw std::invalid_argument("normalize_sar: standard deviation must be positive");
    const std::size_t plane = raw.dim(2) * raw.dim(3);
    std::vector<double> out(raw.numel());
    auto in = raw.values();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t c = (i / plane) % channels;
        const double z = (in[i] - mean[c]) / stddev[c];
        out[i] = std::clamp(z, -kSarClip, kSarClip) / kSarClip;
    }
    return Tensor(raw.shape(), std::move(out));
}

void require_strictly_increasing(std::span<const int> dates, const char* what) {
    for (std::size_t i = 1; i < dates.size(); ++i)
        if (dates[i] <= dates[i - 1])
            throw std::invalid_argument(std::string(what) + ": dates must be strictly increasing");
}

void require_binary_mask(const Tensor& mask, const char* what) {
    for (double v : mask.values())
        if (v != 0.0 && v != 1.0) throw std::invalid_argument(std::string(what) + ": mask must be binary");
}

Tensor compose_observed(const Tensor& y, const Tensor& mask, double fill) {
    check_mask_shape(y, mask, "compose_observed");
    require_binary_mask(mask, "compose_observed");
    const std::size_t t = y.dim(0), c = y.dim(1), plane = y.dim(2) * y.dim(3);
    auto yv = y.values();
    auto mv = mask.values();
    std::vector<double> out(y.numel());
    for (std::size_t f = 0; f < t; ++f)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < plane; ++p) {
                const std::size_t i = (f * c + ch) * plane + p;
                out[i] = mv[f * plane + p] != 0.0 ? fill : yv[i];
            }
    return Tensor(y.shape(), std::move(out));
}

std::pair<Tensor, Tensor> mask_query_frame(const Tensor& x, const Tensor& mask, std::size_t q, double fill) {
    check_mask_shape(x, mask, "mask_query_frame");
    if (q >= x.dim(0))
        throw std::out_of_range("mask_query_frame: frame " + std::to_string(q) + " outside sequence of " +
                                std::to_string(x.dim(0)));
    std::vector<double> xv(x.values().begin(), x.values().end());
    std::vector<double> mv(mask.values().begin(), mask.values().end());
    const std::size_t xs = frame_size(x), ms = frame_size(mask);
    std::fill(xv.begin() + static_cast<std::ptrdiff_t>(q * xs), xv.begin() + static_cast<std::ptrdiff_t>((q + 1) * xs),
              fill);
    std::fill(mv.begin() + static_cast<std::ptrdiff_t>(q * ms), mv.begin() + static_cast<std::ptrdiff_t>((q + 1) * ms),
              1.0);
    return {Tensor(x.shape(), std::move(xv)), Tensor(mask.shape(), std::move(mv))};
}

MaskPool make_mask_pool(std::size_t height, std::size_t width, const MaskPoolConfig& config, Rng& rng) {
    if (config.patterns == 0) throw std::invalid_argument("mask pool: need at least one pattern");
    if (!(config.min_coverage > 0.0 && config.min_coverage <= config.max_coverage && config.max_coverage < 1.0))
        throw std::invalid_argument("mask pool: coverage bounds must satisfy 0 < min <= max < 1");
    const std::size_t n = height * width;
    if (n < 2) throw std::invalid_argument("mask pool: frame too small");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    MaskPool pool;
    for (std::size_t k = 0; k < config.patterns; ++k) {
        // Smooth field from a few Gaussian bumps, thresholded at a random coverage quantile.
        std::vector<double> field(n, 0.0);
        const std::size_t blobs = std::max<std::size_t>(1, config.blobs);
        for (std::size_t b = 0; b < blobs; ++b) {
            const double cy = unit(rng) * static_cast<double>(height);
            const double cx = unit(rng) * static_cast<double>(width);
            const double sigma = (0.15 + 0.3 * unit(rng)) * static_cast<double>(std::max(height, width));
            const double amp = 0.5 + unit(rng);
            for (std::size_t y = 0; y < height; ++y)
                for (std::size_t x = 0; x < width; ++x) {
                    const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
                    field[y * width + x] += amp * std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                }
        }
        const double coverage = config.min_coverage + (config.max_coverage - config.min_coverage) * unit(rng);
        std::size_t count = static_cast<std::size_t>(std::lround(coverage * static_cast<double>(n)));
        count = std::clamp<std::size_t>(count, 1, n - 1);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return field[a] > field[b]; });
        std::vector<double> pattern(n, 0.0);
        for (std::size_t i = 0; i < count; ++i) pattern[order[i]] = 1.0;
        pool.patterns.emplace_back(Shape{1, height, width}, std::move(pattern));
    }
    return pool;
}

Tensor sample_mask(const MaskPool& pool, Rng& rng) {
    if (pool.patterns.empty()) throw std::invalid_argument("sample_mask: empty mask pool");
    std::uniform_int_distribution<std::size_t> pick(0, pool.patterns.size() - 1);
    return pool.patterns[pick(rng)];
}

void WindowSpec::validate() const {
    if (length == 0) throw std::invalid_argument("window: length must be positive");
    if (stride == 0 || stride > length) throw std::invalid_argument("window: stride must satisfy 1 <= stride <= length");
}

std::vector<Window> sliding_windows(std::size_t frames, const WindowSpec& spec) {
    spec.validate();
    if (frames < spec.length)
        throw std::invalid_argument("sliding_windows: sequence of " + std::to_string(frames) +
                                    " frames is shorter than the window length " + std::to_string(spec.length));
    std::vector<Window> out;
    std::size_t start = 0;
    for (; start + spec.length <= frames; start += spec.stride) out.push_back({start, spec.length});
    if (out.back().start + spec.length < frames) out.push_back({frames - spec.length, spec.length});
    return out;
}

WindowMerger::WindowMerger(Shape full_shape)
    : shape_(std::move(full_shape)), sum_(shape_numel(shape_), 0.0), counts_(shape_.empty() ? 0 : shape_[0], 0) {}

void WindowMerger::add(const Window& window, const Tensor& values) {
    const std::size_t per_frame = shape_[0] ? sum_.size() / shape_[0] : 0;
    if (window.start + window.length > shape_[0] || values.numel() != window.length * per_frame)
        throw ShapeError("WindowMerger: window output does not fit the merged sequence");
    auto v = values.values();
    for (std::size_t i = 0; i < v.size(); ++i) sum_[window.start * per_frame + i] += v[i];
    for (std::size_t f = 0; f < window.length; ++f) ++counts_[window.start + f];
}

Tensor WindowMerger::result() const {
    const std::size_t per_frame = shape_[0] ? sum_.size() / shape_[0] : 0;
    std::vector<double> out(sum_.size(), 0.0);
    for (std::size_t f = 0; f < counts_.size(); ++f) {
        if (!counts_[f]) continue;
        const double inv = 1.0 / static_cast<double>(counts_[f]);
        for (std::size_t i = 0; i < per_frame; ++i) out[f * per_frame + i] = sum_[f * per_frame + i] * inv;
    }
    return Tensor(shape_, std::move(out));
}

Tensor slice_frames(const Tensor& t, std::size_t start, std::size_t count) {
    if (start + count > t.dim(0)) throw std::out_of_range("slice_frames: range exceeds " + shape_str(t.shape()));
    const std::size_t fs = frame_size(t);
    Shape s = t.shape();
    s[0] = count;
    auto v = t.values();
    return Tensor(s, std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(start * fs),
                                         v.begin() + static_cast<std::ptrdiff_t>((start + count) * fs)));
}

Tensor gather_frames(const Tensor& t, std::span<const std::size_t> indices) {
    const std::size_t fs = frame_size(t);
    Shape s = t.shape();
    s[0] = indices.size();
    std::vector<double> out;
    out.reserve(indices.size() * fs);
    auto v = t.values();
    for (std::size_t idx : indices) {
        if (idx >= t.dim(0)) throw std::out_of_range("gather_frames: index out of range");
        out.insert(out.end(), v.begin() + static_cast<std::ptrdiff_t>(idx * fs),
                   v.begin() + static_cast<std::ptrdiff_t>((idx + 1) * fs));
    }
    return Tensor(s, std::move(out));
}

Tensor insert_frame(const Tensor& t, std::size_t index, double value) {
    if (index > t.dim(0)) throw std::out_of_range("insert_frame: index out of range");
    const std::size_t fs = frame_size(t);
    Shape s = t.shape();
    s[0] += 1;
    std::vector<double> out(t.values().begin(), t.values().end());
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(index * fs), fs, value);
    return Tensor(s, std::move(out));
}

Tensor remove_frame(const Tensor& t, std::size_t index) {
    if (index >= t.dim(0)) throw std::out_of_range("remove_frame: index out of range");
    const std::size_t fs = frame_size(t);
    Shape s = t.shape();
    s[0] -= 1;
    std::vector<double> out(t.values().begin(), t.values().end());
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(index * fs),
              out.begin() + static_cast<std::ptrdiff_t>((index + 1) * fs));
    return Tensor(s, std::move(out));
}

Tensor frame_at(const Tensor& t, std::size_t index) {
    Tensor f = slice_frames(t, index, 1);
    Shape s(t.shape().begin() + 1, t.shape().end());
    auto v = f.values();
    return Tensor(s, std::vector<double>(v.begin(), v.end()));
}

}  // namespace tsflow
