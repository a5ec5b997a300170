// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

namespace tsflow {

namespace {

constexpr std::uint64_t kMaskStream = 0x6d61736b73ULL;

std::vector<int> draw_days(std::size_t count, int span, Rng& rng) {
    std::vector<int> days(static_cast<std::size_t>(span));
    std::iota(days.begin(), days.end(), 0);
    std::shuffle(days.begin(), days.end(), rng);
    days.resize(count);
    std::sort(days.begin(), days.end());
    return days;
}

double sar_response(double latent, std::size_t channel) {
    const double k = static_cast<double>(channel);
    return -15.0 - 3.0 * k + 4.0 * std::tanh(1.2 * latent + 0.3 * k);
}

}  // namespace

void SynthConfig::validate() const {
    if (sequences == 0) throw ConfigError("synth.sequences", "must be positive");
    if (height == 0 || width == 0) throw ConfigError("synth.height", "must be positive");
    if (optical_channels < 2) throw ConfigError("synth.optical_channels", "need at least red and NIR bands");
    if (sar_channels == 0) throw ConfigError("synth.sar_channels", "must be positive");
    if (red_band >= optical_channels) throw ConfigError("synth.red_band", "outside optical channels");
    if (nir_band >= optical_channels || nir_band == red_band)
        throw ConfigError("synth.nir_band", "must be a distinct optical channel");
    if (span_days < 2) throw ConfigError("synth.span_days", "must be at least 2");
    if (t_min == 0 || t_min > t_max) throw ConfigError("synth.t_min", "must satisfy 1 <= t_min <= t_max");
    if (t_max > static_cast<std::size_t>(span_days))
        throw ConfigError("synth.t_max", "exceeds the number of available days (" + std::to_string(span_days) + ")");
    if (ts_min > ts_max) throw ConfigError("synth.ts_min", "must not exceed ts_max");
    if (ts_max > static_cast<std::size_t>(span_days))
        throw ConfigError("synth.ts_max", "exceeds the number of available days (" + std::to_string(span_days) + ")");
    if (regions == 0 || regions > height * width) throw ConfigError("synth.regions", "must be in [1, height*width]");
    if (!(period_min > 0.0 && period_min <= period_max)) throw ConfigError("synth.period_min", "must satisfy 0 < min <= max");
    if (texture < 0.0) throw ConfigError("synth.texture", "must be nonnegative");
    if (sar_noise_db < 0.0) throw ConfigError("synth.sar_noise_db", "must be nonnegative");
    if (!(cloud_probability >= 0.0 && cloud_probability <= 1.0))
        throw ConfigError("synth.cloud_probability", "must lie in [0, 1]");
    if (mask_pool.patterns == 0) throw ConfigError("synth.mask_pool.patterns", "must be positive");
    if (!(mask_pool.min_coverage > 0.0 && mask_pool.min_coverage <= mask_pool.max_coverage &&
          mask_pool.max_coverage < 1.0))
        throw ConfigError("synth.mask_pool.min_coverage", "coverage bounds must satisfy 0 < min <= max < 1");
}

SynthOracle::SynthOracle(std::size_t channels, std::size_t height, std::size_t width, std::vector<int> labels,
                         std::vector<RegionDynamics> regions, std::vector<double> texture)
    : channels_(channels),
      height_(height),
      width_(width),
      labels_(std::move(labels)),
      regions_(std::move(regions)),
      texture_(std::move(texture)) {}

double SynthOracle::latent(std::size_t region, double day) const {
    const RegionDynamics& r = regions_.at(region);
    return std::sin(2.0 * std::numbers::pi * day / r.period + r.phase);
}

Tensor SynthOracle::optical_raw_at(double day) const {
    const std::size_t plane = height_ * width_;
    std::vector<double> latents(regions_.size());
    for (std::size_t r = 0; r < regions_.size(); ++r) latents[r] = latent(r, day);
    std::vector<double> out(channels_ * plane);
    for (std::size_t c = 0; c < channels_; ++c)
        for (std::size_t p = 0; p < plane; ++p) {
            const std::size_t r = static_cast<std::size_t>(labels_[p]);
            const RegionDynamics& reg = regions_[r];
            out[c * plane + p] = reg.base[c] + reg.amplitude[c] * latents[r] + texture_[c * plane + p];
        }
    return Tensor({channels_, height_, width_}, std::move(out));
}

Tensor SynthOracle::optical_at(double day) const { return normalize_optical(optical_raw_at(day)); }

Tensor SynthOracle::region_mask(std::size_t region) const {
    std::vector<double> out(labels_.size());
    for (std::size_t p = 0; p < labels_.size(); ++p) out[p] = static_cast<std::size_t>(labels_[p]) == region ? 1.0 : 0.0;
    return Tensor({height_, width_}, std::move(out));
}

std::size_t SynthOracle::largest_region() const {
    std::vector<std::size_t> counts(regions_.size(), 0);
    for (int l : labels_) ++counts[static_cast<std::size_t>(l)];
    return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::uint64_t sequence_seed(std::uint64_t root, std::size_t index) {
    std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

SynthSequence synth_sequence(const SynthConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t h = config.height, w = config.width, plane = h * w, c = config.optical_channels;

    // Voronoi regions around distinct seed pixels.
    std::vector<std::size_t> pixels(plane);
    std::iota(pixels.begin(), pixels.end(), 0);
    std::shuffle(pixels.begin(), pixels.end(), rng);
    std::vector<int> labels(plane);
    for (std::size_t p = 0; p < plane; ++p) {
        const double py = static_cast<double>(p / w), px = static_cast<double>(p % w);
        double best = 1e300;
        for (std::size_t r = 0; r < config.regions; ++r) {
            const double sy = static_cast<double>(pixels[r] / w), sx = static_cast<double>(pixels[r] % w);
            const double d = (py - sy) * (py - sy) + (px - sx) * (px - sx);
            if (d < best) {
                best = d;
                labels[p] = static_cast<int>(r);
            }
        }
    }

    std::vector<RegionDynamics> regions(config.regions);
    for (auto& r : regions) {
        r.period = config.period_min + (config.period_max - config.period_min) * unit(rng);
        r.phase = 2.0 * std::numbers::pi * unit(rng);
        r.base.resize(c);
        r.amplitude.resize(c);
        for (std::size_t b = 0; b < c; ++b) {
            if (b == config.nir_band) {
                r.base[b] = 2600.0 + 800.0 * unit(rng);
                r.amplitude[b] = 900.0 + 600.0 * unit(rng);
            } else if (b == config.red_band) {
                r.base[b] = 900.0 + 600.0 * unit(rng);
                r.amplitude[b] = -(300.0 + 300.0 * unit(rng));
            } else {
                r.base[b] = 800.0 + 1200.0 * unit(rng);
                r.amplitude[b] = -400.0 + 800.0 * unit(rng);
            }
        }
    }

    std::normal_distribution<double> jitter(0.0, 1.0);
    std::vector<double> texture(c * plane);
    for (double& t : texture) t = config.texture * jitter(rng);

    std::uniform_int_distribution<std::size_t> t_dist(config.t_min, config.t_max);
    std::uniform_int_distribution<std::size_t> ts_dist(config.ts_min, config.ts_max);
    SynthSequence out;
    out.optical_dates = draw_days(t_dist(rng), config.span_days, rng);
    out.sar_dates = draw_days(ts_dist(rng), config.span_days, rng);
    out.oracle = SynthOracle(c, h, w, std::move(labels), std::move(regions), std::move(texture));

    const std::size_t t = out.optical_dates.size();
    std::vector<double> optical;
    optical.reserve(t * c * plane);
    for (int d : out.optical_dates) {
        Tensor frame = out.oracle.optical_raw_at(d);
        optical.insert(optical.end(), frame.values().begin(), frame.values().end());
    }
    out.optical_raw = Tensor({t, c, h, w}, std::move(optical));

    const std::size_t ts = out.sar_dates.size(), cs = config.sar_channels;
    std::vector<double> sar(ts * cs * plane);
    for (std::size_t j = 0; j < ts; ++j)
        for (std::size_t k = 0; k < cs; ++k)
            for (std::size_t p = 0; p < plane; ++p) {
                const double z = out.oracle.latent(out.oracle.region_of(p), out.sar_dates[j]);
                sar[(j * cs + k) * plane + p] = sar_response(z, k) + config.sar_noise_db * jitter(rng);
            }
    out.sar_raw = Tensor({ts, cs, h, w}, std::move(sar));
    return out;
}

Dataset synth_dataset(const SynthConfig& config) {
    config.validate();
    Dataset ds;
    ds.config = config;
    std::vector<SynthSequence> raw;
    raw.reserve(config.sequences);
    for (std::size_t i = 0; i < config.sequences; ++i) raw.push_back(synth_sequence(config, sequence_seed(config.seed, i)));

    const std::size_t cs = config.sar_channels;
    const std::size_t plane = config.height * config.width;
    std::vector<double> sum(cs, 0.0), sq(cs, 0.0);
    std::vector<std::size_t> count(cs, 0);
    for (const auto& s : raw) {
        auto v = s.sar_raw.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const std::size_t k = (i / plane) % cs;
            sum[k] += v[i];
            sq[k] += v[i] * v[i];
            ++count[k];
        }
    }
    ds.sar_stats.mean.resize(cs);
    ds.sar_stats.stddev.resize(cs);
    for (std::size_t k = 0; k < cs; ++k) {
        const double n = static_cast<double>(std::max<std::size_t>(count[k], 1));
        const double mu = sum[k] / n;
        ds.sar_stats.mean[k] = mu;
        ds.sar_stats.stddev[k] = std::sqrt(std::max(sq[k] / n - mu * mu, 1e-12));
    }

    Rng pool_rng(config.seed ^ kMaskStream);
    const MaskPool pool = make_mask_pool(config.height, config.width, config.mask_pool, pool_rng);
    std::bernoulli_distribution cloudy(config.cloud_probability);

    for (std::size_t i = 0; i < raw.size(); ++i) {
        SequenceRecord rec;
        char id[32];
        std::snprintf(id, sizeof(id), "seq_%04zu", i);
        rec.id = id;
        rec.seed = sequence_seed(config.seed, i);
        rec.clean = OpticalSequence{normalize_optical(raw[i].optical_raw), raw[i].optical_dates};
        rec.sar = SarSequence{normalize_sar(raw[i].sar_raw, ds.sar_stats.mean, ds.sar_stats.stddev), raw[i].sar_dates};
        const std::size_t t = raw[i].optical_dates.size();
        std::vector<double> masks(t * plane, 0.0);
        for (std::size_t f = 0; f < t; ++f) {
            if (!cloudy(pool_rng)) continue;
            Tensor m = sample_mask(pool, pool_rng);
            std::copy(m.values().begin(), m.values().end(), masks.begin() + static_cast<std::ptrdiff_t>(f * plane));
        }
        rec.masks = MaskSequence{Tensor({t, 1, config.height, config.width}, std::move(masks))};
        ds.sequences.push_back(std::move(rec));
    }
    return ds;
}

SynthOracle dataset_oracle(const Dataset& dataset, std::size_t index) {
    const auto& rec = dataset.sequences.at(index);
    return synth_sequence(dataset.config, rec.seed).oracle;
}

}  // namespace tsflow
