// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsflow/sequence_data.hpp"
#include "tsflow/tensor.hpp"

namespace tsflow {

/// Invalid configuration value; the message starts with the offending field path.
class ConfigError : public std::invalid_argument {
public:
    ConfigError(const std::string& field, const std::string& why)
        : std::invalid_argument(field + ": " + why), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Generator for the synthetic two-sensor benchmark.
///
/// Each sequence partitions the grid into Voronoi regions. Region r follows a latent
/// seasonal phase theta_r(d) = 2*pi*d/P_r + phi_r; the NIR band rises with sin(theta),
/// the red band falls with it, and the SAR channels are a saturating function of the same
/// phase plus seeded speckle. Optical and SAR days are independent irregular draws from
/// [0, span_days).
struct SynthConfig {
    std::size_t sequences = 200;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t optical_channels = 3;
    std::size_t sar_channels = 1;
    std::size_t t_min = 8;
    std::size_t t_max = 12;
    std::size_t ts_min = 24;
    std::size_t ts_max = 32;
    int span_days = 365;
    std::size_t regions = 3;
    double period_min = 90.0;
    double period_max = 150.0;
    double texture = 60.0;      // per-pixel static reflectance jitter (std, reflectance units)
    double sar_noise_db = 0.25;
    std::size_t red_band = 0;
    std::size_t nir_band = 1;
    double cloud_probability = 0.5;  // per-frame chance of a pool mask in the stored masks
    MaskPoolConfig mask_pool{};
    std::uint64_t seed = 2026;

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

struct RegionDynamics {
    double period = 0.0;
    double phase = 0.0;
    std::vector<double> base;       // per optical band
    std::vector<double> amplitude;  // signed per band: +NIR-like, -red-like
};

/// Closed-form clean signal of one generated sequence.
class SynthOracle {
public:
    SynthOracle() = default;
    SynthOracle(std::size_t channels, std::size_t height, std::size_t width, std::vector<int> labels,
                std::vector<RegionDynamics> regions, std::vector<double> texture);

    /// sin(theta_r(day)) for region r.
    double latent(std::size_t region, double day) const;
    /// Clean reflectance [C, H, W] at any day.
    Tensor optical_raw_at(double day) const;
    /// Clean normalized optical [C, H, W].
    Tensor optical_at(double day) const;

    std::size_t region_count() const { return regions_.size(); }
    std::size_t region_of(std::size_t pixel) const { return static_cast<std::size_t>(labels_.at(pixel)); }
    /// Binary [H, W] membership map.
    Tensor region_mask(std::size_t region) const;
    /// Region with the most pixels.
    std::size_t largest_region() const;
    const RegionDynamics& region(std::size_t r) const { return regions_.at(r); }

private:
    std::size_t channels_ = 0, height_ = 0, width_ = 0;
    std::vector<int> labels_;
    std::vector<RegionDynamics> regions_;
    std::vector<double> texture_;  // [C, H, W]
};

struct SynthSequence {
    Tensor optical_raw;  // [T, C, H, W] reflectance
    Tensor sar_raw;      // [Ts, Cs, H, W] dB
    std::vector<int> optical_dates;
    std::vector<int> sar_dates;
    SynthOracle oracle;
};

/// Per-sequence seed derived from the dataset seed (splitmix64).
std::uint64_t sequence_seed(std::uint64_t root, std::size_t index);

SynthSequence synth_sequence(const SynthConfig& config, std::uint64_t seed);

struct SarStats {
    std::vector<double> mean;
    std::vector<double> stddev;
};

struct SequenceRecord {
    std::string id;
    std::uint64_t seed = 0;
    OpticalSequence clean;  // normalized ground truth
    SarSequence sar;        // normalized
    MaskSequence masks;     // stored cloud masks for the cloud-removal protocol
};

struct Dataset {
    SynthConfig config;
    SarStats sar_stats;
    std::vector<SequenceRecord> sequences;
};

/// Generates every sequence, computes SAR channel statistics over the whole set, and
/// normalizes both sensors.
Dataset synth_dataset(const SynthConfig& config);

/// Regenerates the closed-form oracle for sequence index.
SynthOracle dataset_oracle(const Dataset& dataset, std::size_t index);

}  // namespace tsflow
