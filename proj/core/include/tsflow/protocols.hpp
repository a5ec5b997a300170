// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsflow/flow.hpp"
#include "tsflow/metrics.hpp"
#include "tsflow/sdt.hpp"
#include "tsflow/synth.hpp"

namespace tsflow {

enum class Protocol { CloudRemoval, MissingFrame, Anytime };

std::string protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);

struct EvalConfig {
    std::uint64_t seed = 9001;  // independent of the training seed
    SamplerConfig sampler{};
    std::size_t window_stride = 2;
    int sar_margin_days = 16;
    std::size_t anytime_dates = 8;  // off-grid query days per sequence

    void validate() const;
    bool operator==(const EvalConfig&) const = default;
};

std::string eval_config_to_json(const EvalConfig& config);
EvalConfig eval_config_from_json(const std::string& text);

/// Runs the sampler over every window of a sequence (or only the windows containing
/// query_frame) and averages overlapping outputs. Frames outside every used window are zero.
Tensor reconstruct_sequence(const SequenceRecord& record, const Tensor& x, const Tensor& mask, const Sdt& model,
                            const EvalConfig& config, std::optional<std::size_t> query_frame, std::uint64_t seed);

/// Contiguous run of window-1 observed frames whose date span contains day, chosen so the
/// day sits as close to the run's centre as possible.
Window anytime_context(std::span<const int> dates, int day, std::size_t window);

/// Off-grid query days spread evenly over the interior of the date span.
std::vector<int> anytime_query_days(std::span<const int> dates, std::size_t count);

struct AnytimeTrend {
    std::string id;
    std::vector<TrajectoryPoint> generated;
    std::vector<TrajectoryPoint> oracle;
    std::vector<TrajectoryPoint> baseline;
    RankCorrelation model_agreement;
    RankCorrelation baseline_agreement;
};

struct ProtocolResult {
    Protocol protocol = Protocol::MissingFrame;
    MetricReport model;
    MetricReport baseline;
    std::vector<std::string> frame_ids;
    std::vector<Tensor> frames;        // generated target frames (missing-frame, anytime)
    std::vector<AnytimeTrend> trends;  // anytime only
    std::size_t skipped_sequences = 0; // cloud-removal sequences with an empty stored mask

    /// Mean Spearman agreement over sequences whose trends are not flat.
    double mean_trend_agreement() const;
};

/// Evaluates the model and the linear baseline on the listed sequences.
ProtocolResult run_protocol(Protocol protocol, const Dataset& data, const std::vector<std::size_t>& ids,
                            const Sdt& model, const EvalConfig& config);

}  // namespace tsflow
