// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "tsflow/metrics.hpp"
#include "tsflow/protocols.hpp"
#include "tsflow/train.hpp"

namespace tsflow {

/// One row per sequence followed by an "aggregate" row.
std::string report_csv(const MetricReport& report);
/// Aggregate values, scoping metadata and row count.
std::string report_json(const MetricReport& report);

/// Writes <stem>.csv and <stem>.json into dir.
void write_report(const std::filesystem::path& dir, const std::string& stem, const MetricReport& report);

std::string loss_curve_csv(const std::vector<EpochRecord>& history);
/// Long format: id, date, source (generated|oracle|linear), mean, median, q25, q75.
std::string trends_csv(const std::vector<AnytimeTrend>& trends);

/// Shortest round-trip decimal for a double; used everywhere reports print numbers.
std::string format_number(double v);

}  // namespace tsflow
