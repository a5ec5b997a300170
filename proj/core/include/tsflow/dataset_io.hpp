// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>

#include "tsflow/synth.hpp"

namespace tsflow {

inline constexpr const char* kDatasetFormat = "tsflow-dataset/1";

std::string synth_config_to_json(const SynthConfig& config);
/// Missing keys keep their defaults; unknown keys and bad values raise ConfigError with the
/// field path (e.g. "synth.mask_pool.patterns").
SynthConfig synth_config_from_json(const std::string& text);

/// Layout:
///   dataset.json                      format tag, generator config, SAR statistics, ids
///   <id>/optical.bin, sar.bin, masks.bin
///   <id>/dates.json                   {"optical": [...], "sar": [...]}
///   <id>/meta.json                    normalization stats, seed, generator config
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace tsflow
