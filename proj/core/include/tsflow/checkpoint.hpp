// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "tsflow/sdt.hpp"
#include "tsflow/train.hpp"

namespace tsflow {

inline constexpr const char* kCheckpointFormat = "tsflow-checkpoint/1";

std::string sdt_config_to_json(const SdtConfig& config);
/// Missing keys keep the defaults of SdtConfig::desk(); unknown keys are rejected.
SdtConfig sdt_config_from_json(const std::string& text);

/// Raised when a checkpoint cannot be resumed under the requested configuration.
class ResumeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Layout:
///   config.json     format tag, model config (with ablation flags), bucket scheme, block order
///   params/         one tensor file per parameter plus manifest.json
///   optimizer/      Adam moments (only when saved with a trainer)
///   trainer.json    epoch, RNG state, loss history, train config
void save_checkpoint(const std::filesystem::path& dir, const Sdt& model, const Trainer* trainer = nullptr);

/// Rebuilds the model and loads its parameters. Rejects checkpoints written under another
/// bucket scheme or block order.
Sdt load_model(const std::filesystem::path& dir);
SdtConfig read_checkpoint_config(const std::filesystem::path& dir);

/// Throws ResumeMismatch naming every differing field.
void check_resume_compatible(const std::filesystem::path& dir, const SdtConfig& model, const TrainConfig& train);

/// Restores optimizer moments and trainer state saved alongside the parameters.
void load_training_state(const std::filesystem::path& dir, Trainer& trainer);

}  // namespace tsflow
