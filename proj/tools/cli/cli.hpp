// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

// Command implementations behind the tsflow executable. Each command resolves its options
// (defaults, then a previous run manifest, then a JSON config file, then explicit flags),
// runs, and writes a RunManifest next to its outputs.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsflow/protocols.hpp"
#include "tsflow/sdt.hpp"
#include "tsflow/synth.hpp"
#include "tsflow/train.hpp"

namespace tsflow::cli {

using Json = nlohmann::ordered_json;

inline constexpr const char* kManifestFormat = "tsflow-manifest/1";
inline constexpr const char* kManifestFile = "manifest.json";

std::string code_version();

/// Everything needed to repeat a run. Output directories are deliberately absent so two
/// runs into different directories produce identical manifests.
struct RunManifest {
    std::string command;
    std::string version;
    Json config;  // resolved options of the command
    std::vector<std::pair<std::string, std::uint64_t>> seeds;
    std::string bucket_scheme;
    std::string block_order;
    AblationFlags ablation;
    Json outputs = Json::object();  // metric and artifact summary

    bool operator==(const RunManifest&) const = default;
};

Json manifest_to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& j);
RunManifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& dir, const RunManifest& m);

// ---------------------------------------------------------------------------
// Resolved per-command options
// ---------------------------------------------------------------------------

struct SynthOptions {
    SynthConfig synth{};

    bool operator==(const SynthOptions& o) const;
};

struct TrainOptions {
    std::string data;
    std::optional<std::string> resume;
    SdtConfig model = SdtConfig::desk();
    TrainConfig train = TrainConfig::desk();
    std::size_t checkpoint_every = 10;  // epochs; 0 writes only the final checkpoint

    bool operator==(const TrainOptions& o) const;
};

enum class Split { Test, Train, All };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct EvalOptions {
    std::string data;
    std::string checkpoint;
    Protocol protocol = Protocol::MissingFrame;
    Split split = Split::Test;
    EvalConfig eval{};

    bool operator==(const EvalOptions&) const = default;
};

struct QueryOptions {
    std::string data;
    std::string checkpoint;
    std::string sequence;
    int date = 0;
    std::size_t n_samples = 1;
    SamplerConfig sampler{};
    std::uint64_t seed = 9001;
    bool drop_frame = false;  // mask the whole frame even when the date was acquired

    bool operator==(const QueryOptions&) const = default;
};

struct PlotOptions {
    std::string loss_csv;
    std::string trends_csv;
    std::string sequence;  // trends: which sequence to draw
    bool log_y = false;

    bool operator==(const PlotOptions&) const = default;
};

Json to_json(const SynthOptions& o);
Json to_json(const TrainOptions& o);
Json to_json(const EvalOptions& o);
Json to_json(const QueryOptions& o);
Json to_json(const PlotOptions& o);

/// Missing keys keep the values already in `base`; unknown keys raise ConfigError.
SynthOptions synth_options_from_json(const Json& j, const SynthOptions& base = {});
TrainOptions train_options_from_json(const Json& j, const TrainOptions& base = {});
EvalOptions eval_options_from_json(const Json& j, const EvalOptions& base = {});
QueryOptions query_options_from_json(const Json& j, const QueryOptions& base = {});
PlotOptions plot_options_from_json(const Json& j, const PlotOptions& base = {});

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

RunManifest run_synth(const SynthOptions& o, const std::filesystem::path& out);
RunManifest run_train(const TrainOptions& o, const std::filesystem::path& out);
RunManifest run_eval(const EvalOptions& o, const std::filesystem::path& out);
RunManifest run_query(const QueryOptions& o, const std::filesystem::path& out);
RunManifest run_plot(const PlotOptions& o, const std::filesystem::path& out);

/// Parses argv and dispatches. Returns 0 on success, 2 on invalid input (bad flags,
/// configuration values, shapes or dates), 1 on runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace tsflow::cli
