// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "cli/cli.hpp"
#include "tsflow/checkpoint.hpp"
#include "tsflow/dataset_io.hpp"

#ifndef TSFLOW_VERSION
#define TSFLOW_VERSION "unknown"
#endif

namespace tsflow::cli {

namespace fs = std::filesystem;

std::string code_version() { return TSFLOW_VERSION; }

namespace {

void require_object(const Json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected a JSON object");
}

void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& path) {
    require_object(j, path);
    for (const auto& [key, _] : j.items())
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& path) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(path.empty() ? key : path + "." + key, "wrong type");
    }
}

// Applies a partial JSON object on top of a serialized config and reparses it with the
// owning module's strict reader.
template <typename Parse>
auto patch(const std::string& base_text, const Json& overlay, Parse parse) {
    Json merged = Json::parse(base_text);
    merged.merge_patch(overlay);
    return parse(merged.dump());
}

Json ablation_json(const AblationFlags& a) {
    return Json{{"spatial_only_fusion", a.spatial_only_fusion},
                {"no_rel_bias", a.no_rel_bias},
                {"lambda_delta_zero", a.lambda_delta_zero}};
}

}  // namespace

Json manifest_to_json(const RunManifest& m) {
    Json seeds = Json::object();
    for (const auto& [name, value] : m.seeds) seeds[name] = value;
    return Json{{"format", kManifestFormat},   {"command", m.command},
                {"version", m.version},        {"config", m.config},
                {"seeds", seeds},              {"bucket_scheme", m.bucket_scheme},
                {"block_order", m.block_order}, {"ablation", ablation_json(m.ablation)},
                {"outputs", m.outputs}};
}

RunManifest manifest_from_json(const Json& j) {
    reject_unknown(j, {"format", "command", "version", "config", "seeds", "bucket_scheme", "block_order", "ablation",
                       "outputs"},
                   "manifest");
    if (j.value("format", std::string()) != kManifestFormat)
        throw ConfigError("manifest.format", "expected " + std::string(kManifestFormat));
    RunManifest m;
    read(j, "command", m.command, "manifest");
    read(j, "version", m.version, "manifest");
    m.config = j.value("config", Json::object());
    const Json seeds = j.value("seeds", Json::object());
    for (const auto& [name, value] : seeds.items())
        m.seeds.emplace_back(name, value.get<std::uint64_t>());
    read(j, "bucket_scheme", m.bucket_scheme, "manifest");
    read(j, "block_order", m.block_order, "manifest");
    const Json ab = j.value("ablation", Json::object());
    reject_unknown(ab, {"spatial_only_fusion", "no_rel_bias", "lambda_delta_zero"}, "manifest.ablation");
    read(ab, "spatial_only_fusion", m.ablation.spatial_only_fusion, "manifest.ablation");
    read(ab, "no_rel_bias", m.ablation.no_rel_bias, "manifest.ablation");
    read(ab, "lambda_delta_zero", m.ablation.lambda_delta_zero, "manifest.ablation");
    m.outputs = j.value("outputs", Json::object());
    return m;
}

RunManifest read_manifest(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("manifest: cannot open " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Json j;
    try {
        j = Json::parse(ss.str());
    } catch (const Json::exception& e) {
        throw ConfigError("manifest", std::string("not valid JSON: ") + e.what());
    }
    return manifest_from_json(j);
}

void write_manifest(const fs::path& dir, const RunManifest& m) {
    fs::create_directories(dir);
    std::ofstream out(dir / kManifestFile, std::ios::binary);
    out << manifest_to_json(m).dump(2) << '\n';
    if (!out) throw std::runtime_error("manifest: cannot write " + (dir / kManifestFile).string());
}

// ---------------------------------------------------------------------------

bool SynthOptions::operator==(const SynthOptions& o) const {
    return synth_config_to_json(synth) == synth_config_to_json(o.synth);
}

bool TrainOptions::operator==(const TrainOptions& o) const {
    return data == o.data && resume == o.resume && model == o.model && train == o.train &&
           checkpoint_every == o.checkpoint_every;
}

std::string split_name(Split s) {
    switch (s) {
        case Split::Test: return "test";
        case Split::Train: return "train";
        case Split::All: return "all";
    }
    return "test";
}

Split parse_split(const std::string& s) {
    if (s == "test") return Split::Test;
    if (s == "train") return Split::Train;
    if (s == "all") return Split::All;
    throw ConfigError("split", "expected test, train or all, got '" + s + "'");
}

Json to_json(const SynthOptions& o) { return Json{{"synth", Json::parse(synth_config_to_json(o.synth))}}; }

Json to_json(const TrainOptions& o) {
    Json j{{"data", o.data},
           {"model", Json::parse(sdt_config_to_json(o.model))},
           {"train", Json::parse(train_config_to_json(o.train))},
           {"checkpoint_every", o.checkpoint_every}};
    if (o.resume) j["resume"] = *o.resume;
    return j;
}

Json to_json(const EvalOptions& o) {
    return Json{{"data", o.data},
                {"checkpoint", o.checkpoint},
                {"protocol", protocol_name(o.protocol)},
                {"split", split_name(o.split)},
                {"eval", Json::parse(eval_config_to_json(o.eval))}};
}

Json to_json(const QueryOptions& o) {
    return Json{{"data", o.data},
                {"checkpoint", o.checkpoint},
                {"sequence", o.sequence},
                {"date", o.date},
                {"n_samples", o.n_samples},
                {"steps", o.sampler.steps},
                {"solver", solver_name(o.sampler.solver)},
                {"seed", o.seed},
                {"drop_frame", o.drop_frame}};
}

Json to_json(const PlotOptions& o) {
    return Json{{"loss_csv", o.loss_csv}, {"trends_csv", o.trends_csv}, {"sequence", o.sequence}, {"log_y", o.log_y}};
}

SynthOptions synth_options_from_json(const Json& j, const SynthOptions& base) {
    reject_unknown(j, {"synth"}, "");
    SynthOptions o = base;
    if (j.contains("synth")) {
        require_object(j.at("synth"), "synth");
        o.synth = patch(synth_config_to_json(base.synth), j.at("synth"), synth_config_from_json);
    }
    return o;
}

TrainOptions train_options_from_json(const Json& j, const TrainOptions& base) {
    reject_unknown(j, {"data", "resume", "model", "train", "checkpoint_every"}, "");
    TrainOptions o = base;
    read(j, "data", o.data, "");
    if (j.contains("resume")) {
        if (j.at("resume").is_null()) o.resume.reset();
        else o.resume = j.at("resume").get<std::string>();
    }
    if (j.contains("model")) {
        require_object(j.at("model"), "model");
        o.model = patch(sdt_config_to_json(base.model), j.at("model"), sdt_config_from_json);
    }
    if (j.contains("train")) {
        require_object(j.at("train"), "train");
        o.train = patch(train_config_to_json(base.train), j.at("train"), train_config_from_json);
    }
    read(j, "checkpoint_every", o.checkpoint_every, "");
    return o;
}

EvalOptions eval_options_from_json(const Json& j, const EvalOptions& base) {
    reject_unknown(j, {"data", "checkpoint", "protocol", "split", "eval"}, "");
    EvalOptions o = base;
    read(j, "data", o.data, "");
    read(j, "checkpoint", o.checkpoint, "");
    if (j.contains("protocol")) o.protocol = parse_protocol(j.at("protocol").get<std::string>());
    if (j.contains("split")) o.split = parse_split(j.at("split").get<std::string>());
    if (j.contains("eval")) {
        require_object(j.at("eval"), "eval");
        o.eval = patch(eval_config_to_json(base.eval), j.at("eval"), eval_config_from_json);
    }
    return o;
}

QueryOptions query_options_from_json(const Json& j, const QueryOptions& base) {
    reject_unknown(j, {"data", "checkpoint", "sequence", "date", "n_samples", "steps", "solver", "seed", "drop_frame"},
                   "");
    QueryOptions o = base;
    read(j, "data", o.data, "");
    read(j, "checkpoint", o.checkpoint, "");
    read(j, "sequence", o.sequence, "");
    read(j, "date", o.date, "");
    read(j, "n_samples", o.n_samples, "");
    read(j, "steps", o.sampler.steps, "");
    if (j.contains("solver")) o.sampler.solver = parse_solver(j.at("solver").get<std::string>());
    read(j, "seed", o.seed, "");
    read(j, "drop_frame", o.drop_frame, "");
    return o;
}

PlotOptions plot_options_from_json(const Json& j, const PlotOptions& base) {
    reject_unknown(j, {"loss_csv", "trends_csv", "sequence", "log_y"}, "");
    PlotOptions o = base;
    read(j, "loss_csv", o.loss_csv, "");
    read(j, "trends_csv", o.trends_csv, "");
    read(j, "sequence", o.sequence, "");
    read(j, "log_y", o.log_y, "");
    return o;
}

}  // namespace tsflow::cli
