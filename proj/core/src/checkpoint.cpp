// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "tsflow/tensor_io.hpp"

namespace tsflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json model_json(const SdtConfig& c) {
    return json{{"depth", c.depth},
                {"hidden", c.hidden},
                {"patch", c.patch},
                {"heads", c.heads},
                {"mlp_ratio", c.mlp_ratio},
                {"optical_channels", c.optical_channels},
                {"sar_channels", c.sar_channels},
                {"window", c.window},
                {"height", c.height},
                {"width", c.width},
                {"date_span", c.date_span},
                {"rope_base", c.rope.base},
                {"rope_scale", c.rope.scale},
                {"mask_channel", c.mask_channel},
                {"ln_eps", c.ln_eps},
                {"init_seed", c.init_seed},
                {"ablation",
                 {{"spatial_only_fusion", c.ablation.spatial_only_fusion},
                  {"no_rel_bias", c.ablation.no_rel_bias},
                  {"lambda_delta_zero", c.ablation.lambda_delta_zero}}}};
}

template <typename T>
void take(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + key, "wrong type (" + std::string(j.at(key).type_name()) + ")");
    }
}

SdtConfig model_from(const json& j) {
    if (!j.is_object()) throw ConfigError("model", "expected a JSON object");
    static const char* known[] = {"depth",        "hidden", "patch",     "heads",     "mlp_ratio",
                                  "optical_channels",       "sar_channels",         "window",
                                  "height",       "width",  "date_span", "rope_base", "rope_scale",
                                  "mask_channel", "ln_eps", "init_seed", "ablation"};
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError("model." + key, "unknown key");
    }
    SdtConfig c = SdtConfig::desk();
    take(j, "model.", "depth", c.depth);
    take(j, "model.", "hidden", c.hidden);
    take(j, "model.", "patch", c.patch);
    take(j, "model.", "heads", c.heads);
    take(j, "model.", "mlp_ratio", c.mlp_ratio);
    take(j, "model.", "optical_channels", c.optical_channels);
    take(j, "model.", "sar_channels", c.sar_channels);
    take(j, "model.", "window", c.window);
    take(j, "model.", "height", c.height);
    take(j, "model.", "width", c.width);
    take(j, "model.", "date_span", c.date_span);
    take(j, "model.", "rope_base", c.rope.base);
    take(j, "model.", "rope_scale", c.rope.scale);
    take(j, "model.", "mask_channel", c.mask_channel);
    take(j, "model.", "ln_eps", c.ln_eps);
    take(j, "model.", "init_seed", c.init_seed);
    if (j.contains("ablation")) {
        const json& a = j.at("ablation");
        take(a, "model.ablation.", "spatial_only_fusion", c.ablation.spatial_only_fusion);
        take(a, "model.ablation.", "no_rel_bias", c.ablation.no_rel_bias);
        take(a, "model.ablation.", "lambda_delta_zero", c.ablation.lambda_delta_zero);
    }
    try {
        c.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError("model", e.what());
    }
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text << '\n';
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json read_config_json(const fs::path& dir) {
    const json j = json::parse(read_text(dir / "config.json"));
    if (j.value("format", "") != kCheckpointFormat)
        throw std::runtime_error(dir.string() + ": not a tsflow checkpoint");
    if (j.value("bucket_scheme", std::string()) != kBucketSchemeVersion)
        throw std::runtime_error(dir.string() + ": bias tables were written under bucket scheme '" +
                                 j.value("bucket_scheme", "?") + "', this build uses '" + std::string(kBucketSchemeVersion) + "'");
    if (j.value("block_order", std::string()) != kBlockOrderTag)
        throw std::runtime_error(dir.string() + ": block order '" + j.value("block_order", "?") +
                                 "' differs from this build");
    return j;
}

}  // namespace

std::string sdt_config_to_json(const SdtConfig& config) { return model_json(config).dump(2); }

SdtConfig sdt_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("model", std::string("not valid JSON: ") + e.what());
    }
    return model_from(j);
}

void save_checkpoint(const fs::path& dir, const Sdt& model, const Trainer* trainer) {
    fs::create_directories(dir);
    json cfg{{"format", kCheckpointFormat},
             {"model", model_json(model.config())},
             {"bucket_scheme", std::string(kBucketSchemeVersion)},
             {"block_order", std::string(kBlockOrderTag)},
             {"parameter_count", model.params().scalar_count()}};
    json frozen = json::array();
    for (const auto& name : model.params().names())
        if (!model.params().trainable(name)) frozen.push_back(name);
    cfg["frozen"] = frozen;
    if (trainer) cfg["train"] = json::parse(train_config_to_json(trainer->config()));
    write_text(dir / "config.json", cfg.dump(2));
    save_tensor_set(dir / "params", model.params().snapshot());
    if (trainer) {
        save_tensor_set(dir / "optimizer", trainer->optimizer().state());
        write_text(dir / "trainer.json", trainer->state_json());
    }
}

SdtConfig read_checkpoint_config(const fs::path& dir) { return model_from(read_config_json(dir).at("model")); }

Sdt load_model(const fs::path& dir) {
    Sdt model(read_checkpoint_config(dir));
    model.params().load(load_tensor_set(dir / "params"));
    return model;
}

void check_resume_compatible(const fs::path& dir, const SdtConfig& model, const TrainConfig& train) {
    const json j = read_config_json(dir);
    const json saved = j.at("model");
    const json want = model_json(model);
    std::string diffs;
    for (const auto& [key, value] : want.items())
        if (!saved.contains(key) || saved.at(key) != value)
            diffs += " model." + key + " (checkpoint " + (saved.contains(key) ? saved.at(key).dump() : "missing") +
                     ", requested " + value.dump() + ")";
    if (j.contains("train")) {
        const json st = j.at("train");
        const json wt = json::parse(train_config_to_json(train));
        for (const char* key : {"batch_size", "seed", "p_anytime", "cloud_probability", "sar_margin_days"})
            if (st.at(key) != wt.at(key))
                diffs += std::string(" train.") + key + " (checkpoint " + st.at(key).dump() + ", requested " +
                         wt.at(key).dump() + ")";
    }
    if (!diffs.empty()) throw ResumeMismatch("cannot resume " + dir.string() + ":" + diffs);
}

void load_training_state(const fs::path& dir, Trainer& trainer) {
    const std::string state = read_text(dir / "trainer.json");
    trainer.load_state_json(state);
    const json j = json::parse(state);
    trainer.optimizer().load_state(load_tensor_set(dir / "optimizer"), j.at("optimizer_steps").get<std::size_t>());
}

}  // namespace tsflow
