// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/dataset_io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tsflow/tensor_io.hpp"

namespace tsflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json config_json(const SynthConfig& c) {
    return json{{"sequences", c.sequences},
                {"height", c.height},
                {"width", c.width},
                {"optical_channels", c.optical_channels},
                {"sar_channels", c.sar_channels},
                {"t_min", c.t_min},
                {"t_max", c.t_max},
                {"ts_min", c.ts_min},
                {"ts_max", c.ts_max},
                {"span_days", c.span_days},
                {"regions", c.regions},
                {"period_min", c.period_min},
                {"period_max", c.period_max},
                {"texture", c.texture},
                {"sar_noise_db", c.sar_noise_db},
                {"red_band", c.red_band},
                {"nir_band", c.nir_band},
                {"cloud_probability", c.cloud_probability},
                {"mask_pool",
                 {{"patterns", c.mask_pool.patterns},
                  {"min_coverage", c.mask_pool.min_coverage},
                  {"max_coverage", c.mask_pool.max_coverage},
                  {"blobs", c.mask_pool.blobs}}},
                {"seed", c.seed}};
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

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> known) {
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ConfigError(path + key, "unknown key");
    }
}

SynthConfig config_from(const json& j) {
    if (!j.is_object()) throw ConfigError("synth", "expected a JSON object");
    reject_unknown(j, "synth.",
                   {"sequences", "height", "width", "optical_channels", "sar_channels", "t_min", "t_max", "ts_min",
                    "ts_max", "span_days", "regions", "period_min", "period_max", "texture", "sar_noise_db", "red_band",
                    "nir_band", "cloud_probability", "mask_pool", "seed"});
    SynthConfig c;
    take(j, "synth.", "sequences", c.sequences);
    take(j, "synth.", "height", c.height);
    take(j, "synth.", "width", c.width);
    take(j, "synth.", "optical_channels", c.optical_channels);
    take(j, "synth.", "sar_channels", c.sar_channels);
    take(j, "synth.", "t_min", c.t_min);
    take(j, "synth.", "t_max", c.t_max);
    take(j, "synth.", "ts_min", c.ts_min);
    take(j, "synth.", "ts_max", c.ts_max);
    take(j, "synth.", "span_days", c.span_days);
    take(j, "synth.", "regions", c.regions);
    take(j, "synth.", "period_min", c.period_min);
    take(j, "synth.", "period_max", c.period_max);
    take(j, "synth.", "texture", c.texture);
    take(j, "synth.", "sar_noise_db", c.sar_noise_db);
    take(j, "synth.", "red_band", c.red_band);
    take(j, "synth.", "nir_band", c.nir_band);
    take(j, "synth.", "cloud_probability", c.cloud_probability);
    take(j, "synth.", "seed", c.seed);
    if (j.contains("mask_pool")) {
        const json& m = j.at("mask_pool");
        if (!m.is_object()) throw ConfigError("synth.mask_pool", "expected an object");
        reject_unknown(m, "synth.mask_pool.", {"patterns", "min_coverage", "max_coverage", "blobs"});
        take(m, "synth.mask_pool.", "patterns", c.mask_pool.patterns);
        take(m, "synth.mask_pool.", "min_coverage", c.mask_pool.min_coverage);
        take(m, "synth.mask_pool.", "max_coverage", c.mask_pool.max_coverage);
        take(m, "synth.mask_pool.", "blobs", c.mask_pool.blobs);
    }
    c.validate();
    return c;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace

std::string synth_config_to_json(const SynthConfig& config) { return config_json(config).dump(2); }

SynthConfig synth_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("synth", std::string("not valid JSON: ") + e.what());
    }
    return config_from(j);
}

void write_dataset(const fs::path& dir, const Dataset& data) {
    fs::create_directories(dir);
    json ids = json::array();
    for (const auto& rec : data.sequences) {
        ids.push_back(rec.id);
        const fs::path sdir = dir / rec.id;
        fs::create_directories(sdir);
        save_tensor(sdir / "optical.bin", rec.clean.values);
        save_tensor(sdir / "sar.bin", rec.sar.values);
        save_tensor(sdir / "masks.bin", rec.masks.values);
        write_text(sdir / "dates.json", json{{"optical", rec.clean.dates}, {"sar", rec.sar.dates}}.dump());
        const json meta{{"id", rec.id},
                        {"seed", rec.seed},
                        {"optical_normalization", "clip [0, 8000], v / 4000 - 1"},
                        {"sar_normalization", "standardize, clip [-2, 2], halve"},
                        {"sar_mean", data.sar_stats.mean},
                        {"sar_std", data.sar_stats.stddev},
                        {"generator", config_json(data.config)}};
        write_text(sdir / "meta.json", meta.dump(2));
    }
    const json top{{"format", kDatasetFormat},
                   {"generator", config_json(data.config)},
                   {"sar_mean", data.sar_stats.mean},
                   {"sar_std", data.sar_stats.stddev},
                   {"sequences", ids}};
    write_text(dir / "dataset.json", top.dump(2));
}

Dataset read_dataset(const fs::path& dir) {
    const json top = read_json(dir / "dataset.json");
    if (top.value("format", "") != kDatasetFormat)
        throw std::runtime_error(dir.string() + ": not a tsflow dataset (format " + top.value("format", "?") + ")");
    Dataset data;
    data.config = config_from(top.at("generator"));
    data.sar_stats.mean = top.at("sar_mean").get<std::vector<double>>();
    data.sar_stats.stddev = top.at("sar_std").get<std::vector<double>>();
    for (const auto& id_json : top.at("sequences")) {
        const std::string id = id_json.get<std::string>();
        const fs::path sdir = dir / id;
        SequenceRecord rec;
        rec.id = id;
        rec.seed = read_json(sdir / "meta.json").at("seed").get<std::uint64_t>();
        const json dates = read_json(sdir / "dates.json");
        rec.clean.values = load_tensor(sdir / "optical.bin");
        rec.clean.dates = dates.at("optical").get<std::vector<int>>();
        rec.sar.values = load_tensor(sdir / "sar.bin");
        rec.sar.dates = dates.at("sar").get<std::vector<int>>();
        rec.masks.values = load_tensor(sdir / "masks.bin");
        if (rec.clean.values.rank() != 4 || rec.clean.values.dim(0) != rec.clean.dates.size())
            throw std::runtime_error(id + ": optical frames do not match the date list");
        if (rec.sar.values.rank() != 4 || rec.sar.values.dim(0) != rec.sar.dates.size())
            throw std::runtime_error(id + ": SAR frames do not match the date list");
        if (rec.masks.values.shape() !=
            Shape{rec.clean.values.dim(0), 1, rec.clean.values.dim(2), rec.clean.values.dim(3)})
            throw std::runtime_error(id + ": mask shape does not match the optical frames");
        require_strictly_increasing(rec.clean.dates, "read_dataset optical dates");
        require_strictly_increasing(rec.sar.dates, "read_dataset sar dates");
        require_binary_mask(rec.masks.values, "read_dataset masks");
        data.sequences.push_back(std::move(rec));
    }
    return data;
}

}  // namespace tsflow
