// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

namespace tsflow {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

constexpr const char* kManifestFormat = "tsflow-tensors/1";

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
}

std::string file_name_for(const std::string& name) {
    std::string out;
    for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-') ? c : '_';
    return out + ".bin";
}

}  // namespace

std::string encode_tensor(const Tensor& t) {
    nlohmann::json header;
    header["dtype"] = "f64";
    header["shape"] = t.shape();
    // The header length depends on byte_offset's digit count; iterate to a fixed point.
    std::size_t offset = 0;
    std::string text;
    for (int i = 0; i < 4; ++i) {
        header["byte_offset"] = offset;
        text = header.dump();
        const std::size_t needed = (8 + text.size() + 7) / 8 * 8;
        if (needed == offset) break;
        offset = needed;
    }
    std::string out(offset + t.numel() * sizeof(double), '\0');
    const std::uint64_t len = text.size();
    std::memcpy(out.data(), &len, sizeof(len));
    std::memcpy(out.data() + 8, text.data(), text.size());
    if (t.numel()) std::memcpy(out.data() + offset, t.values().data(), t.numel() * sizeof(double));
    return out;
}

Tensor decode_tensor(std::string_view bytes) {
    if (bytes.size() < 8) throw std::runtime_error("tensor file: truncated header length");
    std::uint64_t len = 0;
    std::memcpy(&len, bytes.data(), sizeof(len));
    if (len > bytes.size() - 8) throw std::runtime_error("tensor file: header length exceeds file size");
    const auto header = nlohmann::json::parse(bytes.substr(8, len));
    const std::string dtype = header.at("dtype").get<std::string>();
    const Shape shape = header.at("shape").get<Shape>();
    const std::size_t offset = header.at("byte_offset").get<std::size_t>();
    const std::size_t n = shape_numel(shape);
    std::vector<double> values(n);
    if (dtype == "f64") {
        if (offset + n * 8 != bytes.size()) throw std::runtime_error("tensor file: payload size mismatch");
        if (n) std::memcpy(values.data(), bytes.data() + offset, n * 8);
    } else if (dtype == "f32") {
        if (offset + n * 4 != bytes.size()) throw std::runtime_error("tensor file: payload size mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            float f;
            std::memcpy(&f, bytes.data() + offset + i * 4, 4);
            values[i] = f;
        }
    } else {
        throw std::runtime_error("tensor file: unsupported dtype " + dtype);
    }
    return Tensor(shape, std::move(values));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor load_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }

void save_tensor_set(const std::filesystem::path& dir, const NamedTensors& tensors) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = kManifestFormat;
    manifest["tensors"] = nlohmann::json::array();
    for (const auto& [name, t] : tensors) {
        const std::string file = file_name_for(name);
        save_tensor(dir / file, t);
        manifest["tensors"].push_back({{"name", name}, {"file", file}, {"shape", t.shape()}});
    }
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

NamedTensors load_tensor_set(const std::filesystem::path& dir) {
    const auto manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
    if (manifest.at("format") != kManifestFormat) throw std::runtime_error("tensor set: unknown manifest format");
    NamedTensors out;
    for (const auto& entry : manifest.at("tensors")) {
        Tensor t = load_tensor(dir / entry.at("file").get<std::string>());
        if (t.shape() != entry.at("shape").get<Shape>())
            throw std::runtime_error("tensor set: shape mismatch for " + entry.at("name").get<std::string>());
        out.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    return out;
}

}  // namespace tsflow
