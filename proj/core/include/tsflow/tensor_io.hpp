// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tsflow/tensor.hpp"

namespace tsflow {

// On-disk tensor layout:
//   u64 little-endian header length L
//   L bytes of JSON: {"dtype": "f64"|"f32", "shape": [...], "byte_offset": N}
//   zero padding up to byte_offset (8-byte aligned)
//   little-endian values, row-major
std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Writes one file per tensor plus manifest.json listing names in order.
void save_tensor_set(const std::filesystem::path& dir, const NamedTensors& tensors);
NamedTensors load_tensor_set(const std::filesystem::path& dir);

}  // namespace tsflow
