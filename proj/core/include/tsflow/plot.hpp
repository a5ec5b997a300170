// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tsflow {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::array<std::uint8_t, 3> color{0, 0, 0};
};

struct ChartOptions {
    std::size_t width = 640;
    std::size_t height = 400;
    bool log_y = false;
};

/// RGB raster [height][width][3] of a line chart with axes and light gridlines. Text is
/// not drawn; series are distinguished by colour.
struct Raster {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> rgb;
};

Raster render_line_chart(const std::vector<Series>& series, const ChartOptions& options = {});

void write_png(const std::filesystem::path& path, const Raster& image);

/// Writes a grayscale PNG of an [H, W] map scaled linearly from [lo, hi].
void write_map_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
                   const std::vector<double>& values, double lo, double hi, std::size_t scale = 8);

}  // namespace tsflow
