// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "tsflow/plot.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <stdexcept>

namespace tsflow {

namespace {

constexpr std::size_t kMargin = 40;

void put(Raster& r, long x, long y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= static_cast<long>(r.width) || y >= static_cast<long>(r.height)) return;
    const std::size_t i = (static_cast<std::size_t>(y) * r.width + static_cast<std::size_t>(x)) * 3;
    r.rgb[i] = c[0];
    r.rgb[i + 1] = c[1];
    r.rgb[i + 2] = c[2];
}

// Bresenham, two pixels thick.
void line(Raster& r, long x0, long y0, long x1, long y1, std::array<std::uint8_t, 3> c) {
    const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    long err = dx + dy;
    for (;;) {
        put(r, x0, y0, c);
        put(r, x0, y0 + 1, c);
        if (x0 == x1 && y0 == y1) break;
        const long e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

Raster render_line_chart(const std::vector<Series>& series, const ChartOptions& options) {
    if (options.width <= 2 * kMargin || options.height <= 2 * kMargin)
        throw std::invalid_argument("render_line_chart: canvas too small");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("render_line_chart: x/y length mismatch in " + s.label);
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (options.log_y) {
                if (!(y > 0.0)) continue;
                y = std::log10(y);
            }
            if (!std::isfinite(y) || !std::isfinite(s.x[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (!std::isfinite(xmin)) throw std::invalid_argument("render_line_chart: no finite points");
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    Raster r{options.width, options.height, std::vector<std::uint8_t>(options.width * options.height * 3, 255)};
    const double pw = static_cast<double>(options.width - 2 * kMargin);
    const double ph = static_cast<double>(options.height - 2 * kMargin);
    auto px = [&](double x) { return static_cast<long>(std::lround(kMargin + (x - xmin) / (xmax - xmin) * pw)); };
    auto py = [&](double y) {
        return static_cast<long>(std::lround(options.height - kMargin - (y - ymin) / (ymax - ymin) * ph));
    };

    const std::array<std::uint8_t, 3> grid{225, 225, 225}, axis{60, 60, 60};
    for (int g = 1; g < 5; ++g) {
        const long gy = static_cast<long>(kMargin + g * ph / 5);
        const long gx = static_cast<long>(kMargin + g * pw / 5);
        for (long x = kMargin; x < static_cast<long>(options.width - kMargin); ++x) put(r, x, gy, grid);
        for (long y = kMargin; y < static_cast<long>(options.height - kMargin); ++y) put(r, gx, y, grid);
    }
    const long left = kMargin, bottom = static_cast<long>(options.height - kMargin);
    line(r, left, kMargin, left, bottom, axis);
    line(r, left, bottom, static_cast<long>(options.width - kMargin), bottom, axis);

    for (const auto& s : series) {
        bool have_prev = false;
        long lx = 0, ly = 0;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (options.log_y) y = y > 0.0 ? std::log10(y) : std::numeric_limits<double>::quiet_NaN();
            if (!std::isfinite(y)) {
                have_prev = false;
                continue;
            }
            const long cx = px(s.x[i]), cy = py(y);
            if (have_prev) line(r, lx, ly, cx, cy, s.color);
            for (long d = -2; d <= 2; ++d) {
                put(r, cx + d, cy, s.color);
                put(r, cx, cy + d, s.color);
            }
            lx = cx;
            ly = cy;
            have_prev = true;
        }
    }
    // Legend swatches, top right, in series order.
    for (std::size_t i = 0; i < series.size(); ++i)
        for (long dy = 0; dy < 8; ++dy)
            for (long dx = 0; dx < 18; ++dx)
                put(r, static_cast<long>(options.width - kMargin) - 20 + dx, 10 + static_cast<long>(i) * 12 + dy,
                    series[i].color);
    return r;
}

void write_png(const std::filesystem::path& path, const Raster& image) {
    if (image.rgb.size() != image.width * image.height * 3) throw std::invalid_argument("write_png: bad raster");
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("libpng: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        throw std::runtime_error("libpng: failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < image.height; ++y)
        png_write_row(png, const_cast<png_bytep>(image.rgb.data() + y * image.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_map_png(const std::filesystem::path& path, std::size_t height, std::size_t width,
                   const std::vector<double>& values, double lo, double hi, std::size_t scale) {
    if (values.size() != height * width) throw std::invalid_argument("write_map_png: value count mismatch");
    if (!(hi > lo)) throw std::invalid_argument("write_map_png: empty value range");
    scale = std::max<std::size_t>(scale, 1);
    Raster r{width * scale, height * scale, std::vector<std::uint8_t>(width * scale * height * scale * 3)};
    for (std::size_t y = 0; y < r.height; ++y)
        for (std::size_t x = 0; x < r.width; ++x) {
            const double v = std::clamp((values[(y / scale) * width + x / scale] - lo) / (hi - lo), 0.0, 1.0);
            const auto g = static_cast<std::uint8_t>(std::lround(v * 255.0));
            put(r, static_cast<long>(x), static_cast<long>(y), {g, g, g});
        }
    write_png(path, r);
}

}  // namespace tsflow
