// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include <zlib.h>

#include "rfpgs/types.hpp"

namespace rfpgs {

namespace detail {

inline void png_chunk(std::ofstream& os, const char type[4], const std::vector<std::uint8_t>& data) {
    auto be32 = [](std::uint32_t v) {
        return std::array<std::uint8_t, 4>{static_cast<std::uint8_t>(v >> 24),
                                           static_cast<std::uint8_t>(v >> 16),
                                           static_cast<std::uint8_t>(v >> 8),
                                           static_cast<std::uint8_t>(v)};
    };
    const auto len = be32(static_cast<std::uint32_t>(data.size()));
    os.write(reinterpret_cast<const char*>(len.data()), 4);
    os.write(type, 4);
    if (!data.empty())
        os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    std::uint32_t crc = crc32(0, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty())
        crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    const auto crc_be = be32(crc);
    os.write(reinterpret_cast<const char*>(crc_be.data()), 4);
}

} // namespace detail

/// Writes an 8-bit RGB PNG (row-major, 3 bytes per pixel).
inline void write_png(const std::filesystem::path& path, int width, int height,
                      const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<size_t>(width) * height * 3)
        throw std::invalid_argument("write_png: buffer size mismatch");
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write " + path.string());
    static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<std::uint8_t> ihdr(13);
    auto put32 = [&](size_t at, std::uint32_t v) {
        ihdr[at] = static_cast<std::uint8_t>(v >> 24);
        ihdr[at + 1] = static_cast<std::uint8_t>(v >> 16);
        ihdr[at + 2] = static_cast<std::uint8_t>(v >> 8);
        ihdr[at + 3] = static_cast<std::uint8_t>(v);
    };
    put32(0, static_cast<std::uint32_t>(width));
    put32(4, static_cast<std::uint32_t>(height));
    ihdr[8] = 8;  // bit depth
    ihdr[9] = 2;  // truecolor
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    detail::png_chunk(os, "IHDR", ihdr);

    // Filter byte 0 per scanline, then zlib-deflate.
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (static_cast<size_t>(width) * 3 + 1));
    for (int row = 0; row < height; ++row) {
        raw.push_back(0);
        const auto* src = rgb.data() + static_cast<size_t>(row) * width * 3;
        raw.insert(raw.end(), src, src + static_cast<size_t>(width) * 3);
    }
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    compressed.resize(bound);
    detail::png_chunk(os, "IDAT", compressed);
    detail::png_chunk(os, "IEND", {});
}

/// Perceptual dB->color ramp over [floor_db, 0]: dark blue through cyan and
/// yellow to red. Values at the floor map to near-black.
inline void db_to_rgb(double value_db, double floor_db, std::uint8_t* rgb) {
    double t = (value_db - floor_db) / (-floor_db);
    t = std::clamp(t, 0.0, 1.0);
    auto lerp = [](double a, double b, double u) { return a + (b - a) * u; };
    double r, g, b;
    if (t < 0.25) {
        const double u = t / 0.25;
        r = lerp(5, 20, u), g = lerp(5, 60, u), b = lerp(30, 180, u);
    } else if (t < 0.5) {
        const double u = (t - 0.25) / 0.25;
        r = lerp(20, 20, u), g = lerp(60, 200, u), b = lerp(180, 200, u);
    } else if (t < 0.75) {
        const double u = (t - 0.5) / 0.25;
        r = lerp(20, 250, u), g = lerp(200, 240, u), b = lerp(200, 40, u);
    } else {
        const double u = (t - 0.75) / 0.25;
        r = lerp(250, 230, u), g = lerp(240, 20, u), b = lerp(40, 20, u);
    }
    rgb[0] = static_cast<std::uint8_t>(r);
    rgb[1] = static_cast<std::uint8_t>(g);
    rgb[2] = static_cast<std::uint8_t>(b);
}

/// Side-by-side tone-mapped panel (ground truth left, prediction right) on a
/// fixed ramp over [floor_db, 0] so panels compare across runs.
inline void save_comparison_panel(const SpectrumGrid& gt, const SpectrumGrid& pred,
                                  const std::filesystem::path& path) {
    if (gt.width != pred.width || gt.height != pred.height)
        throw std::invalid_argument("save_comparison_panel: dimensions mismatch");
    const int pl_gt = gt.channel_index("pathloss_db");
    const int pl_pr = pred.channel_index("pathloss_db");
    const int gap = 2;
    const int w = gt.width * 2 + gap, h = gt.height;
    std::vector<std::uint8_t> rgb(static_cast<size_t>(w) * h * 3, 255);
    for (int row = 0; row < h; ++row)
        for (int col = 0; col < gt.width; ++col) {
            db_to_rgb(gt.at(pl_gt, col, row), gt.floor_db,
                      &rgb[(static_cast<size_t>(row) * w + col) * 3]);
            db_to_rgb(pred.at(pl_pr, col, row), gt.floor_db,
                      &rgb[(static_cast<size_t>(row) * w + gt.width + gap + col) * 3]);
        }
    write_png(path, w, h, rgb);
}

/// Grayscale tone map of an arbitrary scalar raster (for depth/visual maps).
inline void save_gray_png(const std::vector<double>& values, int width, int height, double lo,
                          double hi, const std::filesystem::path& path) {
    std::vector<std::uint8_t> rgb(static_cast<size_t>(width) * height * 3);
    for (size_t i = 0; i < values.size(); ++i) {
        const double t = std::clamp((values[i] - lo) / (hi - lo + 1e-12), 0.0, 1.0);
        const auto v = static_cast<std::uint8_t>(255.0 * t);
        rgb[i * 3] = rgb[i * 3 + 1] = rgb[i * 3 + 2] = v;
    }
    write_png(path, width, height, rgb);
}

} // namespace rfpgs
