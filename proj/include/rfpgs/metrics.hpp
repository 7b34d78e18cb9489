// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rfpgs/types.hpp"

namespace rfpgs {

namespace detail {

inline std::vector<double> clamped_pathloss(const SpectrumGrid& g) {
    const int pl = g.channel_index("pathloss_db");
    if (pl < 0)
        throw std::invalid_argument("metrics: grid lacks a pathloss_db channel");
    std::vector<double> out(g.pixels());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = std::clamp<double>(g.channel(pl)[i], g.floor_db, 0.0);
    return out;
}

} // namespace detail

/// Peak signal-to-noise ratio on the clamped dB rasters; the peak is the
/// dynamic range -floor_db. Identical inputs report the 99 dB cap.
inline double psnr(const SpectrumGrid& pred, const SpectrumGrid& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw std::invalid_argument("psnr: dimensions mismatch");
    const auto a = detail::clamped_pathloss(pred);
    const auto b = detail::clamped_pathloss(gt);
    double mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double e = a[i] - b[i];
        mse += e * e;
    }
    mse /= static_cast<double>(a.size());
    const double range = -gt.floor_db;
    if (mse <= 0.0)
        return 99.0;
    return std::min(99.0, 20.0 * std::log10(range / std::sqrt(mse)));
}

/// Mean SSIM over valid (fully interior) 11x11 gaussian windows, with the
/// standard stabilizers scaled by the dynamic range.
inline double ssim(const SpectrumGrid& pred, const SpectrumGrid& gt) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw std::invalid_argument("ssim: dimensions mismatch");
    const auto x = detail::clamped_pathloss(pred);
    const auto y = detail::clamped_pathloss(gt);
    const int w = pred.width, h = pred.height;
    const double range = -gt.floor_db;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    constexpr int win = 11, half = win / 2;
    double kernel[win][win];
    double ksum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dx = i - half, dy = j - half;
            kernel[i][j] = std::exp(-0.5 * (dx * dx + dy * dy) / (1.5 * 1.5));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (auto& v : row)
            v /= ksum;

    if (w < win || h < win)
        throw std::invalid_argument("ssim: raster smaller than the 11x11 window");

    double acc = 0.0;
    size_t count = 0;
    for (int row = half; row < h - half; ++row) {
        for (int col = half; col < w - half; ++col) {
            double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
            for (int i = -half; i <= half; ++i)
                for (int j = -half; j <= half; ++j) {
                    const double kv = kernel[i + half][j + half];
                    const double xv = x[static_cast<size_t>(row + i) * w + (col + j)];
                    const double yv = y[static_cast<size_t>(row + i) * w + (col + j)];
                    mx += kv * xv;
                    my += kv * yv;
                    mxx += kv * xv * xv;
                    myy += kv * yv * yv;
                    mxy += kv * xv * yv;
                }
            const double vx = mxx - mx * mx;
            const double vy = myy - my * my;
            const double cxy = mxy - mx * my;
            acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return acc / static_cast<double>(count);
}

} // namespace rfpgs
