// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rfpgs/common.hpp"
#include "rfpgs/projection.hpp"
#include "rfpgs/sh.hpp"
#include "rfpgs/vec.hpp"

namespace rfpgs {

/// One flattened surface primitive. Scales are stored as logs and opacity as
/// a logit so the optimizer can run unconstrained; the quaternion is kept
/// raw and renormalized after every step.
struct PlanarGaussian {
    Vec3 x_g{0, 0, 0};      // center position [m]
    Vec3 s_log{0, 0, 0};    // log of the per-axis scales [log m]
    Quat q{1, 0, 0, 0};     // rotation local -> world
    double alpha_logit = 0; // sigmoid(alpha_logit) = base opacity in (0,1)
    ShTable sh;             // per-channel interaction/color coefficients
    bool is_wedge = false;
    double radius_boost = 1.0; // in-plane enlargement applied when is_wedge

    Vec3 scales() const { return {std::exp(s_log.x), std::exp(s_log.y), std::exp(s_log.z)}; }
    void set_scales(const Vec3& s) {
        if (!(s.x > 0 && s.y > 0 && s.z > 0))
            throw std::invalid_argument("PlanarGaussian: scales must be positive");
        s_log = {std::log(s.x), std::log(s.y), std::log(s.z)};
    }
    double alpha() const { return sigmoid(alpha_logit); }
    void set_alpha(double a) { alpha_logit = logit(a); }
};

/// Index of the smallest scale axis; ties break to the lowest index.
inline int min_scale_axis(const PlanarGaussian& g) {
    const Vec3 s = g.s_log; // exp is monotone, compare logs directly
    int k = 0;
    if (s.y < s.x)
        k = 1;
    if (s.z < (k == 0 ? s.x : s.y))
        k = 2;
    return k;
}

/// World-frame unit normal: the rotated minimum-scale axis.
inline Vec3 normal_from_gaussian(const PlanarGaussian& g) {
    Vec3 e{0, 0, 0};
    e[min_scale_axis(g)] = 1.0;
    return rotate(g.q, e);
}

/// Angular-domain raster of a Spatial-CSI channel map. Data is channel-major
/// float32; floor_db is the "no signal" sentinel for path-loss channels.
struct SpectrumGrid {
    int width = 0;
    int height = 0;
    std::vector<std::string> channels;
    std::vector<float> data;
    double floor_db = -160.0;

    SpectrumGrid() = default;
    SpectrumGrid(int w, int h, std::vector<std::string> ch, double floor)
        : width(w), height(h), channels(std::move(ch)),
          data(static_cast<size_t>(w) * h * channels.size(), 0.0f), floor_db(floor) {
        for (size_t c = 0; c < channels.size(); ++c)
            if (channels[c] == "pathloss_db")
                std::fill(channel(static_cast<int>(c)),
                          channel(static_cast<int>(c)) + static_cast<size_t>(w) * h,
                          static_cast<float>(floor));
    }

    int channel_count() const { return static_cast<int>(channels.size()); }
    size_t pixels() const { return static_cast<size_t>(width) * height; }

    int channel_index(const std::string& name) const {
        for (size_t i = 0; i < channels.size(); ++i)
            if (channels[i] == name)
                return static_cast<int>(i);
        return -1;
    }

    float* channel(int c) { return data.data() + static_cast<size_t>(c) * pixels(); }
    const float* channel(int c) const { return data.data() + static_cast<size_t>(c) * pixels(); }

    float& at(int c, int col, int row) {
        return data[static_cast<size_t>(c) * pixels() + static_cast<size_t>(row) * width + col];
    }
    float at(int c, int col, int row) const {
        return data[static_cast<size_t>(c) * pixels() + static_cast<size_t>(row) * width + col];
    }

    void validate() const {
        if (data.size() != pixels() * channels.size())
            throw std::invalid_argument("SpectrumGrid: data length mismatch");
        const int pl = channel_index("pathloss_db");
        if (pl >= 0) {
            const float* p = channel(pl);
            for (size_t i = 0; i < pixels(); ++i)
                if (p[i] < static_cast<float>(floor_db) - 1e-4f)
                    throw std::invalid_argument("SpectrumGrid: pathloss below floor_db");
        }
    }

    /// Clamps a path-loss channel from below at floor_db.
    void apply_floor() {
        const int pl = channel_index("pathloss_db");
        if (pl < 0)
            return;
        float* p = channel(pl);
        const float f = static_cast<float>(floor_db);
        for (size_t i = 0; i < pixels(); ++i)
            p[i] = std::max(p[i], f);
    }
};

struct Aabb {
    Vec3 min{0, 0, 0};
    Vec3 max{0, 0, 0};

    Vec3 extent() const { return max - min; }
    double diagonal() const { return norm(extent()); }
    bool contains(const Vec3& p, double inflate = 0.0) const {
        const Vec3 pad = extent() * (0.5 * inflate);
        return p.x >= min.x - pad.x && p.x <= max.x + pad.x && p.y >= min.y - pad.y &&
               p.y <= max.y + pad.y && p.z >= min.z - pad.z && p.z <= max.z + pad.z;
    }
    void clamp_inside(Vec3& p, double inflate = 0.0) const {
        const Vec3 pad = extent() * (0.5 * inflate);
        p.x = std::clamp(p.x, min.x - pad.x, max.x + pad.x);
        p.y = std::clamp(p.y, min.y - pad.y, max.y + pad.y);
        p.z = std::clamp(p.z, min.z - pad.z, max.z + pad.z);
    }
};

/// The learned scene: primitives plus the transmitter configuration they
/// were trained against.
struct SceneModel {
    std::vector<PlanarGaussian> gaussians;
    Vec3 tx_position{0, 0, 0};
    double carrier_hz = 2.4e9;
    Aabb bbox;
    int sh_degree = 3;
    std::vector<std::string> sh_channels{"vis", "rf_gain"};

    double wavelength_m() const { return kSpeedOfLight / carrier_hz; }

    int sh_channel_index(const std::string& name) const {
        for (size_t i = 0; i < sh_channels.size(); ++i)
            if (sh_channels[i] == name)
                return static_cast<int>(i);
        return -1;
    }

    void validate() const {
        if (!(carrier_hz > 0))
            throw std::invalid_argument("SceneModel: carrier_hz must be positive");
        if (sh_degree < 0 || sh_degree > kShMaxDegree)
            throw std::invalid_argument("SceneModel: sh_degree out of range");
        const int nb = sh_basis_count(sh_degree);
        const int nc = static_cast<int>(sh_channels.size());
        for (const auto& g : gaussians) {
            if (g.sh.degree != sh_degree || g.sh.channels != nc)
                throw std::invalid_argument("SceneModel: gaussian SH table shape mismatch");
            if (g.sh.coeffs.size() != static_cast<size_t>(nc) * nb)
                throw std::invalid_argument("SceneModel: gaussian SH coefficient count mismatch");
            if (!(g.radius_boost >= 1.0))
                throw std::invalid_argument("SceneModel: radius_boost must be >= 1");
            if (!bbox.contains(g.x_g, 0.10))
                throw std::invalid_argument("SceneModel: gaussian center outside inflated bbox");
        }
    }
};

/// Fingerprint of the geometric parameters only (positions, scales,
/// rotations, opacities); the RF stage must leave this unchanged.
inline std::uint64_t geometry_hash(const SceneModel& scene) {
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& g : scene.gaussians) {
        const double geo[11] = {g.x_g.x,  g.x_g.y,  g.x_g.z, g.s_log.x, g.s_log.y, g.s_log.z,
                                g.q.w,    g.q.x,    g.q.y,   g.q.z,     g.alpha_logit};
        h = fnv1a(geo, sizeof(geo), h);
    }
    return h;
}

} // namespace rfpgs
