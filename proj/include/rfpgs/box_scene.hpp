// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rfpgs/oracle.hpp"

namespace rfpgs {

/// Desk-scale indoor scene: an axis-aligned room shell plus a few pillars
/// whose vertical edges act as diffracting wedges.
struct BoxSceneConfig {
    double room_w = 6.0, room_d = 4.0, room_h = 3.0;
    int pillars = 2;
    std::uint64_t seed = 1;
    Vec3 tx_position{0.9, 3.3, 2.2};
    int n_train = 24;
    int n_test = 10;
    double rx_height = 1.5;
    double carrier_hz = 2.4e9;
    double floor_db = -100.0;
    // Rx-side spectrum raster (matches the querying FoV convention:
    // full azimuth, 90 degrees of zenith about the horizon).
    int rf_width = 180, rf_height = 45;
    double rf_fov_zen = kPi / 2;
    // Visual/depth raster for the geometry stage.
    int vis_width = 180, vis_height = 75;
    double vis_fov_zen = deg2rad(150.0);

    void validate() const {
        if (room_w < 1.0 || room_d < 1.0 || room_h < 1.0)
            throw std::invalid_argument("BoxSceneConfig: degenerate room dimensions");
        if (pillars < 0 || n_train < 1 || n_test < 0)
            throw std::invalid_argument("BoxSceneConfig: bad counts");
    }
};

struct BoxScene {
    OracleScene scene;
    Vec3 tx_position;
    double carrier_hz = 2.4e9;
    double floor_db = -100.0;
    std::vector<Pose> train_rf, test_rf;   // spectrum rasters
    std::vector<Pose> train_vis, test_vis; // visual/depth rasters (same poses)
    std::vector<Aabb> obstacles;           // pillar volumes, for containment checks

    double wavelength_m() const { return kSpeedOfLight / carrier_hz; }
};

namespace detail {

inline Facet make_rect(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                       double gain_db, double albedo) {
    Facet f;
    f.vertices = {a, b, c, d};
    f.gain_db = gain_db;
    f.albedo = albedo;
    f.validate();
    return f;
}

} // namespace detail

inline BoxScene generate_box_scene(const BoxSceneConfig& cfg) {
    cfg.validate();
    BoxScene out;
    out.tx_position = cfg.tx_position;
    out.carrier_hz = cfg.carrier_hz;
    out.floor_db = cfg.floor_db;
    const double W = cfg.room_w, D = cfg.room_d, H = cfg.room_h;
    out.scene.bbox = {{0, 0, 0}, {W, D, H}};

    Rng rng = make_rng(cfg.seed, 100);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto jitter = [&](double lo, double hi) { return lo + u01(rng) * (hi - lo); };

    auto& fs = out.scene.facets;
    fs.push_back(detail::make_rect({0, 0, 0}, {W, 0, 0}, {W, D, 0}, {0, D, 0},
                                   jitter(-7, -5), 0.45)); // floor
    fs.push_back(detail::make_rect({0, 0, H}, {0, D, H}, {W, D, H}, {W, 0, H},
                                   jitter(-9, -7), 0.90)); // ceiling
    fs.push_back(detail::make_rect({0, 0, 0}, {0, D, 0}, {0, D, H}, {0, 0, H},
                                   jitter(-4, -2), jitter(0.55, 0.80)));
    fs.push_back(detail::make_rect({W, 0, 0}, {W, 0, H}, {W, D, H}, {W, D, 0},
                                   jitter(-4, -2), jitter(0.55, 0.80)));
    fs.push_back(detail::make_rect({0, 0, 0}, {0, 0, H}, {W, 0, H}, {W, 0, 0},
                                   jitter(-4, -2), jitter(0.55, 0.80)));
    fs.push_back(detail::make_rect({0, D, 0}, {W, D, 0}, {W, D, H}, {0, D, H},
                                   jitter(-4, -2), jitter(0.55, 0.80)));

    // Pillars: rejection-placed away from the walls, the Tx and each other.
    for (int p = 0; p < cfg.pillars; ++p) {
        for (int attempt = 0; attempt < 256; ++attempt) {
            const double sx = jitter(0.45, 0.8), sy = jitter(0.45, 0.8);
            const double cx = jitter(1.0 + sx, W - 1.0 - sx);
            const double cy = jitter(1.0 + sy, D - 1.0 - sy);
            const double hp = jitter(1.8, std::min(2.6, H - 0.2));
            Aabb box{{cx - sx / 2, cy - sy / 2, 0.0}, {cx + sx / 2, cy + sy / 2, hp}};
            bool ok = norm(Vec3{cx, cy, cfg.tx_position.z} - cfg.tx_position) > 1.2;
            for (const auto& o : out.obstacles)
                if (std::abs(o.min.x + o.max.x - 2 * cx) < (o.max.x - o.min.x) + sx + 1.0 &&
                    std::abs(o.min.y + o.max.y - 2 * cy) < (o.max.y - o.min.y) + sy + 1.0)
                    ok = false;
            if (!ok)
                continue;
            const double g = jitter(-6, -3);
            const double alb = jitter(0.30, 0.50);
            const double x0 = box.min.x, x1 = box.max.x, y0 = box.min.y, y1 = box.max.y;
            fs.push_back(detail::make_rect({x0, y0, 0}, {x0, y0, hp}, {x1, y0, hp}, {x1, y0, 0}, g, alb));
            fs.push_back(detail::make_rect({x1, y0, 0}, {x1, y0, hp}, {x1, y1, hp}, {x1, y1, 0}, g, alb));
            fs.push_back(detail::make_rect({x1, y1, 0}, {x1, y1, hp}, {x0, y1, hp}, {x0, y1, 0}, g, alb));
            fs.push_back(detail::make_rect({x0, y1, 0}, {x0, y1, hp}, {x0, y0, hp}, {x0, y0, 0}, g, alb));
            fs.push_back(detail::make_rect({x0, y0, hp}, {x1, y0, hp}, {x1, y1, hp}, {x0, y1, hp}, g, alb));
            for (const auto& corner :
                 {Vec3{x0, y0, 0}, Vec3{x1, y0, 0}, Vec3{x1, y1, 0}, Vec3{x0, y1, 0}})
                out.scene.wedges.push_back(Wedge{corner, {corner.x, corner.y, hp}, kPi / 2,
                                                 -10.0, 15.0});
            out.obstacles.push_back(box);
            break;
        }
    }
    out.scene.validate();

    auto sample_poses = [&](int count, std::uint64_t stream, std::vector<Pose>& rf,
                            std::vector<Pose>& vis) {
        Rng prng = make_rng(cfg.seed, stream);
        std::uniform_real_distribution<double> pu(0.0, 1.0);
        while (static_cast<int>(rf.size()) < count) {
            Vec3 pos{0.6 + pu(prng) * (W - 1.2), 0.6 + pu(prng) * (D - 1.2), cfg.rx_height};
            bool inside = false;
            for (const auto& o : out.obstacles)
                if (o.contains(pos, 0.3))
                    inside = true;
            if (inside || norm(pos - cfg.tx_position) < 0.5)
                continue;
            const double yaw = (pu(prng) * 2.0 - 1.0) * kPi;
            Pose rp;
            rp.position = pos;
            rp.orientation = quat_from_axis_angle({0, 0, 1}, yaw);
            rp.fov_az = kTwoPi;
            rp.fov_zen = cfg.rf_fov_zen;
            rp.width = cfg.rf_width;
            rp.height = cfg.rf_height;
            rp.validate();
            Pose vp = rp;
            vp.fov_zen = cfg.vis_fov_zen;
            vp.width = cfg.vis_width;
            vp.height = cfg.vis_height;
            vp.validate();
            rf.push_back(rp);
            vis.push_back(vp);
        }
    };
    sample_poses(cfg.n_train, 201, out.train_rf, out.train_vis);
    sample_poses(cfg.n_test, 202, out.test_rf, out.test_vis);
    return out;
}

/// Default Tx-side raster: 180 degrees of azimuth, 90 degrees of zenith,
/// oriented toward the middle of the room.
inline Pose default_tx_pose(const BoxScene& bs, int width = 90, int height = 45) {
    Pose pose;
    pose.position = bs.tx_position;
    const Vec3 room_center = 0.5 * (bs.scene.bbox.min + bs.scene.bbox.max);
    Vec3 fwd = room_center - bs.tx_position;
    fwd.z = 0.0;
    const double yaw = std::atan2(fwd.y, fwd.x);
    pose.orientation = quat_from_axis_angle({0, 0, 1}, yaw);
    pose.projection = Projection::Equirectangular;
    pose.fov_az = kPi;
    pose.fov_zen = kPi / 2;
    pose.width = width;
    pose.height = height;
    pose.validate();
    return pose;
}

} // namespace rfpgs
