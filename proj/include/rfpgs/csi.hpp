// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rfpgs/oracle.hpp"
#include "rfpgs/rf_train.hpp"

namespace rfpgs {

/// Delay-domain taps equivalent to the angular spectrum's MPC set.
struct Cir {
    std::vector<std::pair<double, double>> taps; // (delay_ns, linear amplitude)
    double bandwidth_hint_hz = 0.0;

    void validate() const {
        double prev = -1.0;
        for (const auto& [d, a] : taps) {
            if (d < 0.0 || d < prev)
                throw std::invalid_argument("Cir: delays must be sorted and non-negative");
            prev = d;
            (void)a;
        }
    }
};

/// MPC list -> CIR taps at (tof, sqrt(linear power)); coincident delays
/// merge with their powers summed. Total linear power is conserved.
inline Cir spectrum_to_cir(const std::vector<Mpc>& mpcs, double bandwidth_hint_hz = 0.0,
                           double merge_tol_ns = 1e-6) {
    std::vector<std::pair<double, double>> delays; // (tof, power)
    delays.reserve(mpcs.size());
    for (const auto& m : mpcs)
        delays.emplace_back(m.tof_ns, m.linear_power());
    std::sort(delays.begin(), delays.end());
    Cir cir;
    cir.bandwidth_hint_hz = bandwidth_hint_hz;
    for (const auto& [tof, power] : delays) {
        if (!cir.taps.empty() && tof - cir.taps.back().first <= merge_tol_ns) {
            // merge: amplitudes combine in power
            double p = cir.taps.back().second * cir.taps.back().second + power;
            cir.taps.back().second = std::sqrt(p);
        } else {
            cir.taps.emplace_back(tof, std::sqrt(power));
        }
    }
    cir.validate();
    return cir;
}

/// Tx-side spectrum aggregated from the trained model: every above-floor
/// Rx pixel scatters its predicted path loss into the pixel of its
/// departure direction; colliding pixels keep the strongest path.
inline SpectrumGrid render_tx_spectrum(const SceneModel& scene, const Pose& tx_pose,
                                       const Pose& rx_pose, double floor_db,
                                       const RfTrainConfig& cfg = {}) {
    tx_pose.validate();
    const int rf = scene.sh_channel_index("rf_gain");
    const RfPixelCache cache = build_rf_cache(scene, rx_pose, cfg);
    std::vector<double> raw, clamped;
    cache_predict(cache, scene, rf, floor_db, raw, clamped);

    SpectrumGrid grid(tx_pose.width, tx_pose.height, {"pathloss_db"}, floor_db);
    float* pl = grid.channel(0);
    for (size_t px = 0; px < cache.pixels(); ++px) {
        if (clamped[px] <= floor_db + 1e-9)
            continue;
        Vec3 dep;
        if (cache.is_los[px]) {
            dep = rx_pose.position - scene.tx_position;
        } else if (cache.valid[px]) {
            dep = cache.intersections[px] - scene.tx_position;
        } else {
            continue;
        }
        if (norm(dep) < 1e-9)
            continue;
        int col, row;
        if (!tx_pose.direction_to_pixel_index(dep, col, row))
            continue;
        float& cell = pl[static_cast<size_t>(row) * tx_pose.width + col];
        cell = std::max(cell, static_cast<float>(clamped[px]));
    }
    return grid;
}

struct CsiExtractOptions {
    double prominence_db = 6.0; // above the 5x5 neighborhood minimum
    int window = 5;
};

/// Multipath components read back from the trained model at a pose: local
/// maxima of the predicted spectrum become MPCs with AoA from the pixel
/// direction, ToF from the reconstructed path length, AoD from the
/// intersection geometry, and the blended interaction gain.
inline std::vector<Mpc> extract_spatial_csi(const SceneModel& scene, const Pose& rx_pose,
                                            double floor_db, const RfTrainConfig& cfg = {},
                                            const CsiExtractOptions& opt = {}) {
    const int rf = scene.sh_channel_index("rf_gain");
    const RfPixelCache cache = build_rf_cache(scene, rx_pose, cfg);
    std::vector<double> raw, clamped;
    cache_predict(cache, scene, rf, floor_db, raw, clamped);

    const int w = cache.width, h = cache.height, half = opt.window / 2;
    std::vector<Mpc> out;
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const size_t px = static_cast<size_t>(row) * w + col;
            const double v = clamped[px];
            if (v <= floor_db + 1e-9)
                continue;
            bool is_max = true;
            double neigh_min = v;
            for (int dr = -half; dr <= half && is_max; ++dr)
                for (int dc = -half; dc <= half; ++dc) {
                    if (dr == 0 && dc == 0)
                        continue;
                    const int r = row + dr, c = col + dc;
                    if (r < 0 || r >= h || c < 0 || c >= w)
                        continue;
                    const double nv = clamped[static_cast<size_t>(r) * w + c];
                    if (nv > v || (nv == v && (dr < 0 || (dr == 0 && dc < 0)))) {
                        is_max = false;
                        break;
                    }
                    neigh_min = std::min(neigh_min, nv);
                }
            if (!is_max || v - neigh_min < opt.prominence_db)
                continue;

            const Vec3 arrival_src = cache.is_los[px]
                                         ? scene.tx_position - rx_pose.position
                                         : cache.intersections[px] - rx_pose.position;
            if (cache.is_los[px]) {
                const double d = norm(scene.tx_position - rx_pose.position);
                out.push_back(make_mpc(MpcKind::Los, v, d, rx_pose.position - scene.tx_position,
                                       arrival_src));
            } else if (cache.valid[px]) {
                const double d2 = cache.depth[px];
                const Vec3 x_int = cache.intersections[px];
                const double d1 = norm(x_int - scene.tx_position);
                Mpc m = make_mpc(MpcKind::Reflection, v, d1 + d2, x_int - scene.tx_position,
                                 arrival_src, x_int);
                // interaction gain along this path (dB)
                m.pathloss_db = v;
                out.push_back(m);
            }
        }
    }
    return out;
}

struct MultibounceOptions {
    double tau_spec_rad = deg2rad(10.0);
};

/// Flags pixels whose incident/outgoing geometry deviates from specular
/// reflection about the blended surface normal; LoS pixels and wedge-flagged
/// top contributors are excluded.
inline std::vector<char> flag_multibounce_candidates(const SceneModel& scene, const Pose& rx_pose,
                                                     double floor_db,
                                                     const RfTrainConfig& cfg = {},
                                                     const MultibounceOptions& opt = {}) {
    const int rf = scene.sh_channel_index("rf_gain");
    const RfPixelCache cache = build_rf_cache(scene, rx_pose, cfg);
    std::vector<double> raw, clamped;
    cache_predict(cache, scene, rf, floor_db, raw, clamped);

    std::vector<char> flags(cache.pixels(), 0);
    for (size_t px = 0; px < cache.pixels(); ++px) {
        if (clamped[px] <= floor_db + 1e-9 || cache.is_los[px] || !cache.valid[px])
            continue;
        if (cache.top_gauss[px] >= 0 &&
            scene.gaussians[static_cast<size_t>(cache.top_gauss[px])].is_wedge)
            continue;
        const Vec3 n = cache.normals[px];
        if (norm(n) < 0.5)
            continue;
        const Vec3 incident = normalized(cache.intersections[px] - scene.tx_position);
        const Vec3 outgoing = -1.0 * cache.pixel_dirs[px]; // surface -> receiver
        const Vec3 specular = incident - 2.0 * dot(incident, n) * n;
        const double mismatch =
            std::acos(std::clamp(dot(normalized(specular), normalized(outgoing)), -1.0, 1.0));
        if (mismatch > opt.tau_spec_rad)
            flags[px] = 1;
    }
    return flags;
}

} // namespace rfpgs
