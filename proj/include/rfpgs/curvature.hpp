// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rfpgs/splat.hpp"

namespace rfpgs {

struct CurvatureMap {
    int width = 0, height = 0;
    std::vector<double> score;   // >= 0; high at true wedges
    std::vector<char> wedge_mask;
    std::vector<char> valid;

    size_t pixels() const { return static_cast<size_t>(width) * height; }
};

/// Wedge criterion contrast: strong perpendicular-distance gradients with
/// low depth gradients mark true 3D wedges; silhouette edges fail the depth
/// condition. Thresholds are meters per pixel; invalid pixels (and their
/// neighbors) are excluded.
inline CurvatureMap estimate_curvature(const std::vector<double>& depth_map,
                                       const std::vector<double>& perp_map,
                                       const std::vector<char>& valid, int width, int height,
                                       double tau_perp, double tau_depth) {
    if (depth_map.size() != perp_map.size() ||
        depth_map.size() != static_cast<size_t>(width) * height || valid.size() != depth_map.size())
        throw std::invalid_argument("estimate_curvature: map dimensions mismatch");
    if (!(tau_perp > 0.0) || !(tau_depth > 0.0))
        throw std::invalid_argument("estimate_curvature: thresholds must be positive");
    CurvatureMap out;
    out.width = width;
    out.height = height;
    out.score.assign(depth_map.size(), 0.0);
    out.wedge_mask.assign(depth_map.size(), 0);
    out.valid.assign(depth_map.size(), 0);

    auto grad_mag = [&](const std::vector<double>& m, int col, int row) {
        const size_t px = static_cast<size_t>(row) * width + col;
        const double gx = 0.5 * (m[px + 1] - m[px - 1]);
        const double gy = 0.5 * (m[px + width] - m[px - width]);
        return std::hypot(gx, gy);
    };

    for (int row = 1; row < height - 1; ++row) {
        for (int col = 1; col < width - 1; ++col) {
            const size_t px = static_cast<size_t>(row) * width + col;
            if (!valid[px] || !valid[px - 1] || !valid[px + 1] || !valid[px - width] ||
                !valid[px + width])
                continue;
            out.valid[px] = 1;
            const double g_perp = grad_mag(perp_map, col, row);
            const double g_depth = grad_mag(depth_map, col, row);
            out.score[px] = g_perp * sigmoid((tau_depth - g_depth) / tau_depth);
            out.wedge_mask[px] = (g_perp > tau_perp && g_depth < tau_depth) ? 1 : 0;
        }
    }
    return out;
}

/// World-space ray-surface intersections of a rendered view; a pixel is
/// usable when it accumulated enough opacity and a valid depth.
struct IntersectionBuffer {
    int width = 0, height = 0;
    std::vector<Vec3> points;
    std::vector<char> valid;
    std::vector<Vec3> view_dirs;
};

inline IntersectionBuffer intersections_from_render(const RenderContext& ctx,
                                                    const RenderOutput& out,
                                                    double alpha_min = 1.0 / 255.0) {
    IntersectionBuffer buf;
    buf.width = out.width;
    buf.height = out.height;
    buf.points.resize(out.pixels());
    buf.valid.assign(out.pixels(), 0);
    buf.view_dirs = ctx.pixel_dirs;
    for (size_t px = 0; px < out.pixels(); ++px) {
        if (out.alpha[px] >= alpha_min && out.alpha_depth[px] > 1e-9) {
            buf.points[px] = ctx.pose.position + out.depth[px] * ctx.pixel_dirs[px];
            buf.valid[px] = 1;
        }
    }
    return buf;
}

/// Local plane normal from the four axis neighbors' intersections: the
/// normalized cross product of the two diagonals, oriented toward the
/// camera. Returns nothing when a neighbor is invalid or the cross product
/// degenerates.
inline std::optional<Vec3> local_plane_normal(const IntersectionBuffer& buf, int col, int row) {
    if (col < 1 || col >= buf.width - 1 || row < 1 || row >= buf.height - 1)
        return std::nullopt;
    const size_t px = static_cast<size_t>(row) * buf.width + col;
    const size_t r = px + 1, d = px + buf.width, l = px - 1, u = px - buf.width;
    if (!buf.valid[r] || !buf.valid[d] || !buf.valid[l] || !buf.valid[u])
        return std::nullopt;
    const Vec3 n = cross(buf.points[r] - buf.points[l], buf.points[d] - buf.points[u]);
    const double len = norm(n);
    if (len < 1e-12)
        return std::nullopt;
    Vec3 unit = n / len;
    if (dot(unit, buf.view_dirs[px]) > 0.0)
        unit = -unit;
    return unit;
}

/// Curvature-weighted angular alignment between blended normals and local
/// plane normals; wedge pixels carry zero weight. Accumulates the gradient
/// on the normal map when d_normal != null (the local normal is treated as
/// a constant reference).
inline double loss_normal_alignment(const RenderOutput& rendered, const IntersectionBuffer& buf,
                                    const CurvatureMap& curv, double lambda_normal,
                                    std::vector<Vec3>* d_normal = nullptr) {
    if (curv.pixels() != rendered.pixels())
        throw std::invalid_argument("loss_normal_alignment: dimensions mismatch");
    double max_score = 0.0;
    for (size_t px = 0; px < curv.score.size(); ++px)
        if (curv.valid[px])
            max_score = std::max(max_score, curv.score[px]);
    double loss = 0.0;
    for (int row = 1; row < rendered.height - 1; ++row) {
        for (int col = 1; col < rendered.width - 1; ++col) {
            const size_t px = static_cast<size_t>(row) * rendered.width + col;
            if (!curv.valid[px] || curv.wedge_mask[px])
                continue;
            const auto local = local_plane_normal(buf, col, row);
            if (!local)
                continue;
            const double w =
                lambda_normal * (1.0 - (max_score > 0.0 ? curv.score[px] / max_score : 0.0));
            loss += w * (1.0 - dot(rendered.normal[px], *local));
            if (d_normal)
                (*d_normal)[px] += -w * (*local);
        }
    }
    return loss;
}

struct WedgeEnlargeConfig {
    int confirm_views = 3;       // a cluster must appear in at least this many views
    double radius_boost = 3.0;
    double merge_voxel = 0.25;   // meters; clustering grid for wedge points
};

/// One view's evidence for wedge detection.
struct WedgeViewEvidence {
    CurvatureMap curvature;
    IntersectionBuffer intersections;
    const RenderOutput* rendered = nullptr; // must keep contributors
};

/// Flags one Gaussian per confirmed wedge cluster: the strongest contributor
/// summed across the confirming views. The flagged Gaussian is enlarged into
/// a rounded form (equalized in-plane scales, boosted radius); its SH table
/// is untouched.
inline int enlarge_wedge_gaussians(SceneModel& scene,
                                   const std::vector<WedgeViewEvidence>& views,
                                   const WedgeEnlargeConfig& cfg = {}) {
    if (static_cast<int>(views.size()) < cfg.confirm_views)
        throw std::invalid_argument("enlarge_wedge_gaussians: need at least confirm_views views");

    struct VoxelData {
        int root = -1;
    };
    // Union-find over occupied voxels (deterministic via ordered map).
    std::map<std::int64_t, int> voxel_id;
    std::vector<int> parent;
    auto find = [&](int a) {
        while (parent[static_cast<size_t>(a)] != a)
            a = parent[static_cast<size_t>(a)] = parent[static_cast<size_t>(parent[static_cast<size_t>(a)])];
        return a;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b)
            parent[static_cast<size_t>(std::max(a, b))] = std::min(a, b);
    };
    auto key_of = [&](int ix, int iy, int iz) {
        return (static_cast<std::int64_t>(ix) & 0x1fffff) |
               ((static_cast<std::int64_t>(iy) & 0x1fffff) << 21) |
               ((static_cast<std::int64_t>(iz) & 0x1fffff) << 42);
    };

    struct PointRec {
        int voxel;
        int view;
        size_t px;
    };
    std::vector<PointRec> recs;

    for (size_t vi = 0; vi < views.size(); ++vi) {
        const auto& ev = views[vi];
        for (size_t px = 0; px < ev.curvature.pixels(); ++px) {
            if (!ev.curvature.wedge_mask[px] || !ev.intersections.valid[px])
                continue;
            const Vec3 p = ev.intersections.points[px];
            const int ix = static_cast<int>(std::floor(p.x / cfg.merge_voxel));
            const int iy = static_cast<int>(std::floor(p.y / cfg.merge_voxel));
            const int iz = static_cast<int>(std::floor(p.z / cfg.merge_voxel));
            const auto key = key_of(ix, iy, iz);
            auto it = voxel_id.find(key);
            if (it == voxel_id.end()) {
                const int id = static_cast<int>(parent.size());
                parent.push_back(id);
                it = voxel_id.emplace(key, id).first;
            }
            recs.push_back({it->second, static_cast<int>(vi), px});
        }
    }
    // Connect adjacent occupied voxels.
    for (const auto& [key, id] : voxel_id) {
        const int ix = static_cast<int>(key & 0x1fffff) << 11 >> 11; // sign-extend 21 bits
        const int iy = static_cast<int>((key >> 21) & 0x1fffff) << 11 >> 11;
        const int iz = static_cast<int>((key >> 42) & 0x1fffff) << 11 >> 11;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    if (dx == 0 && dy == 0 && dz == 0)
                        continue;
                    const auto it = voxel_id.find(key_of(ix + dx, iy + dy, iz + dz));
                    if (it != voxel_id.end())
                        unite(id, it->second);
                }
    }

    // Aggregate per cluster: views seen and per-Gaussian contribution mass.
    std::map<int, std::map<int, double>> cluster_weights; // root -> gaussian -> weight
    std::map<int, std::vector<char>> cluster_views;
    for (const auto& rec : recs) {
        const int root = find(rec.voxel);
        auto& seen = cluster_views[root];
        seen.resize(views.size(), 0);
        seen[static_cast<size_t>(rec.view)] = 1;
        const auto& contribs = views[static_cast<size_t>(rec.view)].rendered->contributors[rec.px];
        auto& weights = cluster_weights[root];
        for (const auto& c : contribs)
            weights[c.gaussian] += c.weight;
    }

    int flagged = 0;
    for (const auto& [root, weights] : cluster_weights) {
        int seen = 0;
        for (char s : cluster_views[root])
            seen += s;
        if (seen < cfg.confirm_views)
            continue;
        int best = -1;
        double best_w = -1.0;
        for (const auto& [gid, w] : weights)
            if (w > best_w) {
                best_w = w;
                best = gid;
            }
        if (best < 0)
            continue;
        PlanarGaussian& g = scene.gaussians[static_cast<size_t>(best)];
        if (!g.is_wedge) {
            ++flagged;
            g.is_wedge = true;
            g.radius_boost = cfg.radius_boost;
            // Equalize the in-plane scales into a rounded disk.
            const int kn = min_scale_axis(g);
            const int ku = (kn + 1) % 3, kv = (kn + 2) % 3;
            const double mean_log = 0.5 * (g.s_log[ku] + g.s_log[kv]);
            g.s_log[ku] = mean_log;
            g.s_log[kv] = mean_log;
        }
    }
    return flagged;
}

} // namespace rfpgs
