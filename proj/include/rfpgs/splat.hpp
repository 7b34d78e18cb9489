// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "rfpgs/common.hpp"
#include "rfpgs/types.hpp"

namespace rfpgs {

/// Perpendicular distance from a point to the Gaussian's supporting plane,
/// measured along the plane normal.
inline double perpendicular_distance(const PlanarGaussian& g, const Vec3& x_rx) {
    return std::abs(dot(x_rx - g.x_g, normal_from_gaussian(g)));
}

/// Distance along the query ray to the Gaussian's supporting plane.
/// Near-parallel rays (|d.n| <= eps_parallel) are rejected here; the
/// renderer keeps such hits for gain with zero depth weight instead.
inline double plane_depth(const PlanarGaussian& g, const Vec3& x_rx, const Vec3& d_query,
                          double eps_parallel = 1e-4) {
    const Vec3 n = normal_from_gaussian(g);
    const double denom = dot(d_query, n);
    if (std::abs(denom) <= eps_parallel)
        throw std::invalid_argument("plane_depth: query ray near-parallel to plane");
    return std::abs(dot(x_rx - g.x_g, n) / denom);
}

enum class TransmittanceForm {
    Exponential, // T_k = exp(-sum_{j<k} alpha_j)
    Product      // T_k = prod_{j<k} (1 - alpha_j)
};

struct CompositeHit {
    double depth = 0.0;
    double alpha = 0.0;
    std::vector<double> values;
};

struct CompositeResult {
    std::vector<double> blended;   // per channel
    double accumulated_alpha = 0.0;
    std::vector<double> weights;   // T_k * alpha_k per hit
    double final_transmittance = 1.0;
};

/// Front-to-back alpha blending over a depth-sorted hit list.
inline CompositeResult composite_ray(const std::vector<CompositeHit>& hits,
                                     TransmittanceForm form = TransmittanceForm::Exponential) {
    for (size_t k = 1; k < hits.size(); ++k)
        assert(hits[k].depth >= hits[k - 1].depth && "composite_ray: hits must be depth-sorted");
    CompositeResult res;
    const size_t nch = hits.empty() ? 0 : hits[0].values.size();
    res.blended.assign(nch, 0.0);
    res.weights.reserve(hits.size());
    double transmittance = 1.0;
    double alpha_sum = 0.0;
    for (const auto& h : hits) {
        assert(h.alpha >= 0.0 && h.alpha <= 1.0);
        const double w = transmittance * h.alpha;
        for (size_t c = 0; c < nch; ++c)
            res.blended[c] += w * h.values[c];
        res.accumulated_alpha += w;
        res.weights.push_back(w);
        if (form == TransmittanceForm::Exponential) {
            alpha_sum += h.alpha;
            transmittance = std::exp(-alpha_sum);
        } else {
            transmittance *= (1.0 - h.alpha);
        }
    }
    res.final_transmittance = transmittance;
    return res;
}

struct RenderOptions {
    double alpha_min = 1.0 / 255.0; // accumulated-alpha threshold for valid pixels
    double eps_parallel = 1e-4;     // grazing-ray threshold on |d.n|
    TransmittanceForm form = TransmittanceForm::Exponential;
    double sigma_cutoff = 2.0;      // footprint support, in sigmas
    double fade_start_sigma = 1.75; // C1 fade of the cutoff starts here
    int top_contributors = 32;
    bool keep_contributors = false;
    std::vector<int> channel_ids;     // SH channels to blend; empty = all
    std::vector<double> background;   // per blended channel, weighted by residual T
    int active_sh_degree = -1;        // cap on evaluated SH bands; -1 = scene degree
    int threads = 0;                  // 0 = global default
};

/// Per-pixel record of the strongest contributors, for wedge bookkeeping and
/// multi-view projection.
struct Contribution {
    int gaussian = -1;
    float weight = 0.0f;
};

struct RenderOutput {
    int width = 0;
    int height = 0;
    std::vector<int> channel_ids;
    std::vector<std::vector<double>> channel_maps; // blended, Eq.-1 raw sums
    std::vector<double> depth;       // weight-normalized plane depth [m]
    std::vector<double> perp;        // weight-normalized perpendicular distance [m]
    std::vector<Vec3> normal;        // unit blended normals (0 where empty)
    std::vector<double> alpha;       // accumulated alpha
    std::vector<double> alpha_depth; // accumulated alpha over depth-valid hits
    std::vector<std::vector<Contribution>> contributors;

    size_t pixels() const { return static_cast<size_t>(width) * height; }
    bool pixel_valid(size_t px, double alpha_min) const { return alpha[px] >= alpha_min; }
};

namespace detail {

struct GaussianFrame {
    Vec3 n, e_u, e_v; // world-frame axes; n is the min-scale axis
    Vec3 r;           // x_g - ray origin
    double rn = 0.0;  // dot(r, n)
    double su = 1.0, sv = 1.0;
    double a = 0.0;   // base opacity
    int axis_n = 2, axis_u = 0, axis_v = 1;
};

/// One resolved ray-Gaussian interaction.
struct Hit {
    int gauss = -1;
    double t = 0.0; // plane depth (or closest-approach proxy when grazing)
    double alpha = 0.0;
    double perp = 0.0;
    double u1 = 0.0, u2 = 0.0;
    double rho = 0.0;
    double denom = 0.0;
    bool depth_valid = true;
    double flip = 1.0; // normal sign flip toward the camera
};

inline double fade_window(double rho, double rho0, double rho1, double* deriv = nullptr) {
    if (rho <= rho0) {
        if (deriv)
            *deriv = 0.0;
        return 1.0;
    }
    if (rho >= rho1) {
        if (deriv)
            *deriv = 0.0;
        return 0.0;
    }
    const double s = (rho1 - rho) / (rho1 - rho0);
    if (deriv)
        *deriv = -6.0 * s * (1.0 - s) / (rho1 - rho0);
    return s * s * (3.0 - 2.0 * s);
}

/// Computes the interaction of one ray with one Gaussian.
/// Returns false when the Gaussian does not contribute.
inline bool compute_hit(const GaussianFrame& fr, const Vec3& d, double eps_parallel, double rho0,
                        double rho1, Hit& out) {
    const double denom = dot(d, fr.n);
    const bool grazing = std::abs(denom) <= eps_parallel;
    double t;
    if (grazing) {
        t = dot(fr.r, d); // closest approach to the center along the ray
    } else {
        t = fr.rn / denom;
    }
    if (t <= 1e-6)
        return false;
    const Vec3 delta = t * d - fr.r;
    const double u1 = dot(delta, fr.e_u) / fr.su;
    const double u2 = dot(delta, fr.e_v) / fr.sv;
    const double rho = u1 * u1 + u2 * u2;
    if (rho >= rho1)
        return false;
    const double window = fade_window(rho, rho0, rho1);
    const double alpha = fr.a * std::exp(-0.5 * rho) * window;
    if (alpha < 1e-14)
        return false;
    out.t = t;
    out.alpha = alpha;
    out.perp = std::abs(fr.rn);
    out.u1 = u1;
    out.u2 = u2;
    out.rho = rho;
    out.denom = denom;
    out.depth_valid = !grazing;
    out.flip = denom > 0.0 ? -1.0 : 1.0;
    return true;
}

} // namespace detail

/// Scene + pose preprocessed for rendering: derived Gaussian frames, pixel
/// ray directions, the SH basis per pixel, and a tile-binned candidate list.
struct RenderContext {
    const SceneModel* scene = nullptr;
    Pose pose;
    RenderOptions opts;
    std::vector<int> channel_ids;
    std::vector<detail::GaussianFrame> frames;
    std::vector<Vec3> pixel_dirs;   // world frame, per pixel
    std::vector<double> sh_basis;   // per pixel: basis at -d, kShMaxBasis stride
    int tile = 8;
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> bins;

    size_t pixels() const { return static_cast<size_t>(pose.width) * pose.height; }

    const std::vector<int>& candidates(int col, int row) const {
        return bins[static_cast<size_t>(row / tile) * tiles_x + col / tile];
    }
};

namespace detail {

inline void bin_equirect(RenderContext& ctx) {
    const Pose& pose = ctx.pose;
    const double zen_min = pose.zenith_min();
    const double az_min = pose.azimuth_min();
    const double margin = std::max(pose.pitch_az(), pose.pitch_zen());
    const bool full_az = pose.fov_az >= kTwoPi - 1e-9;

    for (size_t gi = 0; gi < ctx.frames.size(); ++gi) {
        const auto& fr = ctx.frames[gi];
        const Vec3 v = fr.r; // x_g - origin
        const double dist = norm(v);
        const double radius = ctx.opts.sigma_cutoff * std::max(fr.su, fr.sv);
        int r0 = 0, r1 = pose.height - 1, c0 = 0, c1 = pose.width - 1;
        bool all_cols = true;
        bool wrap = false;
        if (dist > radius * 1.0000001) {
            const double theta = std::asin(std::min(1.0, radius / dist)) + margin;
            const Vec3 dc = rotate_inv(pose.orientation, v / dist);
            double az_c, zen_c;
            direction_to_angles(dc, az_c, zen_c);
            const double zen_lo = zen_c - theta, zen_hi = zen_c + theta;
            if (zen_hi < zen_min || zen_lo > zen_min + pose.fov_zen)
                continue;
            r0 = std::max(0, static_cast<int>(std::floor((zen_lo - zen_min) / pose.pitch_zen())));
            r1 = std::min(pose.height - 1,
                          static_cast<int>(std::floor((zen_hi - zen_min) / pose.pitch_zen())));
            if (r0 > r1)
                continue;
            if (zen_lo > 1e-9 && zen_hi < kPi - 1e-9) {
                const double sin_min = std::min(std::sin(zen_lo), std::sin(zen_hi));
                const double del_az = theta / std::max(sin_min, 1e-9);
                if (del_az < kPi) {
                    all_cols = false;
                    double az_lo = az_c - del_az, az_hi = az_c + del_az;
                    if (full_az) {
                        // Wrap: columns are modulo width.
                        c0 = static_cast<int>(std::floor((az_lo - az_min) / pose.pitch_az()));
                        c1 = static_cast<int>(std::floor((az_hi - az_min) / pose.pitch_az()));
                        if (c1 - c0 + 1 >= pose.width) {
                            all_cols = true;
                        } else {
                            wrap = true;
                        }
                    } else {
                        az_lo = std::max(az_lo, az_min);
                        az_hi = std::min(az_hi, az_min + pose.fov_az);
                        if (az_lo > az_hi)
                            continue;
                        c0 = std::max(0, static_cast<int>(std::floor((az_lo - az_min) / pose.pitch_az())));
                        c1 = std::min(pose.width - 1,
                                      static_cast<int>(std::floor((az_hi - az_min) / pose.pitch_az())));
                    }
                }
            }
        }
        const int t0r = r0 / ctx.tile, t1r = r1 / ctx.tile;
        if (all_cols || !wrap) {
            const int t0c = all_cols ? 0 : c0 / ctx.tile;
            const int t1c = all_cols ? ctx.tiles_x - 1 : c1 / ctx.tile;
            for (int tr = t0r; tr <= t1r; ++tr)
                for (int tc = t0c; tc <= t1c; ++tc)
                    ctx.bins[static_cast<size_t>(tr) * ctx.tiles_x + tc].push_back(static_cast<int>(gi));
        } else {
            // Wrapped azimuth interval: mark the tiles of both segments.
            for (int tr = t0r; tr <= t1r; ++tr) {
                std::vector<bool> marked(static_cast<size_t>(ctx.tiles_x), false);
                for (int c = c0; c <= c1; ++c) {
                    int cc = c % pose.width;
                    if (cc < 0)
                        cc += pose.width;
                    marked[static_cast<size_t>(cc / ctx.tile)] = true;
                }
                for (int tc = 0; tc < ctx.tiles_x; ++tc)
                    if (marked[static_cast<size_t>(tc)])
                        ctx.bins[static_cast<size_t>(tr) * ctx.tiles_x + tc].push_back(static_cast<int>(gi));
            }
        }
    }
}

inline void bin_pinhole(RenderContext& ctx) {
    // Cone-vs-cone test per tile: simple and safely conservative.
    const Pose& pose = ctx.pose;
    std::vector<Vec3> tile_dirs(static_cast<size_t>(ctx.tiles_x) * ctx.tiles_y);
    std::vector<double> tile_radius(tile_dirs.size());
    for (int tr = 0; tr < ctx.tiles_y; ++tr) {
        for (int tc = 0; tc < ctx.tiles_x; ++tc) {
            const double cm = std::min<double>(pose.width - 1, tc * ctx.tile + 0.5 * (ctx.tile - 1));
            const double rm = std::min<double>(pose.height - 1, tr * ctx.tile + 0.5 * (ctx.tile - 1));
            const Vec3 center = rotate(pose.orientation, pose.pixel_to_direction_cam(cm, rm));
            double rad = 0.0;
            const double corners[4][2] = {{-0.5, -0.5},
                                          {ctx.tile - 0.5, -0.5},
                                          {-0.5, ctx.tile - 0.5},
                                          {ctx.tile - 0.5, ctx.tile - 0.5}};
            for (const auto& c : corners) {
                const Vec3 d = rotate(pose.orientation,
                                      pose.pixel_to_direction_cam(tc * ctx.tile + c[0], tr * ctx.tile + c[1]));
                rad = std::max(rad, std::acos(std::clamp(dot(center, d), -1.0, 1.0)));
            }
            tile_dirs[static_cast<size_t>(tr) * ctx.tiles_x + tc] = center;
            tile_radius[static_cast<size_t>(tr) * ctx.tiles_x + tc] = rad + 1e-6;
        }
    }
    for (size_t gi = 0; gi < ctx.frames.size(); ++gi) {
        const auto& fr = ctx.frames[gi];
        const double dist = norm(fr.r);
        const double radius = ctx.opts.sigma_cutoff * std::max(fr.su, fr.sv);
        if (dist <= radius * 1.0000001) {
            for (auto& bin : ctx.bins)
                bin.push_back(static_cast<int>(gi));
            continue;
        }
        const double theta = std::asin(std::min(1.0, radius / dist));
        const Vec3 dir = fr.r / dist;
        for (size_t ti = 0; ti < tile_dirs.size(); ++ti) {
            const double ang = std::acos(std::clamp(dot(dir, tile_dirs[ti]), -1.0, 1.0));
            if (ang <= theta + tile_radius[ti])
                ctx.bins[ti].push_back(static_cast<int>(gi));
        }
    }
}

} // namespace detail

inline RenderContext build_render_context(const SceneModel& scene, const Pose& pose,
                                          const RenderOptions& opts) {
    pose.validate();
    RenderContext ctx;
    ctx.scene = &scene;
    ctx.pose = pose;
    ctx.opts = opts;
    ctx.channel_ids = opts.channel_ids;
    if (ctx.channel_ids.empty())
        for (size_t c = 0; c < scene.sh_channels.size(); ++c)
            ctx.channel_ids.push_back(static_cast<int>(c));
    for (int c : ctx.channel_ids)
        if (c < 0 || c >= static_cast<int>(scene.sh_channels.size()))
            throw std::invalid_argument("render: channel id out of range");
    if (!opts.background.empty() && opts.background.size() != ctx.channel_ids.size())
        throw std::invalid_argument("render: background size must match blended channels");

    // Derived per-Gaussian frames.
    ctx.frames.resize(scene.gaussians.size());
    parallel_for(static_cast<std::int64_t>(scene.gaussians.size()), [&](std::int64_t b, std::int64_t e) {
        for (std::int64_t i = b; i < e; ++i) {
            const PlanarGaussian& g = scene.gaussians[static_cast<size_t>(i)];
            detail::GaussianFrame fr;
            fr.axis_n = min_scale_axis(g);
            fr.axis_u = (fr.axis_n + 1) % 3;
            fr.axis_v = (fr.axis_n + 2) % 3;
            const Mat3 rot = rotation_matrix(g.q);
            fr.n = rot.col[fr.axis_n];
            fr.e_u = rot.col[fr.axis_u];
            fr.e_v = rot.col[fr.axis_v];
            const Vec3 s = g.scales();
            const double boost = g.is_wedge ? g.radius_boost : 1.0;
            fr.su = boost * s[fr.axis_u];
            fr.sv = boost * s[fr.axis_v];
            fr.a = g.alpha();
            fr.r = g.x_g - pose.position;
            fr.rn = dot(fr.r, fr.n);
            ctx.frames[static_cast<size_t>(i)] = fr;
        }
    }, opts.threads);

    // Pixel rays and the SH basis at the emission direction (-d).
    ctx.pixel_dirs.resize(ctx.pixels());
    ctx.sh_basis.resize(ctx.pixels() * kShMaxBasis);
    parallel_for(pose.height, [&](std::int64_t rb, std::int64_t re) {
        for (std::int64_t row = rb; row < re; ++row) {
            for (int col = 0; col < pose.width; ++col) {
                const size_t px = static_cast<size_t>(row) * pose.width + col;
                const Vec3 d = rotate(pose.orientation, pose.pixel_to_direction_cam(col, static_cast<double>(row)));
                ctx.pixel_dirs[px] = d;
                eval_sh_basis(scene.sh_degree, -d, &ctx.sh_basis[px * kShMaxBasis]);
            }
        }
    }, opts.threads);

    ctx.tiles_x = (pose.width + ctx.tile - 1) / ctx.tile;
    ctx.tiles_y = (pose.height + ctx.tile - 1) / ctx.tile;
    ctx.bins.assign(static_cast<size_t>(ctx.tiles_x) * ctx.tiles_y, {});
    if (pose.projection == Projection::Equirectangular)
        detail::bin_equirect(ctx);
    else
        detail::bin_pinhole(ctx);
    return ctx;
}

/// Differentiable forward render: projects every Gaussian into the pose's
/// angular raster and alpha-blends SH channel values, plane depths,
/// perpendicular distances and normals per ray.
inline RenderOutput render(const RenderContext& ctx) {
    const SceneModel& scene = *ctx.scene;
    const Pose& pose = ctx.pose;
    const auto& opts = ctx.opts;
    const double rho1 = opts.sigma_cutoff * opts.sigma_cutoff;
    const double rho0 = opts.fade_start_sigma * opts.fade_start_sigma;
    const int nch = static_cast<int>(ctx.channel_ids.size());
    const int nb = opts.active_sh_degree >= 0
                       ? sh_basis_count(std::min(opts.active_sh_degree, scene.sh_degree))
                       : sh_basis_count(scene.sh_degree);

    RenderOutput out;
    out.width = pose.width;
    out.height = pose.height;
    out.channel_ids = ctx.channel_ids;
    out.channel_maps.assign(nch, std::vector<double>(ctx.pixels(), 0.0));
    out.depth.assign(ctx.pixels(), 0.0);
    out.perp.assign(ctx.pixels(), 0.0);
    out.normal.assign(ctx.pixels(), Vec3{0, 0, 0});
    out.alpha.assign(ctx.pixels(), 0.0);
    out.alpha_depth.assign(ctx.pixels(), 0.0);
    if (opts.keep_contributors)
        out.contributors.assign(ctx.pixels(), {});

    parallel_for(pose.height, [&](std::int64_t rb, std::int64_t re) {
        std::vector<detail::Hit> hits;
        for (std::int64_t row = rb; row < re; ++row) {
            for (int col = 0; col < pose.width; ++col) {
                const size_t px = static_cast<size_t>(row) * pose.width + col;
                const Vec3 d = ctx.pixel_dirs[px];
                const auto& cand = ctx.candidates(col, static_cast<int>(row));
                hits.clear();
                for (int gi : cand) {
                    detail::Hit h;
                    if (detail::compute_hit(ctx.frames[static_cast<size_t>(gi)], d,
                                            opts.eps_parallel, rho0, rho1, h)) {
                        h.gauss = gi;
                        hits.push_back(h);
                    }
                }
                std::sort(hits.begin(), hits.end(), [](const detail::Hit& a, const detail::Hit& b) {
                    return a.t != b.t ? a.t < b.t : a.gauss < b.gauss;
                });

                double transmittance = 1.0, alpha_sum = 0.0;
                double acc_a = 0.0, acc_ad = 0.0, depth_num = 0.0, perp_num = 0.0;
                Vec3 normal_num{0, 0, 0};
                const double* basis = &ctx.sh_basis[px * kShMaxBasis];
                for (auto& h : hits) {
                    const double w = transmittance * h.alpha;
                    const auto& fr = ctx.frames[static_cast<size_t>(h.gauss)];
                    const auto& sh = scene.gaussians[static_cast<size_t>(h.gauss)].sh;
                    for (int c = 0; c < nch; ++c) {
                        const double* co = sh.channel(ctx.channel_ids[static_cast<size_t>(c)]);
                        double val = 0.0;
                        for (int i = 0; i < nb; ++i)
                            val += co[i] * basis[i];
                        out.channel_maps[static_cast<size_t>(c)][px] += w * val;
                    }
                    acc_a += w;
                    perp_num += w * h.perp;
                    if (h.depth_valid) {
                        acc_ad += w;
                        depth_num += w * h.t;
                    }
                    normal_num += (w * h.flip) * fr.n;
                    if (opts.form == TransmittanceForm::Exponential) {
                        alpha_sum += h.alpha;
                        transmittance = std::exp(-alpha_sum);
                    } else {
                        transmittance *= (1.0 - h.alpha);
                    }
                    h.u2 = w; // stash the blend weight for the contributor pass
                }
                if (!opts.background.empty())
                    for (int c = 0; c < nch; ++c)
                        out.channel_maps[static_cast<size_t>(c)][px] +=
                            transmittance * opts.background[static_cast<size_t>(c)];
                out.alpha[px] = acc_a;
                out.alpha_depth[px] = acc_ad;
                out.depth[px] = acc_ad > 1e-12 ? depth_num / acc_ad : 0.0;
                out.perp[px] = acc_a > 1e-12 ? perp_num / acc_a : 0.0;
                out.normal[px] = normalized(normal_num);
                if (opts.keep_contributors && !hits.empty()) {
                    auto& list = out.contributors[px];
                    list.reserve(std::min<size_t>(hits.size(), static_cast<size_t>(opts.top_contributors)));
                    std::sort(hits.begin(), hits.end(), [](const detail::Hit& a, const detail::Hit& b) {
                        return a.u2 != b.u2 ? a.u2 > b.u2 : a.gauss < b.gauss;
                    });
                    const size_t keep = std::min<size_t>(hits.size(), static_cast<size_t>(opts.top_contributors));
                    for (size_t k = 0; k < keep; ++k)
                        list.push_back({hits[k].gauss, static_cast<float>(hits[k].u2)});
                }
            }
        }
    }, opts.threads);
    return out;
}

inline RenderOutput render(const SceneModel& scene, const Pose& pose, const RenderOptions& opts) {
    return render(build_render_context(scene, pose, opts));
}

} // namespace rfpgs
