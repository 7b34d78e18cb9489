// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 rfpgs contributors

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "rfpgs/adam.hpp"
#include "rfpgs/curvature.hpp"
#include "rfpgs/losses.hpp"
#include "rfpgs/oracle.hpp"
#include "rfpgs/scene_io.hpp"
#include "rfpgs/splat_backward.hpp"

namespace rfpgs {

struct GeomTrainConfig {
    int iterations = 30000;
    int refine_start = 27000; // curvature-aware refinement kicks in here
    double lambda_scale = 0.1;
    double lambda_normal = 0.05;
    double lambda_dssim = 0.2;
    double lambda_depth = 0.05;
    // densify / prune schedule
    int densify_interval = 500;
    int densify_until = 15000;
    double densify_grad_threshold = 4e-7;
    double min_opacity = 0.005;
    int max_gaussians = 60000;
    double percent_dense = 0.01;
    // wedge detection (meters per pixel at 1 degree pitch)
    double tau_perp = 0.05;
    double tau_depth = 0.02;
    double wedge_radius_boost = 3.0;
    int wedge_confirm_views = 3;
    double wedge_merge_voxel = 0.25;
    // initialization
    int init_count = 20000;
    double init_opacity = 0.1;
    // optimizer
    OptimizerRates rates;
    std::uint64_t seed = 1;
    int checkpoint_interval = 5000;
    double background = 0.05; // sky shade behind the splats
    double alpha_min = 1.0 / 255.0;

    void validate() const {
        if (iterations < 0 || refine_start >= iterations)
            throw std::invalid_argument("GeomTrainConfig: refine_start must be < iterations");
        if (!(tau_perp > 0.0) || !(tau_depth > 0.0))
            throw std::invalid_argument("GeomTrainConfig: wedge thresholds must be positive");
    }
};

/// One training view: pose, lambertian shade image, optional depth.
struct GeomView {
    Pose pose;
    std::vector<double> image;
    std::vector<double> depth;      // empty disables the auxiliary depth term
    std::vector<char> depth_valid;  // same size as depth when present
};

inline GeomView geom_view_from_visual(const Pose& pose, const VisualRender& vr) {
    GeomView v;
    v.pose = pose;
    v.image = vr.shade;
    v.depth = vr.depth;
    v.depth_valid = vr.valid;
    return v;
}

/// Seeds the scene with disks sampled uniformly over the oracle facets,
/// aligned to the facet normals with a random in-plane spin.
inline SceneModel init_scene_from_surfaces(const OracleScene& oracle, const Vec3& tx,
                                           double carrier_hz, int count, std::uint64_t seed,
                                           double init_opacity = 0.1) {
    SceneModel scene;
    scene.tx_position = tx;
    scene.carrier_hz = carrier_hz;
    scene.bbox = oracle.bbox;

    double total_area = 0.0;
    std::vector<double> cum;
    for (const auto& f : oracle.facets) {
        double area = 0.0;
        for (size_t i = 1; i + 1 < f.vertices.size(); ++i)
            area += 0.5 * norm(cross(f.vertices[i] - f.vertices[0], f.vertices[i + 1] - f.vertices[0]));
        total_area += area;
        cum.push_back(total_area);
    }
    if (total_area <= 0.0)
        throw std::invalid_argument("init_scene_from_surfaces: oracle scene has no area");
    const double radius = 0.8 * std::sqrt(total_area / std::max(1, count));

    Rng rng = make_rng(seed, 300);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int nb = sh_basis_count(scene.sh_degree);
    (void)nb;
    for (int i = 0; i < count; ++i) {
        const double pick = u01(rng) * total_area;
        size_t fi = 0;
        while (fi + 1 < cum.size() && cum[fi] < pick)
            ++fi;
        const auto& f = oracle.facets[fi];
        // Uniform point on the polygon by fan-triangle area sampling.
        std::vector<double> tri_cum;
        double tri_total = 0.0;
        for (size_t t = 1; t + 1 < f.vertices.size(); ++t) {
            tri_total += 0.5 * norm(cross(f.vertices[t] - f.vertices[0], f.vertices[t + 1] - f.vertices[0]));
            tri_cum.push_back(tri_total);
        }
        const double tpick = u01(rng) * tri_total;
        size_t ti = 0;
        while (ti + 1 < tri_cum.size() && tri_cum[ti] < tpick)
            ++ti;
        double a = u01(rng), b = u01(rng);
        if (a + b > 1.0) {
            a = 1.0 - a;
            b = 1.0 - b;
        }
        const Vec3 p = f.vertices[0] + a * (f.vertices[ti + 1] - f.vertices[0]) +
                       b * (f.vertices[ti + 2] - f.vertices[0]);

        PlanarGaussian g;
        g.x_g = p;
        g.set_scales({radius, radius, 0.1 * radius});
        // Rotate local +z onto the facet normal, then spin in plane.
        const Vec3 n = f.normal();
        const Vec3 z{0, 0, 1};
        Quat align{1, 0, 0, 0};
        const double c = dot(z, n);
        if (c < -0.999999) {
            align = Quat{0, 1, 0, 0}; // 180 degrees about x
        } else if (c < 0.999999) {
            const Vec3 axis = cross(z, n);
            align = quat_from_axis_angle(axis, std::acos(std::clamp(c, -1.0, 1.0)));
        }
        const Quat spin = quat_from_axis_angle(n, u01(rng) * kTwoPi);
        g.q = quat_mul(spin, align).normalized();
        g.set_alpha(init_opacity);
        g.sh = ShTable(scene.sh_degree, static_cast<int>(scene.sh_channels.size()));
        const int vis = scene.sh_channel_index("vis");
        if (vis >= 0)
            g.sh.channel(vis)[0] = f.albedo / kSh00 * 0.6;
        scene.gaussians.push_back(std::move(g));
    }
    return scene;
}

inline SceneModel init_scene_uniform(const Aabb& bbox, const Vec3& tx, double carrier_hz,
                                     int count, std::uint64_t seed, double init_opacity = 0.1) {
    SceneModel scene;
    scene.tx_position = tx;
    scene.carrier_hz = carrier_hz;
    scene.bbox = bbox;
    Rng rng = make_rng(seed, 301);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const Vec3 ext = bbox.extent();
    const double radius = 0.05 * std::cbrt(ext.x * ext.y * ext.z / std::max(1, count)) * 10.0;
    for (int i = 0; i < count; ++i) {
        PlanarGaussian g;
        g.x_g = bbox.min + Vec3{u01(rng) * ext.x, u01(rng) * ext.y, u01(rng) * ext.z};
        g.set_scales({radius, radius, 0.1 * radius});
        g.q = Quat{u01(rng) * 2 - 1 + 1.5, u01(rng) * 2 - 1, u01(rng) * 2 - 1, u01(rng) * 2 - 1}.normalized();
        g.set_alpha(init_opacity);
        g.sh = ShTable(scene.sh_degree, static_cast<int>(scene.sh_channels.size()));
        const int vis = scene.sh_channel_index("vis");
        if (vis >= 0)
            g.sh.channel(vis)[0] = 0.5 / kSh00;
        scene.gaussians.push_back(std::move(g));
    }
    return scene;
}

/// Mutable training state; serializable so a run can resume mid-way.
struct GeomTrainState {
    SceneOptimizer opt;
    Rng rng;
    std::int64_t iteration = 0;
    std::vector<double> grad_accum;
    std::vector<int> grad_count;

    void save(const std::filesystem::path& dir) const {
        std::ofstream os(dir / "opt.bin", std::ios::binary);
        opt.save(os);
        const std::uint64_t n = grad_accum.size();
        os.write(reinterpret_cast<const char*>(&n), sizeof(n));
        os.write(reinterpret_cast<const char*>(grad_accum.data()), static_cast<std::streamsize>(n * 8));
        os.write(reinterpret_cast<const char*>(grad_count.data()),
                 static_cast<std::streamsize>(n * sizeof(int)));
        std::ofstream rs(dir / "rng.txt");
        rs << rng << "\n" << iteration << "\n";
    }

    void load(const std::filesystem::path& dir) {
        std::ifstream is(dir / "opt.bin", std::ios::binary);
        if (!is)
            throw std::runtime_error("cannot read optimizer state in " + dir.string());
        opt.load(is);
        std::uint64_t n = 0;
        is.read(reinterpret_cast<char*>(&n), sizeof(n));
        grad_accum.resize(n);
        grad_count.resize(n);
        is.read(reinterpret_cast<char*>(grad_accum.data()), static_cast<std::streamsize>(n * 8));
        is.read(reinterpret_cast<char*>(grad_count.data()),
                static_cast<std::streamsize>(n * sizeof(int)));
        std::ifstream rs(dir / "rng.txt");
        if (!(rs >> rng >> iteration))
            throw std::runtime_error("cannot read rng state in " + dir.string());
    }
};

struct GeomLossRow {
    std::int64_t iteration;
    double photometric, dssim, depth, scale, align, total;
    size_t gaussians;
};

namespace detail {

inline void densify_and_prune(SceneModel& scene, SceneOptimizer& opt, std::vector<double>& accum,
                              std::vector<int>& count, const GeomTrainConfig& cfg, Rng& rng) {
    const double extent = scene.bbox.diagonal();
    const size_t n = scene.gaussians.size();
    std::vector<char> keep(n, 1);
    for (size_t i = 0; i < n; ++i) {
        const auto& g = scene.gaussians[i];
        const Vec3 s = g.scales();
        const double smax = std::max({s.x, s.y, s.z});
        if (g.alpha() < cfg.min_opacity || smax > 0.3 * extent)
            keep[i] = 0;
    }
    // prune scene + state rows
    {
        size_t w = 0;
        for (size_t i = 0; i < n; ++i) {
            if (!keep[i])
                continue;
            if (w != i) {
                scene.gaussians[w] = std::move(scene.gaussians[i]);
                accum[w] = accum[i];
                count[w] = count[i];
            }
            ++w;
        }
        scene.gaussians.resize(w);
        accum.resize(w);
        count.resize(w);
        opt.prune(keep);
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    const size_t survivors = scene.gaussians.size();
    for (size_t i = 0; i < survivors; ++i) {
        if (static_cast<int>(scene.gaussians.size()) >= cfg.max_gaussians)
            break;
        const double avg = count[i] > 0 ? accum[i] / count[i] : 0.0;
        if (avg <= cfg.densify_grad_threshold)
            continue;
        PlanarGaussian& g = scene.gaussians[i];
        const int kn = min_scale_axis(g);
        const int ku = (kn + 1) % 3, kv = (kn + 2) % 3;
        const Vec3 s = g.scales();
        const double smax = std::max(s[ku], s[kv]);
        const Mat3 rot = rotation_matrix(g.q);
        PlanarGaussian child = g;
        if (smax > cfg.percent_dense * extent) {
            // split: shrink both, place the child inside the old footprint
            g.s_log[ku] -= std::log(1.6);
            g.s_log[kv] -= std::log(1.6);
            child.s_log = g.s_log;
            child.x_g = g.x_g + rot.col[ku] * (0.5 * s[ku] * gauss(rng)) +
                        rot.col[kv] * (0.5 * s[kv] * gauss(rng));
        } else {
            // clone with a small in-plane nudge
            child.x_g = g.x_g + rot.col[ku] * (0.3 * s[ku] * gauss(rng)) +
                        rot.col[kv] * (0.3 * s[kv] * gauss(rng));
        }
        scene.bbox.clamp_inside(child.x_g, 0.10);
        scene.gaussians.push_back(std::move(child));
        accum.push_back(0.0);
        count.push_back(0);
        opt.append(1);
    }
    accum.assign(scene.gaussians.size(), 0.0);
    count.assign(scene.gaussians.size(), 0);
}

inline void run_wedge_pass(SceneModel& scene, const std::vector<GeomView>& views,
                           const GeomTrainConfig& cfg) {
    const int vis_id = scene.sh_channel_index("vis");
    const int w = std::min<int>(cfg.wedge_confirm_views, static_cast<int>(views.size()));
    std::vector<WedgeViewEvidence> evidence;
    std::vector<RenderOutput> outputs;
    std::vector<RenderContext> contexts;
    outputs.reserve(static_cast<size_t>(w));
    contexts.reserve(static_cast<size_t>(w));
    for (int k = 0; k < w; ++k) {
        const auto& view = views[static_cast<size_t>(k) * views.size() / static_cast<size_t>(w)];
        RenderOptions opts;
        opts.channel_ids = {vis_id};
        opts.background = {cfg.background};
        opts.keep_contributors = true;
        contexts.push_back(build_render_context(scene, view.pose, opts));
        outputs.push_back(render(contexts.back()));
    }
    for (int k = 0; k < w; ++k) {
        const auto& out = outputs[static_cast<size_t>(k)];
        const auto& ctx = contexts[static_cast<size_t>(k)];
        IntersectionBuffer buf = intersections_from_render(ctx, out, cfg.alpha_min);
        const double pitch_deg = rad2deg(ctx.pose.pitch_zen());
        CurvatureMap curv = estimate_curvature(out.depth, out.perp, buf.valid, out.width,
                                               out.height, cfg.tau_perp * pitch_deg,
                                               cfg.tau_depth * pitch_deg);
        evidence.push_back({std::move(curv), std::move(buf), &outputs[static_cast<size_t>(k)]});
    }
    WedgeEnlargeConfig wc;
    wc.confirm_views = w;
    wc.radius_boost = cfg.wedge_radius_boost;
    wc.merge_voxel = cfg.wedge_merge_voxel;
    enlarge_wedge_gaussians(scene, evidence, wc);
}

} // namespace detail

/// Stage-1 trainer: photometric (L1 + structural) plus flattening, optional
/// depth supervision, and the curvature-aware refinement tail. Returns the
/// trained scene; emits checkpoints and a loss CSV when outdir is set.
inline SceneModel train_geometry(const std::vector<GeomView>& views, const GeomTrainConfig& cfg,
                                 SceneModel scene, GeomTrainState* state_in = nullptr,
                                 const std::filesystem::path& outdir = {},
                                 std::vector<GeomLossRow>* loss_log = nullptr) {
    cfg.validate();
    if (views.empty())
        throw std::invalid_argument("train_geometry: empty dataset");
    const int vis_id = scene.sh_channel_index("vis");
    if (vis_id < 0)
        throw std::invalid_argument("train_geometry: scene lacks a 'vis' SH channel");

    GeomTrainState local_state;
    GeomTrainState& st = state_in ? *state_in : local_state;
    if (st.opt.gaussian_count() != scene.gaussians.size()) {
        st.opt = SceneOptimizer(scene, cfg.rates, scene.bbox.diagonal());
        st.rng = make_rng(cfg.seed, 400);
        st.iteration = 0;
        st.grad_accum.assign(scene.gaussians.size(), 0.0);
        st.grad_count.assign(scene.gaussians.size(), 0);
    }

    std::ofstream loss_csv;
    if (!outdir.empty()) {
        std::filesystem::create_directories(outdir);
        const bool fresh = st.iteration == 0;
        loss_csv.open(outdir / "loss_geom.csv", fresh ? std::ios::trunc : std::ios::app);
        if (fresh)
            loss_csv << "iteration,photometric,dssim,depth,scale,align,total,gaussians\n";
    }

    std::uniform_int_distribution<int> view_pick(0, static_cast<int>(views.size()) - 1);

    for (std::int64_t it = st.iteration; it < cfg.iterations; ++it) {
        if (it == cfg.refine_start)
            detail::run_wedge_pass(scene, views, cfg);

        const GeomView& view = views[static_cast<size_t>(view_pick(st.rng))];
        const size_t npx = static_cast<size_t>(view.pose.width) * view.pose.height;

        RenderOptions opts;
        opts.channel_ids = {vis_id};
        opts.background = {cfg.background};
        opts.active_sh_degree = 1; // low-degree visual bands only
        const RenderContext ctx = build_render_context(scene, view.pose, opts);
        const RenderOutput out = render(ctx);

        RenderUpstream up;
        up.d_channels.assign(1, std::vector<double>(npx, 0.0));

        // photometric: (1 - lambda) L1 + lambda DSSIM
        std::vector<double> d_l1;
        const std::vector<double> ones(npx, 1.0);
        const double l1 = weighted_l1(out.channel_maps[0], view.image, ones, &d_l1);
        for (size_t i = 0; i < npx; ++i)
            up.d_channels[0][i] += (1.0 - cfg.lambda_dssim) * d_l1[i];
        const double dssim = dssim_loss(out.channel_maps[0], view.image, view.pose.width,
                                        view.pose.height, 1.0, cfg.lambda_dssim, up.d_channels[0]);

        // auxiliary depth supervision on covered pixels
        double depth_term = 0.0;
        if (!view.depth.empty() && cfg.lambda_depth > 0.0) {
            std::vector<double> wts(npx, 0.0);
            for (size_t i = 0; i < npx; ++i)
                if (view.depth_valid[i] && out.alpha_depth[i] > 1e-9)
                    wts[i] = 1.0;
            std::vector<double> d_depth;
            depth_term = cfg.lambda_depth * weighted_l1(out.depth, view.depth, wts, &d_depth);
            up.d_depth.assign(npx, 0.0);
            for (size_t i = 0; i < npx; ++i)
                up.d_depth[i] = cfg.lambda_depth * d_depth[i];
        }

        // curvature-aware refinement tail
        double align_term = 0.0;
        if (it >= cfg.refine_start && cfg.lambda_normal > 0.0) {
            IntersectionBuffer buf = intersections_from_render(ctx, out, cfg.alpha_min);
            const double pitch_deg = rad2deg(view.pose.pitch_zen());
            const CurvatureMap curv =
                estimate_curvature(out.depth, out.perp, buf.valid, out.width, out.height,
                                   cfg.tau_perp * pitch_deg, cfg.tau_depth * pitch_deg);
            up.d_normal.assign(npx, Vec3{0, 0, 0});
            align_term = loss_normal_alignment(out, buf, curv, cfg.lambda_normal, &up.d_normal);
        }

        ParamGrads grads;
        grads.resize(scene);
        render_backward(ctx, up, grads);

        const double scale_term = cfg.lambda_scale * loss_min_scale(scene);
        if (cfg.lambda_scale > 0.0)
            grad_min_scale(scene, cfg.lambda_scale, grads);

        for (size_t g = 0; g < scene.gaussians.size(); ++g) {
            st.grad_accum[g] += norm(grads.x_g[g]);
            st.grad_count[g] += 1;
        }

        st.opt.step(scene, grads);
        st.iteration = it + 1;

        if (it < cfg.densify_until && cfg.densify_interval > 0 &&
            (it + 1) % cfg.densify_interval == 0) {
            detail::densify_and_prune(scene, st.opt, st.grad_accum, st.grad_count, cfg, st.rng);
        }

        const double total = l1 * (1.0 - cfg.lambda_dssim) + dssim + depth_term + scale_term + align_term;
        if (loss_log)
            loss_log->push_back({it, l1, dssim, depth_term, scale_term, align_term, total,
                                 scene.gaussians.size()});
        if (loss_csv.is_open() && (it % 50 == 0 || it + 1 == cfg.iterations)) {
            loss_csv << it << "," << l1 << "," << dssim << "," << depth_term << "," << scale_term
                     << "," << align_term << "," << total << "," << scene.gaussians.size() << "\n";
        }
        if (!outdir.empty() && cfg.checkpoint_interval > 0 &&
            ((it + 1) % cfg.checkpoint_interval == 0 || it + 1 == cfg.iterations)) {
            const auto ckpt = outdir / ("checkpoint_" + std::to_string(it + 1));
            std::filesystem::create_directories(ckpt);
            save_scene(scene, ckpt / "scene.json");
            st.save(ckpt);
        }
    }
    return scene;
}

} // namespace rfpgs
